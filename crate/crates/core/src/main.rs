fn main() {
    std::process::exit(mical::cli::run(std::env::args_os()));
}
