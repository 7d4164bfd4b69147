fn main() {
    std::process::exit(isla_forge::cli::run(std::env::args_os()));
}
