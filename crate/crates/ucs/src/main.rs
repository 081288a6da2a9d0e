fn main() {
    std::process::exit(ucs::cli::run(std::env::args_os()));
}
