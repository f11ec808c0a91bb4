fn main() {
    std::process::exit(alphacc::cli::run(std::env::args_os()));
}
