fn main() {
    std::process::exit(qparity::cli::run(std::env::args_os()));
}
