fn main() {
    std::process::exit(drg::cli::run(std::env::args_os()));
}
