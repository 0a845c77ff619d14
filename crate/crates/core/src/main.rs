fn main() {
    std::process::exit(hawkes_core::cli::run(std::env::args_os()));
}
