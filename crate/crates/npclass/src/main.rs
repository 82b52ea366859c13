fn main() {
    std::process::exit(npclass::cli::run(std::env::args_os()));
}
