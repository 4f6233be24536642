fn main() {
    std::process::exit(cpsafe::cli::run(std::env::args_os()));
}
