fn main() {
    std::process::exit(regolith::cli::run(std::env::args_os()));
}
