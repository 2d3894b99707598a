fn main() {
    std::process::exit(hbsae::cli::run(std::env::args_os()));
}
