fn main() {
    std::process::exit(amls::cli::run_cli(std::env::args_os()));
}
