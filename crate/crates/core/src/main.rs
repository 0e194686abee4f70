fn main() {
    std::process::exit(symcov::cli::cli_main(std::env::args_os()));
}
