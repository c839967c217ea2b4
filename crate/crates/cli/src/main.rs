fn main() {
    std::process::exit(mzi_cli::cli_main(std::env::args_os()));
}
