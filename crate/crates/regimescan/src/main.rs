fn main() {
    std::process::exit(regimescan::cli::cli_main(std::env::args_os()));
}
