fn main() {
    std::process::exit(phasefield::cli::cli_main(std::env::args_os()));
}
