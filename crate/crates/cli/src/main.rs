fn main() {
    std::process::exit(sideband_cli::run(std::env::args_os()));
}
