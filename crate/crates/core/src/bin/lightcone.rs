fn main() {
    std::process::exit(lightcone::cli::run_cli(std::env::args_os()));
}
