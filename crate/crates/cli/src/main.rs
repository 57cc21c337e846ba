fn main() {
    std::process::exit(starksim_cli::run_cli(std::env::args_os()));
}
