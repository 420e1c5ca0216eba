fn main() {
    std::process::exit(evosyn::cli::run_cli(std::env::args().collect()));
}
