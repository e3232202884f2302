fn main() {
    std::process::exit(thermopinn::harness::run_cli(std::env::args_os()));
}
