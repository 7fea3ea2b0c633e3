fn main() {
    std::process::exit(errmoments_cli::main_with_args(std::env::args_os()));
}
