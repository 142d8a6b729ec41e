fn main() {
    std::process::exit(caasr_cli::main_with_args(std::env::args_os()));
}
