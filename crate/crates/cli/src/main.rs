fn main() {
    std::process::exit(superlearner_cli::main_with_args(std::env::args_os()));
}
