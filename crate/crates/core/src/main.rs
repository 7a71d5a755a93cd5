fn main() {
    std::process::exit(synthpost::cli::main_with_args(std::env::args_os()));
}
