fn main() {
    std::process::exit(splitsgd::cli::main_with_args(std::env::args_os()));
}
