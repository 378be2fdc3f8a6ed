fn main() {
    std::process::exit(accm::cli::main_with_args(std::env::args_os()));
}
