fn main() {
    std::process::exit(wisense::cli::main_with_args(std::env::args_os()));
}
