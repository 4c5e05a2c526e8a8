fn main() {
    std::process::exit(fracvi::cli::main_with_args(std::env::args_os()));
}
