fn main() {
    std::process::exit(gridless_tomo::cli::main_with_args(std::env::args_os()));
}
