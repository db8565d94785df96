fn main() {
    std::process::exit(xplab_cli::cli::main_with_args(std::env::args_os()));
}
