fn main() {
    std::process::exit(pel::cli::main_with_args(std::env::args_os()));
}
