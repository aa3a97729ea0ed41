fn main() {
    std::process::exit(fedsplit::cli::main_with_args(std::env::args_os()));
}
