fn main() {
    std::process::exit(propscope::cli::main_with_args(std::env::args_os()));
}
