fn main() {
    std::process::exit(entropy_roofline::cli::main_with_args(std::env::args_os()));
}
