fn main() {
    std::process::exit(peakmodel::cli::main_with_args(std::env::args_os()));
}
