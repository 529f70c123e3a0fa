fn main() {
    std::process::exit(cauchy_deconv::cli::main_from_args(std::env::args_os()));
}
