fn main() {
    std::process::exit(trapezoid_spectra::cli::main_with_args(std::env::args_os()));
}
