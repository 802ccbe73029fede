fn main() {
    std::process::exit(lorentz_zeta::cli::main_with_args(std::env::args_os()));
}
