fn main() {
    std::process::exit(pvsignal::cli::main_with_args(std::env::args_os()));
}
