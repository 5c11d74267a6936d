fn main() {
    std::process::exit(dcm_cli::main_with_args(std::env::args_os()));
}
