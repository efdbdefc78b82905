fn main() {
    std::process::exit(sparse_sde::cli::main_with_args(std::env::args_os()));
}
