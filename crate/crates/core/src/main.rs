fn main() {
    std::process::exit(epoch_active::cli::main_with_args(std::env::args_os()));
}
