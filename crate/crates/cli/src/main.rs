fn main() {
    std::process::exit(wignerlab_cli::main_with_args(std::env::args_os()));
}
