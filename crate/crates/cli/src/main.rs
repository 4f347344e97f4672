fn main() {
    std::process::exit(macrophase_cli::main_with_args(std::env::args_os()));
}
