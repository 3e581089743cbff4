fn main() {
    std::process::exit(sorbit::cli::main_with_args(std::env::args_os()));
}
