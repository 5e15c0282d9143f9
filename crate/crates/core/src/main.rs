fn main() {
    std::process::exit(scorecusum::cli::main_with_args(std::env::args_os()));
}
