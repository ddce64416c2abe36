fn main() {
    std::process::exit(forchflow::cli::run_from(std::env::args_os()));
}
