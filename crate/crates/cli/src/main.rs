fn main() {
    std::process::exit(exactsr_cli::run(std::env::args_os()));
}
