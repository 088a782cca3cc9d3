fn main() {
    std::process::exit(otto_cli::run(std::env::args_os()));
}
