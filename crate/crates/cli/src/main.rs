fn main() {
    std::process::exit(szego_cli::run(std::env::args_os()));
}
