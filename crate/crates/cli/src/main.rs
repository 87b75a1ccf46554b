fn main() {
    std::process::exit(arts_cli::run(std::env::args_os()));
}
