fn main() {
    std::process::exit(unilight_cli::run(std::env::args_os()));
}
