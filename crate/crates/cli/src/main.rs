fn main() {
    std::process::exit(acflab_cli::run(std::env::args_os()));
}
