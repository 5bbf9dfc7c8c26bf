fn main() {
    std::process::exit(hardylab_cli::run(std::env::args_os()));
}
