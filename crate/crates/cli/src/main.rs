fn main() {
    std::process::exit(fdms_cli::run(std::env::args_os()));
}
