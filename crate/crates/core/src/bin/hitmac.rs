fn main() {
    env_logger::init();
    std::process::exit(hitmac::cli::run(std::env::args_os()));
}
