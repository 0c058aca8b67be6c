fn main() {
    std::process::exit(flamelab::cli::run(std::env::args_os()));
}
