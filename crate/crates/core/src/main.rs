fn main() {
    std::process::exit(cepfront::cli::run_command(std::env::args_os()));
}
