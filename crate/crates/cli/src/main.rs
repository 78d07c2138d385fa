fn main() {
    std::process::exit(monopole_cli::run(std::env::args_os()));
}
