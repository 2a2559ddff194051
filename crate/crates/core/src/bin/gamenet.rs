fn main() {
    std::process::exit(gamenet::cli::run(std::env::args_os()));
}
