fn main() {
    std::process::exit(spillnet::cli::run(std::env::args_os()));
}
