fn main() {
    std::process::exit(ticolor::cli::run_from(std::env::args_os()));
}
