fn main() {
    std::process::exit(textmetric::cli::run(std::env::args_os()));
}
