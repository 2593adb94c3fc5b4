fn main() {
    std::process::exit(ppikit::cli::run(std::env::args_os()));
}
