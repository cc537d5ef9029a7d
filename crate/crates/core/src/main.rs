fn main() {
    std::process::exit(morphlet::cli::run());
}
