fn main() {
    std::process::exit(bitfilt::cli::run());
}
