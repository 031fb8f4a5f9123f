fn main() {
    std::process::exit(muniwarn::cli::run());
}
