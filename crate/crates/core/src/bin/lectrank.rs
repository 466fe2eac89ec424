fn main() {
    std::process::exit(lectrank::cli::run());
}
