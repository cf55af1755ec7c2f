fn main() {
    std::process::exit(pdpkit::cli::run());
}
