fn main() {
    std::process::exit(vlfmac::cli::run());
}
