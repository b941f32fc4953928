fn main() {
    std::process::exit(covop::cli::run());
}
