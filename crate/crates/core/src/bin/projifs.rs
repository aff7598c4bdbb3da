fn main() {
    std::process::exit(projifs::cli::run(std::env::args()));
}
