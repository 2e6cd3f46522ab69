fn main() {
    std::process::exit(q2sat::cli::run_from(std::env::args()));
}
