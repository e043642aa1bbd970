fn main() {
    std::process::exit(qdpack::cli::run(std::env::args_os()));
}
