fn main() {
    std::process::exit(superhedge::cli::run(std::env::args_os()));
}
