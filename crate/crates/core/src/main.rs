fn main() {
    std::process::exit(loopflat::cli::run(std::env::args_os()));
}
