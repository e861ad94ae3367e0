fn main() {
    std::process::exit(lensflow::cli::run(std::env::args_os()));
}
