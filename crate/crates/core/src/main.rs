fn main() {
    std::process::exit(sparsesep::cli::run(std::env::args_os()));
}
