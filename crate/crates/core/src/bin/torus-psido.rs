fn main() {
    std::process::exit(torus_psido::cli::run(std::env::args_os()));
}
