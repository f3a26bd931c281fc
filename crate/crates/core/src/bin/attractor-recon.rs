fn main() {
    std::process::exit(attractor_recon::cli::run(std::env::args_os()));
}
