fn main() {
    std::process::exit(se3_diffuse::cli::run(std::env::args_os()));
}
