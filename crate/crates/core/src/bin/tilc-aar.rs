fn main() {
    std::process::exit(tilc_aar::cli::run(std::env::args_os()));
}
