fn main() {
    std::process::exit(kwc_parabolic::cli::run(std::env::args_os()));
}
