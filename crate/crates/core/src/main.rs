fn main() {
    std::process::exit(hmt::cli::run(std::env::args_os()));
}
