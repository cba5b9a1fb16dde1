fn main() {
    std::process::exit(equal_impact::cli::run(std::env::args_os()));
}
