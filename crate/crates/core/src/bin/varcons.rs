fn main() {
    std::process::exit(varcons::cli::run(std::env::args_os()));
}
