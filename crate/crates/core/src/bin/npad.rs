fn main() {
    std::process::exit(npad::cli::run(std::env::args_os()));
}
