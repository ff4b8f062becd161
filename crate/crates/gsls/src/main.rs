fn main() {
    std::process::exit(gsls::cli::run(std::env::args_os()));
}
