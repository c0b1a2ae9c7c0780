fn main() {
    std::process::exit(roict::cli::run(std::env::args_os()));
}
