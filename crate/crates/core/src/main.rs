fn main() {
    std::process::exit(mbmtrack::cli::run(std::env::args_os()));
}
