fn main() {
    let code = pas::cli::run(std::env::args_os().collect());
    std::process::exit(code);
}
