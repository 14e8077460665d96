fn main() {
    let code = surfenv::cli::run(std::env::args_os());
    std::process::exit(code);
}
