fn main() {
    std::process::exit(forkrace::cli::run(std::env::args_os()));
}
