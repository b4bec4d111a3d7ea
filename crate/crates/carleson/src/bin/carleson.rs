fn main() {
    std::process::exit(carleson::report::cli::run(std::env::args_os()));
}
