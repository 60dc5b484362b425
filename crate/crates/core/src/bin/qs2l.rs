fn main() {
    std::process::exit(qs2l::cli::run(std::env::args_os()));
}
