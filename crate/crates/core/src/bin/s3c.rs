fn main() {
    std::process::exit(s3c::cli::run(std::env::args_os()));
}
