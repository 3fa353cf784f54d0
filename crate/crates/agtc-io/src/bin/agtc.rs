fn main() {
    std::process::exit(agtc_io::cli::run(std::env::args_os()));
}
