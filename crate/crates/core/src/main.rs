fn main() {
    std::process::exit(convseq::cli::run(std::env::args_os()));
}
