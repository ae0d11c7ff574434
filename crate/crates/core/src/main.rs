fn main() {
    std::process::exit(tablequery::cli::run(std::env::args_os()));
}
