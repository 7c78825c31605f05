fn main() {
    std::process::exit(slimtsf::cli::run_from_args(std::env::args_os()));
}
