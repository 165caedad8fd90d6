fn main() {
    std::process::exit(cascade_tiler::cli::run_from_args(std::env::args_os()));
}
