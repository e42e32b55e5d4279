fn main() {
    std::process::exit(skewscan::cli::run_from_args(std::env::args_os()));
}
