fn main() {
    std::process::exit(accident_grounding::cli::dispatch(std::env::args_os()));
}
