fn main() {
    std::process::exit(ultrainject::cli::dispatch(std::env::args_os()));
}
