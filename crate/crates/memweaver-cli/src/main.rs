fn main() {
    std::process::exit(memweaver_cli::dispatch(std::env::args()));
}
