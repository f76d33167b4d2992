fn main() {
    std::process::exit(mdis_core::cli::run(std::env::args_os()));
}
