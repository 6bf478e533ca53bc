fn main() {
    std::process::exit(auditmatch_service::cli::cli_dispatch(std::env::args_os()));
}
