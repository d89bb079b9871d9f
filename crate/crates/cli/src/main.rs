fn main() {
    std::process::exit(memforecast_cli::run(std::env::args_os()));
}
