fn main() {
    std::process::exit(dialex_cli::commands::run_cli(std::env::args_os()));
}
