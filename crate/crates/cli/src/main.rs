fn main() {
    env_logger::init();
    let code = adrf_cli::run_cli(std::env::args_os(), &mut std::io::stdout().lock());
    std::process::exit(code);
}
