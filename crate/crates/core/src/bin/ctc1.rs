fn main() {
    ctc1::cli::configure_workers();
    let code = ctc1::cli::run(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
