fn main() {
    let code = fixed_stress::cli::main_cli(std::env::args_os(), &mut std::io::stdout(), &mut std::io::stderr());
    std::process::exit(code);
}
