use clap::Parser;
use qkr_cli::{execute, Cli};

fn main() {
    let cli = Cli::parse();
    let mut stdout = std::io::stdout().lock();
    let code = match execute(&cli, &mut stdout) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("qkr: {e}");
            e.exit_code()
        }
    };
    std::process::exit(code);
}
