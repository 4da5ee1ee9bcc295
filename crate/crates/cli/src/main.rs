use std::process::ExitCode;

fn main() -> ExitCode {
    if let Some(warning) = phonolab_cli::configure_threads() {
        eprintln!("warning: {warning}");
    }
    let outcome = phonolab_cli::run(std::env::args_os());
    if outcome.exit_code == 0 {
        print!("{}", outcome.summary);
    } else {
        eprint!("{}", outcome.summary);
    }
    ExitCode::from(outcome.exit_code as u8)
}
