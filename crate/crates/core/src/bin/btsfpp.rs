use std::process::ExitCode;

fn main() -> ExitCode {
    let mut stdout = std::io::stdout().lock();
    match btsfpp::cli::run(std::env::args_os().collect(), &mut stdout) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", btsfpp::cli::error_line(&e));
            ExitCode::from(btsfpp::cli::exit_code(&e) as u8)
        }
    }
}
