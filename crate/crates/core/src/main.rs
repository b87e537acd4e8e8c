use std::process::ExitCode;

fn main() -> ExitCode {
    if let Ok(v) = std::env::var("OPK_THREADS") {
        match v.parse::<usize>() {
            Ok(n) if n > 0 => {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                eprintln!("opk: OPK_THREADS must be a positive integer, got {v:?}");
                return ExitCode::from(opinion_kinetics::cli::EXIT_USAGE as u8);
            }
        }
    }
    let code = opinion_kinetics::cli::run_command(std::env::args_os());
    ExitCode::from(code as u8)
}
