use std::process::ExitCode;

fn main() -> ExitCode {
    // A panic anywhere below is an internal failure, reported as exit 4
    // rather than an abort.
    let args: Vec<String> = std::env::args().collect();
    match std::panic::catch_unwind(|| waterladder::cli::run(args)) {
        Ok(code) => ExitCode::from(code as u8),
        Err(_) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "level": "error",
                    "kind": "internal",
                    "message": "solver panicked; please report the input file",
                })
            );
            ExitCode::from(waterladder::cli::EXIT_INTERNAL as u8)
        }
    }
}
