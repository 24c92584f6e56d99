//! `recap` — command-line front end for the detection toolkit.
//!
//! Exit codes follow one contract everywhere: 0 on success, 1 when the
//! inputs were invalid (bad flags, bad config, bad manifest — anything
//! the user can fix by editing something), 2 when a run failed at
//! runtime. `RECAP_THREADS` caps the worker pool; results never depend
//! on it.

mod commands;

use clap::Parser;

fn main() {
    recap_core::init_thread_pool(None);
    let cli = match commands::Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version land here too; they are not failures.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            std::process::exit(code);
        }
    };
    if let Err(e) = commands::run(cli) {
        eprintln!("error: {e}");
        std::process::exit(if e.is_validation() { 1 } else { 2 });
    }
}
