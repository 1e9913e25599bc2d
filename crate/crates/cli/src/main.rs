use clap::Parser;
use kitwpa_cli::{run, Cli, Outcome};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            // bad arguments are invalid input; help and version are not errors
            std::process::exit(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(Outcome::Validated) => println!("configuration is valid"),
        Ok(Outcome::Ran(report)) => {
            println!("{}", report.summary);
            for f in &report.files {
                println!("wrote {}", f.display());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
