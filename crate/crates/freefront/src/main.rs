use clap::Parser;

fn main() {
    let cli = freefront::cli::Cli::parse();
    match freefront::cli::run(&cli) {
        Ok(message) => {
            if !message.is_empty() {
                println!("{}", message.trim_end());
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            std::process::exit(e.exit_code());
        }
    }
}
