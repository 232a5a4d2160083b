use clap::Parser;

fn main() {
    let cli = rootterm::cli::Cli::parse();
    if let Err(e) = rootterm::cli::run(cli) {
        // Most error types already embed their cause in the message; only
        // print causes that add something.
        let mut msg = e.to_string();
        for cause in e.chain().skip(1) {
            let text = cause.to_string();
            if !msg.ends_with(&text) {
                msg.push_str(": ");
                msg.push_str(&text);
            }
        }
        eprintln!("error: {msg}");
        std::process::exit(1);
    }
}
