use clap::Parser;

fn main() {
    let cli = storycut::cli::Cli::parse();
    if let Err(e) = storycut::cli::run(cli, &mut std::io::stdout().lock()) {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
