use std::process::exit;

fn main() {
    let matches = vague_cli::build_cli().get_matches();
    let code = vague_cli::run(&matches, &mut std::io::stdout());
    exit(code);
}
