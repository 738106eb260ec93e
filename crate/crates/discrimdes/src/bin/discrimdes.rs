use std::process::exit;

fn main() {
    exit(discrimdes::cli::run(std::env::args_os()));
}
