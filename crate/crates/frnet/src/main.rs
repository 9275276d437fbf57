fn main() {
    let args: Vec<String> = std::env::args().collect();
    std::process::exit(frnet::cli::run(&args[1..]));
}
