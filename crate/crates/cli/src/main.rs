fn main() {
    std::process::exit(depcar::run(std::env::args_os()));
}
