fn main() {
    std::process::exit(janus::cli::main_with(std::env::args_os()));
}
