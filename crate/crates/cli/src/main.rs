fn main() {
    std::process::exit(busgcl_cli::run(std::env::args_os()));
}
