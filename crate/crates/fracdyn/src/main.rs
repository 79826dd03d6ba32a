fn main() {
    std::process::exit(fracdyn::cli::main_with(std::env::args_os()));
}
