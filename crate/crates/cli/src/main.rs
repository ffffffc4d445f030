fn main() {
    std::process::exit(anticooc::cli::main_with(std::env::args_os()));
}
