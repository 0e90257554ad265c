fn main() {
    std::process::exit(soundscape_core::cli::main_with_args(std::env::args_os()));
}
