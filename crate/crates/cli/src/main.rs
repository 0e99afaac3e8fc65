fn main() {
    std::process::exit(vlc_secrecy_cli::main_with_args(std::env::args_os()));
}
