fn main() {
    std::process::exit(pref::cli::main_with_args(std::env::args_os().collect()));
}
