fn main() {
    // panics are reported by `run` as a one-line internal error
    std::panic::set_hook(Box::new(|_| {}));
    std::process::exit(redrep_cli::run(std::env::args_os()));
}
