fn main() {
    std::process::exit(wf_lab::cli::run(std::env::args_os()));
}
