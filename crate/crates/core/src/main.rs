fn main() {
    std::process::exit(defbench::cli::run(std::env::args_os()));
}
