fn main() {
    std::process::exit(fomdp_core::cli::run(std::env::args_os()));
}
