fn main() {
    std::process::exit(mfdl::cli::run(std::env::args_os()));
}
