fn main() {
    std::process::exit(locc_gauss::cli::run(std::env::args_os()));
}
