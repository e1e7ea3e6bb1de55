fn main() {
    std::process::exit(hopf_heat::cli::run(std::env::args_os()));
}
