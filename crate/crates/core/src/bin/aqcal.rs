fn main() {
    std::process::exit(aqcal::cli::main_with(std::env::args_os()));
}
