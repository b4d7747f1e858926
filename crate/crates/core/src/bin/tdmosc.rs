fn main() {
    std::process::exit(tdmosc::cli::run(std::env::args_os()));
}
