fn main() {
    std::process::exit(flycap::cli::main_with(std::env::args_os()));
}
