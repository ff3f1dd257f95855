fn main() {
    std::process::exit(emoinf::run(std::env::args_os()));
}
