fn main() {
    std::process::exit(merwlab::run(std::env::args_os()));
}
