fn main() {
    std::process::exit(rsg::cli::run(std::env::args_os()));
}
