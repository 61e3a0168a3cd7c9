fn main() {
    std::process::exit(xclone::cli::run());
}
