fn main() {
    std::process::exit(seqmarkov::cli::main_from_args(std::env::args_os()));
}
