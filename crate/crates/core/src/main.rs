fn main() {
    std::process::exit(xfpe::cli::main());
}
