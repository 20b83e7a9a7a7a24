fn main() {
    std::process::exit(planelike::cli::main());
}
