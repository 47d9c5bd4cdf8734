fn main() {
    std::process::exit(colfc::cli::main_entry(std::env::args()));
}
