fn main() {
    std::process::exit(respira_core::cli::main());
}
