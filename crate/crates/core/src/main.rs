fn main() {
    std::process::exit(robin_ucp::cli::main_entry());
}
