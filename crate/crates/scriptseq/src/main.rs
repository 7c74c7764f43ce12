fn main() {
    std::process::exit(scriptseq::cli::main_entry());
}
