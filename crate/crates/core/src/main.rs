fn main() {
    std::process::exit(cstr_biofilm::cli::run(std::env::args_os()));
}
