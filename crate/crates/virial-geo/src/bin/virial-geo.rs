fn main() {
    std::process::exit(virial_geo::cli::main_entry());
}
