fn main() {
    std::process::exit(nonlocal_sphere::cli::main());
}
