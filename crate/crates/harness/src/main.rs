fn main() {
    std::process::exit(sparsepat_harness::cli_main(std::env::args()));
}
