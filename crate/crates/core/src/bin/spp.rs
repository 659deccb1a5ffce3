fn main() {
    std::process::exit(spp_core::cli::main_with_args(std::env::args_os()));
}
