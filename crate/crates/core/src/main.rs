fn main() {
    std::process::exit(latent_workbench::cli::main_with_args(std::env::args_os()));
}
