fn main() {
    std::process::exit(magws_core::cli_workbench::run(std::env::args_os()));
}
