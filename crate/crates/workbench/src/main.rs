fn main() {
    std::process::exit(stroke_workbench::cli::run(std::env::args_os()));
}
