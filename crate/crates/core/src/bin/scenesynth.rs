fn main() {
    std::process::exit(scenesynth::cli::main(std::env::args_os()));
}
