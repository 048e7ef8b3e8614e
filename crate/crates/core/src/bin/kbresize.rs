fn main() -> std::process::ExitCode {
    kb_resize::cli::main()
}
