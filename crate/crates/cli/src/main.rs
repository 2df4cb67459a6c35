fn main() -> std::process::ExitCode {
    scalekit::app::main()
}
