fn main() -> std::process::ExitCode {
    autosteer::cli::main()
}
