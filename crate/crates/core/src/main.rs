fn main() -> std::process::ExitCode {
    lexmatcher::cli::main()
}
