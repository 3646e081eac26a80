fn main() -> std::process::ExitCode {
    ifrepair::cli::main()
}
