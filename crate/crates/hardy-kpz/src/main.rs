fn main() -> std::process::ExitCode {
    hardy_kpz::cli::main_entry()
}
