use clap::Parser;
use decoyqkd::cli::{main_with_args, Args};

fn main() -> std::process::ExitCode {
    std::process::ExitCode::from(main_with_args(Args::parse()))
}
