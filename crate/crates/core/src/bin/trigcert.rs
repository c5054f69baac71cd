// SPDX-License-Identifier: MIT
//! Command-line entry point.

fn main() {
    std::process::exit(trigcert::cli::run(std::env::args_os()));
}
