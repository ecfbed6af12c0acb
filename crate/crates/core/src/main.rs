use clap::Parser;
use qgraph_core::cli::{main_with, RunConfig};

fn main() {
    std::process::exit(main_with(&RunConfig::parse()));
}
