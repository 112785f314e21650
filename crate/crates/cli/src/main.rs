use clap::Parser;
use minvol_cli::{run, JobConfig};

fn main() {
    let cfg = JobConfig::parse();
    std::process::exit(run(&cfg));
}
