use anyhow::Result;

use crate::corpus::{build, corpus_csv, languages_csv, launches_csv};
use crate::output::write_atomic;
use crate::{Outcome, SynthArgs};

pub const CORPUS_FILE: &str = "corpus.csv";
pub const LAUNCHES_FILE: &str = "launches.csv";
pub const LANGUAGES_FILE: &str = "languages.csv";

pub fn run(args: &SynthArgs) -> Result<Outcome> {
    let series = build(args.seed);
    write_atomic(&args.out.join(CORPUS_FILE), corpus_csv(&series).as_bytes())?;
    write_atomic(&args.out.join(LAUNCHES_FILE), launches_csv().as_bytes())?;
    write_atomic(&args.out.join(LANGUAGES_FILE), languages_csv().as_bytes())?;
    println!("{} series (seed {}) -> {}", series.len(), args.seed, args.out.display());
    Ok(Outcome::Complete)
}
