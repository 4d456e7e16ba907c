//! `attnmle` command-line front end.
//!
//! Exit codes: 0 success, 1 numerical or check failure, 2 usage, parse or
//! I/O failure.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::attention::attention_weights;
use crate::bench;
use crate::instance::{self, Instance, InstanceFile};
use crate::verify;

pub const EXIT_OK: u8 = 0;
pub const EXIT_FAILURE: u8 = 1;
pub const EXIT_USAGE: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "attnmle", version, about = "Scaled-dot-product attention as a maximum-likelihood estimate")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Attention weights and context vector for every query of an instance.
    Attend {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        output: PathBuf,
    },
    /// Run the derivation checks on seeded random instances.
    Verify {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 100)]
        instances: usize,
    },
    /// Time self-attention over several sequence lengths.
    Bench {
        /// Comma-separated sequence lengths, e.g. 256,512,1024.
        #[arg(long = "t", value_delimiter = ',', required = true)]
        t_values: Vec<usize>,
        #[arg(long, default_value_t = 5)]
        repeats: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        output: PathBuf,
    },
    /// Write a random instance file.
    Generate {
        #[arg(long)]
        seed: u64,
        #[arg(long = "t")]
        t: usize,
        #[arg(long = "d")]
        d: usize,
        #[arg(long)]
        output: PathBuf,
    },
}

/// Parses `args` (program name first) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{}", e.render());
                return EXIT_USAGE;
            }
            let _ = write!(out, "{}", e.render());
            return EXIT_OK;
        }
    };
    match cli.command {
        Command::Attend { input, output } => attend(&input, &output, err),
        Command::Verify { seed, instances } => run_verify(seed, instances, out, err),
        Command::Bench {
            t_values,
            repeats,
            seed,
            output,
        } => run_bench(&t_values, repeats, seed, &output, out, err),
        Command::Generate { seed, t, d, output } => generate(seed, t, d, &output, err),
    }
}

/// 17 significant digits.
fn num(x: f64) -> String {
    format!("{x:.16e}")
}

/// CSV with header `query,w_1..w_T,c_1..c_d` and, when the instance has
/// `lambdas`, trailing `p_1..p_T` maximum-entropy columns.
pub fn attend_csv(inst: &Instance) -> crate::Result<String> {
    let t = inst.seq.len();
    let d = inst.seq.dim();
    let mut header = vec!["query".to_string()];
    header.extend((1..=t).map(|i| format!("w_{i}")));
    header.extend((1..=d).map(|j| format!("c_{j}")));
    if inst.lambdas.is_some() {
        header.extend((1..=t).map(|i| format!("p_{i}")));
    }
    let mut csv = header.join(",");
    csv.push('\n');
    for (j, q) in inst.queries.iter().enumerate() {
        let weights = attention_weights(q, inst.seq.keys(), &inst.config)?;
        let context = crate::attention::weighted_sum(weights.as_slice(), inst.seq.values());
        let mut row = vec![(j + 1).to_string()];
        row.extend(weights.iter().map(|&w| num(w)));
        row.extend(context.iter().map(|&c| num(c)));
        if inst.lambdas.is_some() {
            let p = inst.maxent_model(j)?.conditional_probability()?;
            row.extend(p.iter().map(|&x| num(x)));
        }
        writeln!(csv, "{}", row.join(",")).unwrap();
    }
    Ok(csv)
}

fn attend(input: &Path, output: &Path, err: &mut dyn Write) -> u8 {
    let inst = match InstanceFile::read(input).and_then(|f| f.validate()) {
        Ok(inst) => inst,
        Err(e) => {
            let _ = writeln!(err, "error: {}: {e}", input.display());
            return EXIT_USAGE;
        }
    };
    let csv = match attend_csv(&inst) {
        Ok(csv) => csv,
        Err(e) => {
            let _ = writeln!(err, "error: numerical failure: {e}");
            return EXIT_FAILURE;
        }
    };
    if let Err(e) = std::fs::write(output, csv) {
        let _ = writeln!(err, "error: cannot write {}: {e}", output.display());
        return EXIT_USAGE;
    }
    EXIT_OK
}

fn run_verify(seed: u64, instances: usize, out: &mut dyn Write, err: &mut dyn Write) -> u8 {
    if instances == 0 {
        let _ = writeln!(err, "error: --instances must be at least 1");
        return EXIT_USAGE;
    }
    let report = verify::run(seed, instances);
    let _ = write!(out, "{}", report.table());
    if report.passed() {
        return EXIT_OK;
    }
    for r in report.failures() {
        match &r.failure {
            Some((case, note)) => {
                let _ = writeln!(err, "FAILED {}: {case}: {note}", r.check);
            }
            None => {
                let _ = writeln!(err, "FAILED {}: no measurements", r.check);
            }
        }
    }
    EXIT_FAILURE
}

fn run_bench(
    t_values: &[usize],
    repeats: usize,
    seed: u64,
    output: &Path,
    out: &mut dyn Write,
    err: &mut dyn Write,
) -> u8 {
    let report = match bench::run(t_values, repeats, seed) {
        Ok(r) => r,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return EXIT_USAGE;
        }
    };
    if let Err(e) = std::fs::write(output, report.to_csv()) {
        let _ = writeln!(err, "error: cannot write {}: {e}", output.display());
        return EXIT_USAGE;
    }
    let _ = write!(out, "{}", report.summary());
    EXIT_OK
}

fn generate(seed: u64, t: usize, d: usize, output: &Path, err: &mut dyn Write) -> u8 {
    if t == 0 || d == 0 {
        let _ = writeln!(err, "error: --t and --d must be at least 1");
        return EXIT_USAGE;
    }
    if let Err(e) = instance::generate(seed, t, d).write(output) {
        let _ = writeln!(err, "error: {}: {e}", output.display());
        return EXIT_USAGE;
    }
    EXIT_OK
}
