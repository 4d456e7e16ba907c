//! Cost of full self-attention as a function of sequence length.
//!
//! Each row records the exact number of query-key inner products (always
//! `T²`) and the median wall time over the repeats. The exponent is the
//! least-squares slope of `ln(time)` against `ln(T)`.

use std::fmt::Write as _;
use std::time::Instant;

use crate::attention::self_attention;
use crate::error::{Error, Result};
use crate::instance::generate;

/// Key/value dimension used for every benchmark instance.
pub const BENCH_DIM: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScalingRow {
    pub t: usize,
    pub inner_products: u64,
    pub wall_time_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScalingReport {
    pub rows: Vec<ScalingRow>,
    /// `None` with fewer than two distinct sequence lengths.
    pub fit_exponent: Option<f64>,
}

impl ScalingReport {
    /// `t,inner_products,wall_time_ns`, one row per sequence length.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,inner_products,wall_time_ns\n");
        for r in &self.rows {
            writeln!(out, "{},{},{}", r.t, r.inner_products, r.wall_time_ns).unwrap();
        }
        out
    }

    pub fn summary(&self) -> String {
        let mut out = format!("{:>8} {:>14} {:>16}\n", "T", "inner products", "median ns");
        for r in &self.rows {
            writeln!(out, "{:>8} {:>14} {:>16}", r.t, r.inner_products, r.wall_time_ns).unwrap();
        }
        match self.fit_exponent {
            Some(e) => writeln!(out, "fitted exponent: {e:.3}").unwrap(),
            None => writeln!(out, "fitted exponent: NA (fewer than two distinct T)").unwrap(),
        }
        out
    }
}

pub fn run(t_values: &[usize], repeats: usize, seed: u64) -> Result<ScalingReport> {
    if t_values.is_empty() {
        return Err(Error::EmptySequence);
    }
    if let Some(&bad) = t_values.iter().find(|&&t| t == 0) {
        return Err(Error::InvalidParameter {
            name: "t",
            reason: format!("sequence lengths must be at least 1, got {bad}"),
        });
    }
    if repeats == 0 {
        return Err(Error::InvalidParameter {
            name: "repeats",
            reason: "must be at least 1".into(),
        });
    }
    let mut rows = Vec::with_capacity(t_values.len());
    for &t in t_values {
        let inst = generate(seed, t, BENCH_DIM)
            .validate()
            .expect("generated instances are valid");
        let mut times = Vec::with_capacity(repeats);
        let mut inner_products = 0;
        for _ in 0..repeats {
            let start = Instant::now();
            let out = self_attention(&inst.queries, &inst.seq, &inst.config)?;
            times.push(start.elapsed().as_nanos() as u64);
            std::hint::black_box(&out.rows);
            inner_products = out.inner_products;
        }
        rows.push(ScalingRow {
            t,
            inner_products,
            wall_time_ns: median(&mut times),
        });
    }
    let points: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| ((r.t as f64).ln(), (r.wall_time_ns.max(1) as f64).ln()))
        .collect();
    Ok(ScalingReport {
        fit_exponent: log_log_slope(&points),
        rows,
    })
}

fn median(xs: &mut [u64]) -> u64 {
    xs.sort_unstable();
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        (xs[n / 2 - 1] + xs[n / 2]) / 2
    }
}

/// Ordinary least-squares slope; `None` when all `x` coincide.
pub fn log_log_slope(points: &[(f64, f64)]) -> Option<f64> {
    let n = points.len() as f64;
    if points.len() < 2 {
        return None;
    }
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}
