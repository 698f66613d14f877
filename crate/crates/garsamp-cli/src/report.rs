//! CSV emission. All files carry a header row, UTF-8 text and LF line
//! endings; identical inputs and seeds produce byte-identical output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use garsamp::{Error, Result};

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| Error::Model(format!("cannot create {}: {e}", dir.display())))?;
    }
    Ok(BufWriter::new(File::create(path).map_err(|e| {
        Error::Model(format!("cannot create {}: {e}", path.display()))
    })?))
}

fn fmt(v: f64) -> String {
    if v.is_nan() {
        String::new()
    } else {
        format!("{v}")
    }
}

/// `index,x`
pub fn write_samples(path: &Path, samples: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "index,x").map_err(io_err)?;
    for (i, x) in samples.iter().enumerate() {
        writeln!(w, "{i},{}", fmt(*x)).map_err(io_err)?;
    }
    Ok(())
}

/// `index,x1,x2`
pub fn write_samples_2d(path: &Path, samples: &[[f64; 2]]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "index,x1,x2").map_err(io_err)?;
    for (i, p) in samples.iter().enumerate() {
        writeln!(w, "{i},{},{}", fmt(p[0]), fmt(p[1])).map_err(io_err)?;
    }
    Ok(())
}

/// `sample_index,proposals,cumulative_acceptance_rate`
pub fn write_trace(path: &Path, proposals_per_sample: &[u64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "sample_index,proposals,cumulative_acceptance_rate").map_err(io_err)?;
    let mut total = 0u64;
    for (i, &p) in proposals_per_sample.iter().enumerate() {
        total += p;
        let rate = (i + 1) as f64 / total as f64;
        writeln!(w, "{i},{p},{}", fmt(rate)).map_err(io_err)?;
    }
    Ok(())
}

/// One row of the bound table.
pub struct BoundRow {
    pub method: String,
    pub gamma: f64,
    pub region: Option<usize>,
    pub minimizer: f64,
}

/// `method,gamma,L,region,minimizer`
pub fn write_bound_table(path: &Path, rows: &[BoundRow]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "method,gamma,L,region,minimizer").map_err(io_err)?;
    for r in rows {
        let region = r.region.map_or(String::new(), |j| j.to_string());
        writeln!(
            w,
            "{},{},{},{},{}",
            r.method,
            fmt(r.gamma),
            fmt((-r.gamma).exp()),
            region,
            fmt(r.minimizer)
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// Bound-table rows rendered to stdout-friendly CSV text.
pub fn bound_table_text(rows: &[BoundRow]) -> String {
    let mut out = String::from("method,gamma,L,region,minimizer\n");
    for r in rows {
        let region = r.region.map_or(String::new(), |j| j.to_string());
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.method,
            fmt(r.gamma),
            fmt((-r.gamma).exp()),
            region,
            fmt(r.minimizer)
        ));
    }
    out
}

/// `gamma,L,acceptance_rate`
pub fn write_acceptance_vs_gamma(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "gamma,L,acceptance_rate").map_err(io_err)?;
    for &(gamma, rate) in rows {
        writeln!(w, "{},{},{}", fmt(gamma), fmt((-gamma).exp()), fmt(rate)).map_err(io_err)?;
    }
    Ok(())
}

/// `sample_index,acceptance_rate`
pub fn write_acceptance_vs_index(path: &Path, rates: &[f64]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "sample_index,acceptance_rate").map_err(io_err)?;
    for (i, r) in rates.iter().enumerate() {
        writeln!(w, "{},{}", i + 1, fmt(*r)).map_err(io_err)?;
    }
    Ok(())
}

/// `alpha,sample_mean`
pub fn write_alpha_means(path: &Path, rows: &[(f64, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "alpha,sample_mean").map_err(io_err)?;
    for &(alpha, mean) in rows {
        writeln!(w, "{},{}", fmt(alpha), fmt(mean)).map_err(io_err)?;
    }
    Ok(())
}

/// `bin_center,density,target_density`
pub fn write_histogram(
    path: &Path,
    samples: &[f64],
    lo: f64,
    hi: f64,
    bins: usize,
    target: impl Fn(f64) -> f64,
) -> Result<()> {
    let mut counts = vec![0u64; bins];
    let width = (hi - lo) / bins as f64;
    let mut inside = 0u64;
    for &x in samples {
        if x >= lo && x < hi {
            counts[((x - lo) / width) as usize] += 1;
            inside += 1;
        }
    }
    let mut w = create(path)?;
    writeln!(w, "bin_center,density,target_density").map_err(io_err)?;
    for (i, &c) in counts.iter().enumerate() {
        let center = lo + width * (i as f64 + 0.5);
        let density = c as f64 / (inside.max(1) as f64 * width);
        writeln!(
            w,
            "{},{},{}",
            fmt(center),
            fmt(density),
            fmt(target(center))
        )
        .map_err(io_err)?;
    }
    Ok(())
}

/// `x1,x2,density` over a regular grid of bins.
pub fn write_histogram_2d(
    path: &Path,
    samples: &[[f64; 2]],
    lo: f64,
    hi: f64,
    bins: usize,
) -> Result<()> {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0u64; bins * bins];
    let mut inside = 0u64;
    for p in samples {
        if p[0] >= lo && p[0] < hi && p[1] >= lo && p[1] < hi {
            let i = ((p[0] - lo) / width) as usize;
            let j = ((p[1] - lo) / width) as usize;
            counts[i * bins + j] += 1;
            inside += 1;
        }
    }
    let mut w = create(path)?;
    writeln!(w, "x1,x2,density").map_err(io_err)?;
    for i in 0..bins {
        for j in 0..bins {
            let x1 = lo + width * (i as f64 + 0.5);
            let x2 = lo + width * (j as f64 + 0.5);
            let density = counts[i * bins + j] as f64 / (inside.max(1) as f64 * width * width);
            writeln!(w, "{},{},{}", fmt(x1), fmt(x2), fmt(density)).map_err(io_err)?;
        }
    }
    Ok(())
}

/// `method,acceptance_rate`
pub fn write_rate_summary(path: &Path, rows: &[(String, f64)]) -> Result<()> {
    let mut w = create(path)?;
    writeln!(w, "method,acceptance_rate").map_err(io_err)?;
    for (method, rate) in rows {
        writeln!(w, "{method},{}", fmt(*rate)).map_err(io_err)?;
    }
    Ok(())
}

fn io_err(e: std::io::Error) -> Error {
    Error::Model(format!("write error: {e}"))
}
