//! CSV readers and writers. Floats are written as `{:.11e}`.

use std::io::{Read, Write};

use crate::ancilla::SmearedOutcome;
use crate::chip::{CloudImage, RunResult, SweepTable};
use crate::error::{QwmError, Result};
use crate::work::{jarzynski_average, WorkDistribution};

fn f(x: f64) -> String {
    format!("{x:.11e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(f).unwrap_or_default()
}

/// Columns `driving,n,m,w,probability,G,beta_delta_f`; `G` and
/// `beta_delta_f` are filled when a `β` is known.
pub fn write_work_distribution<W: Write>(
    out: W,
    driving: &str,
    dist: &WorkDistribution,
    beta_delta_f: Option<f64>,
) -> Result<()> {
    let g = match dist.beta_context() {
        Some(beta) => Some(jarzynski_average(dist, beta)?.g),
        None => None,
    };
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["driving", "n", "m", "w", "probability", "G", "beta_delta_f"])?;
    for e in dist.entries() {
        w.write_record([
            driving.to_string(),
            e.n.to_string(),
            e.m.to_string(),
            f(e.work),
            f(e.probability),
            opt(g),
            opt(beta_delta_f),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `coordinate,density,diagonal_density`.
pub fn write_density<W: Write>(out: W, outcome: &SmearedOutcome) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["coordinate", "density", "diagonal_density"])?;
    for ((x, d), g) in outcome
        .grid
        .iter()
        .zip(&outcome.density)
        .zip(&outcome.diagonal)
    {
        w.write_record([f(*x), f(*d), f(*g)])?;
    }
    w.flush()?;
    Ok(())
}

/// Columns `z,optical_density` with `z` the bin centre in metres.
pub fn write_image<W: Write>(out: W, image: &CloudImage) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["z", "optical_density"])?;
    for (z, c) in image.bin_centers().iter().zip(&image.counts) {
        w.write_record([f(*z), f(*c)])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_image<R: Read>(input: R) -> Result<CloudImage> {
    let mut r = csv::Reader::from_reader(input);
    let headers = r.headers()?.clone();
    if headers.len() != 2 {
        return Err(QwmError::Parse(format!(
            "image needs two columns (z, optical_density), found {}",
            headers.len()
        )));
    }
    let mut z = Vec::new();
    let mut od = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let parse = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|e| QwmError::Parse(format!("row {}: column {}: {e}", line + 2, i + 1)))
        };
        z.push(parse(0)?);
        od.push(parse(1)?);
    }
    CloudImage::from_profile(&z, od)
}

/// One row per cloud followed by the summary in `# key,value` comment lines.
pub fn write_run_result<W: Write>(mut out: W, result: &RunResult) -> Result<()> {
    {
        let mut w = csv::Writer::from_writer(&mut out);
        w.write_record([
            "n",
            "m",
            "center",
            "width",
            "amplitude",
            "fraction",
            "momentum_shift",
            "w",
            "converged",
        ])?;
        for c in &result.clouds {
            w.write_record([
                c.n.to_string(),
                c.m.to_string(),
                f(c.center),
                f(c.width),
                f(c.amplitude),
                f(c.fraction),
                f(c.momentum_shift),
                f(c.work),
                c.converged.to_string(),
            ])?;
        }
        w.flush()?;
    }
    writeln!(out, "# calibrated_ratio,{}", f(result.calibrated_ratio))?;
    writeln!(out, "# delta_p,{}", f(result.delta_p))?;
    writeln!(out, "# delta_p_tilde,{}", f(result.delta_p_tilde))?;
    writeln!(out, "# base,{}", f(result.base))?;
    writeln!(out, "# self_calibrated,{}", result.self_calibrated)?;
    if let Some(beta) = result.distribution.beta_context() {
        writeln!(
            out,
            "# G,{}",
            f(jarzynski_average(&result.distribution, beta)?.g)
        )?;
    }
    for (n, m) in &result.missing {
        writeln!(out, "# missing,{n} {m}")?;
    }
    for d in &result.diagnostics {
        writeln!(out, "# diagnostic,{}", d.replace('\n', " "))?;
    }
    Ok(())
}

/// Columns `beta_E,rf_area,rep,G,sem,P_n_m...` with the probability
/// vector of each run; `sem` is that of its `(β, area)` group.
pub fn write_sweep<W: Write>(out: W, table: &SweepTable, levels: (usize, usize)) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let count = levels.0 * levels.1 - 1;
    let mut header: Vec<String> = ["beta_E", "rf_area", "rep", "G", "sem"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    header.extend((0..count).map(|k| format!("P_{}_{}", k / levels.1, k % levels.1)));
    header.push("error".into());
    w.write_record(&header)?;
    for r in &table.rows {
        let sem = table.summary(r.beta_e, r.rf_area).map(|s| s.sem);
        let mut rec = vec![
            f(r.beta_e),
            f(r.rf_area),
            r.rep.to_string(),
            opt(r.g),
            opt(sem),
        ];
        if r.probability_vector.len() == count {
            rec.extend(r.probability_vector.iter().map(|p| f(*p)));
        } else {
            rec.extend(std::iter::repeat_n(String::new(), count));
        }
        rec.push(r.error.clone().unwrap_or_default());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}
