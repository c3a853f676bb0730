//! Human-readable summary of a run directory: one markdown section per
//! study, rebuilt from the CSV artifacts so a corrupted artifact is caught
//! and flagged rather than silently skipped.

use std::path::Path;

use crate::manifest::RunManifest;
use crate::RunError;

struct Csv {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

fn parse_csv(path: &Path) -> Result<Csv, String> {
    let text =
        std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<String> = lines
        .next()
        .ok_or("empty file")?
        .split(',')
        .map(str::to_string)
        .collect();
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<String> = line.split(',').map(str::to_string).collect();
        if fields.len() != header.len() {
            return Err(format!(
                "line {}: expected {} fields, found {}",
                i + 2,
                header.len(),
                fields.len()
            ));
        }
        rows.push(fields);
    }
    Ok(Csv { header, rows })
}

fn col(csv: &Csv, name: &str) -> Result<usize, String> {
    csv.header
        .iter()
        .position(|h| h == name)
        .ok_or_else(|| format!("missing column '{name}'"))
}

fn num(field: &str) -> Result<f64, String> {
    field
        .parse::<f64>()
        .map_err(|e| format!("bad number '{field}': {e}"))
}

/// Group rows by the n column and average the selected column.
fn mean_by_n(csv: &Csv, value_col: &str) -> Result<Vec<(u64, f64)>, String> {
    let ci = col(csv, "n")?;
    let vi = col(csv, value_col)?;
    let mut acc: Vec<(u64, f64, usize)> = Vec::new();
    for row in &csv.rows {
        let n: u64 = row[ci].parse().map_err(|e| format!("bad n: {e}"))?;
        let v = num(&row[vi])?;
        match acc.iter_mut().find(|(m, _, _)| *m == n) {
            Some((_, s, k)) => {
                *s += v;
                *k += 1;
            }
            None => acc.push((n, v, 1)),
        }
    }
    Ok(acc
        .into_iter()
        .map(|(n, s, k)| (n, s / k as f64))
        .collect())
}

fn median_abs_by_n(csv: &Csv, value_col: &str) -> Result<Vec<(u64, f64)>, String> {
    let ci = col(csv, "n")?;
    let vi = col(csv, value_col)?;
    let mut acc: Vec<(u64, Vec<f64>)> = Vec::new();
    for row in &csv.rows {
        let n: u64 = row[ci].parse().map_err(|e| format!("bad n: {e}"))?;
        let v = num(&row[vi])?.abs();
        match acc.iter_mut().find(|(m, _)| *m == n) {
            Some((_, vs)) => vs.push(v),
            None => acc.push((n, vec![v])),
        }
    }
    Ok(acc
        .into_iter()
        .map(|(n, vs)| (n, gplab_core::stats::median(&vs)))
        .collect())
}

fn section(
    out: &mut String,
    manifest: &RunManifest,
    dir: &Path,
    study: &str,
    title: &str,
    render: impl FnOnce(&mut String, &Path) -> Result<(), String>,
) {
    out.push_str(&format!("## {title}\n\n"));
    if !manifest.studies.contains_key(study) {
        out.push_str("_not run_\n\n");
        return;
    }
    let mut body = String::new();
    match render(&mut body, dir) {
        Ok(()) => out.push_str(&body),
        Err(e) => out.push_str(&format!("_artifact problem: {e}_\n\n")),
    }
}

pub fn emit_report(dir: &Path) -> Result<(), RunError> {
    let manifest = RunManifest::load(dir)?;
    let mut md = String::from("# Run report\n\n");

    section(
        &mut md,
        &manifest,
        dir,
        "kl-rate",
        "KL divergence rates",
        |out, dir| {
            let csv = parse_csv(&dir.join("kl_rate.csv"))?;
            let (ti, hi, ei) = (col(&csv, "theta_id")?, col(&csv, "h")?, col(&csv, "err")?);
            out.push_str("| theta | h | err |\n|---|---|---|\n");
            for row in &csv.rows {
                out.push_str(&format!(
                    "| {} | {:.6} | {:.1e} |\n",
                    row[ti],
                    num(&row[hi])?,
                    num(&row[ei])?
                ));
            }
            out.push('\n');
            Ok(())
        },
    );

    section(
        &mut md,
        &manifest,
        dir,
        "equipartition",
        "Equipartition deviations vs n",
        |out, dir| {
            let csv = parse_csv(&dir.join("equipartition_trace.csv"))?;
            out.push_str("| n | median abs deviation |\n|---|---|\n");
            for (n, v) in median_abs_by_n(&csv, "deviation")? {
                out.push_str(&format!("| {n} | {v:.5} |\n"));
            }
            out.push('\n');
            Ok(())
        },
    );

    section(
        &mut md,
        &manifest,
        dir,
        "posterior",
        "Posterior concentration on N_epsilon and decay on A",
        |out, dir| {
            let csv = parse_csv(&dir.join("posterior.csv"))?;
            let eps = mean_by_n(&csv, "prob_n_eps")?;
            let pa = mean_by_n(&csv, "prob_a")?;
            let j = std::fs::read_to_string(dir.join("posterior_summary.json"))
                .ok()
                .and_then(|t| serde_json::from_str::<serde_json::Value>(&t).ok())
                .and_then(|v| v["j_value"].as_f64());
            out.push_str("| n | mean π(N_εn) | mean π(A) | n⁻¹ log π(A) |\n|---|---|---|---|\n");
            for ((n, pe), (_, p)) in eps.iter().zip(&pa) {
                let rate = if *p > 0.0 {
                    format!("{:.5}", p.ln() / *n as f64)
                } else {
                    "underflow".to_string()
                };
                out.push_str(&format!("| {n} | {pe:.4} | {p:.4} | {rate} |\n"));
            }
            if let Some(j) = j {
                out.push_str(&format!("\ntarget decay −J(A) = −{j:.4}\n"));
            }
            out.push('\n');
            Ok(())
        },
    );

    section(
        &mut md,
        &manifest,
        dir,
        "predictive",
        "Predictive Hellinger / total-variation distances vs n",
        |out, dir| {
            let csv = parse_csv(&dir.join("predictive.csv"))?;
            let h2 = mean_by_n(&csv, "rho_h2")?;
            let tv = mean_by_n(&csv, "rho_tv")?;
            out.push_str("| n | mean ρ_H² | mean ρ_TV |\n|---|---|---|\n");
            for ((n, a), (_, b)) in h2.iter().zip(&tv) {
                out.push_str(&format!("| {n} | {a:.5} | {b:.5} |\n"));
            }
            out.push('\n');
            Ok(())
        },
    );

    section(
        &mut md,
        &manifest,
        dir,
        "sieve-mass",
        "Sieve complement mass vs the exponential bound shape",
        |out, dir| {
            let beta = manifest
                .studies
                .get("sieve-mass")
                .map(|s| s.config.sieve.beta)
                .unwrap_or(1.0);
            let csv = parse_csv(&dir.join("sieve_mass.csv"))?;
            let (ni, pi, hi) = (col(&csv, "n")?, col(&csv, "prob")?, col(&csv, "ci_hi")?);
            out.push_str("| n | π(G_n^c) | upper CI | exp(−βn) |\n|---|---|---|---|\n");
            for row in &csv.rows {
                let n: f64 = num(&row[ni])?;
                out.push_str(&format!(
                    "| {} | {:.5} | {:.5} | {:.3e} |\n",
                    row[ni],
                    num(&row[pi])?,
                    num(&row[hi])?,
                    (-beta * n).exp()
                ));
            }
            out.push('\n');
            Ok(())
        },
    );

    section(
        &mut md,
        &manifest,
        dir,
        "bounds",
        "Concentration-inequality checks",
        |out, dir| {
            let csv = parse_csv(&dir.join("bounds.csv"))?;
            let (ki, ti, ei, bi, vi) = (
                col(&csv, "kind")?,
                col(&csv, "t")?,
                col(&csv, "empirical")?,
                col(&csv, "bound")?,
                col(&csv, "verdict")?,
            );
            out.push_str("| kind | t | empirical | bound | verdict |\n|---|---|---|---|---|\n");
            for row in &csv.rows {
                out.push_str(&format!(
                    "| {} | {:.4} | {:.3e} | {:.3e} | {} |\n",
                    row[ki],
                    num(&row[ti])?,
                    num(&row[ei])?,
                    num(&row[bi])?,
                    row[vi]
                ));
            }
            out.push('\n');
            Ok(())
        },
    );

    crate::manifest::write_atomic(dir, "report.md", &md)?;
    println!("report: wrote {}", dir.join("report.md").display());
    Ok(())
}
