//! Report generation: RFC-4180 CSV tables and a Markdown summary from a
//! persisted record.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::Result;

use super::record::ResultRecord;

fn csv_field(s: &str) -> String {
    if s.contains(',') || s.contains('"') || s.contains('\n') {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// One row per ladder cell: t, R, N, mean, sd, SE, verdict.
pub fn render_csv(record: &ResultRecord) -> String {
    let mut out = String::from("t,R,N,mean,sd,SE,verdict\r\n");
    for cell in &record.cells {
        let (n, mean, sd, se) = match &cell.batch {
            Some(b) => (b.n.to_string(), format!("{:.8e}", b.mean), format!("{:.8e}", b.sd), format!("{:.8e}", b.stderr)),
            None => ("0".into(), String::new(), String::new(), String::new()),
        };
        let verdict = if !cell.complete {
            "INCOMPLETE"
        } else if cell.verdicts.iter().all(|v| v.pass) {
            "PASS"
        } else {
            "FAIL"
        };
        let radius = cell.radius.map_or(String::new(), |r| format!("{r}"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\r\n",
            csv_field(&format!("{}", cell.t)),
            csv_field(&radius),
            n,
            mean,
            sd,
            se,
            verdict
        ));
    }
    out
}

pub fn write_csv(record: &ResultRecord, path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)?;
    }
    std::fs::write(path, render_csv(record))?;
    Ok(())
}

/// Markdown summary mapping every verdict to the claim it verifies.
pub fn render_markdown(record: &ResultRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Experiment `{}`", record.experiment);
    let _ = writeln!(out);
    let _ = writeln!(out, "Verifies: {}.", record.claim);
    let _ = writeln!(
        out,
        "Seed {}, config digest `{}`, version {}, wall clock {:.1}s.",
        record.master_seed, record.config_digest, record.version, record.wall_clock_s
    );
    let _ = writeln!(out);
    let status = if record.incomplete {
        "INCOMPLETE"
    } else if record.all_pass() {
        "PASS"
    } else {
        "FAIL"
    };
    let _ = writeln!(out, "Overall: **{status}**");
    let _ = writeln!(out);
    let _ = writeln!(out, "| scope | verdict | observed | target | tolerance | oracle | status |");
    let _ = writeln!(out, "|---|---|---|---|---|---|---|");
    for v in &record.verdicts {
        let status = if v.informational {
            "info"
        } else if v.pass {
            "PASS"
        } else {
            "**FAIL**"
        };
        let _ = writeln!(
            out,
            "| run | {} | {:.6e} | {:.6e} | {:.2e} | {} | {} |",
            v.name, v.observed, v.target, v.tolerance, v.oracle, status
        );
    }
    for cell in &record.cells {
        for v in &cell.verdicts {
            let status = if v.informational {
                "info"
            } else if v.pass {
                "PASS"
            } else {
                "**FAIL**"
            };
            let _ = writeln!(
                out,
                "| t={} | {} | {:.6e} | {:.6e} | {:.2e} | {} | {} |",
                cell.t, v.name, v.observed, v.target, v.tolerance, v.oracle, status
            );
        }
    }
    for fit in &record.rate_fits {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "Rate fit: exponent {:.4}, intercept {:.4}, r² {:.5} over {} points.",
            fit.exponent,
            fit.intercept,
            fit.r_squared,
            fit.points.len()
        );
    }
    out
}

/// Load a record, emit `<stem>.csv` and `<stem>.md` next to it, print the
/// summary, and return whether every verdict passed.
pub fn report(record_path: &Path) -> Result<bool> {
    let record = ResultRecord::load(record_path)?;
    let stem = record_path.with_extension("");
    let csv_path = stem.with_extension("csv");
    let md_path = stem.with_extension("md");
    write_csv(&record, &csv_path)?;
    let md = render_markdown(&record);
    std::fs::write(&md_path, &md)?;
    println!("{md}");
    Ok(record.all_pass())
}
