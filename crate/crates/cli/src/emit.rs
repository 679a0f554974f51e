//! Rendering of run records as tables, CSV or JSON.
//!
//! Floats are written in Rust's shortest round-trip form, so identical
//! records render to identical bytes.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::ValueEnum;
use thiserror::Error;

use crate::tasks::{RunRecord, TaskOutput, TaskRecord};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, ValueEnum)]
pub enum Format {
    #[default]
    Table,
    Csv,
    Json,
}

#[derive(Debug, Error)]
pub enum EmitError {
    #[error("cannot write {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub const TONE_HEADER: &str = "a,b,mode_k,mode_j,lambda,err";
pub const ESS_HEADER: &str = "R,R_cut,lambda,err";
pub const CERTIFY_HEADER: &str = "R_star,inf_driving,bound,verdict";
pub const VERIFY_HEADER: &str = "check,max_residual,argmax_t,pass";
pub const COMPARE_HEADER: &str = "horizon,max_violation,argmax_t,hypothesis_met,pass";
pub const BROOKS_HEADER: &str = "r,log_volume,mu_hat";
pub const ERROR_HEADER: &str = "task,error";

pub fn render(record: &RunRecord, format: Format) -> Result<String, EmitError> {
    Ok(match format {
        Format::Table => table(record),
        Format::Csv => csv(record),
        Format::Json => {
            let mut s = serde_json::to_string_pretty(record)?;
            s.push('\n');
            s
        }
    })
}

pub fn parse_json(src: &str) -> Result<RunRecord, serde_json::Error> {
    serde_json::from_str(src)
}

/// Writes to `path`, or to standard output when there is none.
pub fn emit(record: &RunRecord, format: Format, path: Option<&Path>) -> Result<(), EmitError> {
    let text = render(record, format)?;
    match path {
        Some(p) => std::fs::write(p, text).map_err(|source| EmitError::Io {
            path: p.to_path_buf(),
            source,
        }),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn quote(field: &str) -> String {
    if field.contains([',', '"', '\n']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_string()
    }
}

/// Shortest round-trip form, in scientific notation for very small or
/// very large magnitudes.
pub fn num(x: f64) -> String {
    let a = x.abs();
    if x == 0.0 || !x.is_finite() || (1e-4..1e15).contains(&a) {
        x.to_string()
    } else {
        format!("{x:e}")
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// One CSV block per task, separated by blank lines.
pub fn csv(record: &RunRecord) -> String {
    let blocks: Vec<String> = record.results.iter().map(csv_block).collect();
    blocks.join("\n")
}

fn csv_block(r: &TaskRecord) -> String {
    let mut out = String::new();
    let output = r
        .output
        .as_ref()
        .or(r.error.as_ref().and_then(|e| e.partial.as_ref()));
    if let Some(o) = output {
        csv_output(&mut out, o);
    }
    if let Some(e) = &r.error {
        if output.is_some() {
            out.push('\n');
        }
        let _ = writeln!(out, "{ERROR_HEADER}");
        let _ = writeln!(out, "{},{}", r.task, quote(&e.message));
    }
    out
}

fn csv_output(out: &mut String, o: &TaskOutput) {
    match o {
        TaskOutput::Tone(t) => {
            let _ = writeln!(out, "{TONE_HEADER}");
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                num(t.a),
                num(t.b),
                t.mode.k,
                t.mode.j,
                num(t.lambda),
                num(t.error_estimate)
            );
        }
        TaskOutput::Ess(e) => {
            let _ = writeln!(out, "{ESS_HEADER}");
            for p in &e.estimate.points {
                for s in &p.sweep {
                    let _ = writeln!(
                        out,
                        "{},{},{},{}",
                        num(p.r),
                        num(s.r_cut),
                        num(s.lambda),
                        num(s.err)
                    );
                }
            }
        }
        TaskOutput::Certify(c) => certificate_csv(out, c),
        TaskOutput::Compare(c) => {
            let _ = writeln!(out, "{COMPARE_HEADER}");
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                num(c.horizon),
                num(c.max_violation),
                num(c.argmax_t),
                c.hypothesis_met,
                c.passed
            );
        }
        TaskOutput::Verify(v) => {
            let _ = writeln!(out, "{VERIFY_HEADER}");
            for r in &v.reports {
                let _ = writeln!(
                    out,
                    "{},{},{},{}",
                    r.check,
                    num(r.max_residual),
                    num(r.argmax_t),
                    r.passed
                );
            }
            if let Some(s) = &v.sign {
                for (name, r) in [("sign-plus", &s.plus), ("sign-minus", &s.minus)] {
                    let _ = writeln!(
                        out,
                        "{name},{},{},{}",
                        num(r.max_residual),
                        num(r.argmax_t),
                        r.passed
                    );
                }
            }
        }
        TaskOutput::Brooks(b) => {
            let _ = writeln!(out, "{BROOKS_HEADER}");
            for s in &b.report.tail {
                let _ = writeln!(out, "{},{},{}", num(s.r), num(s.log_volume), num(s.mu_hat));
            }
        }
    }
}

fn certificate_csv(out: &mut String, c: &tonelab::certificate::Certificate) {
    let _ = writeln!(out, "{CERTIFY_HEADER}");
    let _ = writeln!(
        out,
        "{},{},{},{}",
        num(c.r_star),
        num(c.inf_driving),
        opt(c.bound),
        c.verdict
    );
}

pub fn table(record: &RunRecord) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "scenario {}  (tonelab {})",
        record.scenario.name, record.versions.tonelab
    );
    let m = &record.scenario.model;
    let _ = write!(out, "model    n={} f={}", m.n, m.f);
    if let Some(psi) = &m.psi {
        let _ = write!(out, " m={} psi={}", m.m.unwrap_or(1), psi);
    }
    out.push('\n');
    for (i, r) in record.results.iter().enumerate() {
        let _ = writeln!(out, "\n[{}] {}", i + 1, r.task);
        if let Some(o) = &r.output {
            table_output(&mut out, o);
        }
        if let Some(e) = &r.error {
            let _ = writeln!(out, "  error: {}", e.message);
            if let Some(p) = &e.partial {
                let _ = writeln!(out, "  partial results:");
                table_output(&mut out, p);
            }
        }
    }
    out
}

fn table_output(out: &mut String, o: &TaskOutput) {
    match o {
        TaskOutput::Tone(t) => {
            let _ = writeln!(
                out,
                "  domain   [{}, {}] ({:?}), {:?} space, mode k={} j={}",
                t.a, t.b, t.inner, t.space, t.mode.k, t.mode.j
            );
            let _ = writeln!(
                out,
                "  lambda   {:.10}  ± {:.2e}  (grids {} / {})",
                t.lambda, t.error_estimate, t.grids.0, t.grids.1
            );
            for c in &t.mode_checks {
                let _ = writeln!(
                    out,
                    "  mode check k={} j={}: {:.8} >= {:.8} {}",
                    c.mode.k,
                    c.mode.j,
                    c.lambda,
                    c.reference,
                    if c.passed { "ok" } else { "FAILED" }
                );
            }
        }
        TaskOutput::Ess(e) => {
            let _ = writeln!(
                out,
                "  {:>8}  {:>10}  {:>16}  {:>10}  converged",
                "R", "last R_cut", "lambda*([R,inf))", "error"
            );
            for p in &e.estimate.points {
                let last = p.sweep.last().map(|s| s.r_cut).unwrap_or(p.r);
                let _ = writeln!(
                    out,
                    "  {:>8}  {:>10}  {:>16.8}  {:>10.2e}  {}",
                    p.r, last, p.lambda, p.error, p.converged
                );
            }
            match e.estimate.outcome {
                tonelab::spectrum::EssOutcome::Bottom { value, error } => {
                    let _ = writeln!(out, "  inf ess spectrum ≈ {value:.8} ± {error:.2e}");
                }
                tonelab::spectrum::EssOutcome::Discrete { threshold } => {
                    let _ = writeln!(out, "  discrete: exterior tones increase past {threshold}");
                }
            }
            if let Some(t) = &e.transfer {
                let _ = writeln!(out, "  transfer ({:?}): {}", t.kind, t.statement);
            }
        }
        TaskOutput::Certify(c) => {
            let _ = writeln!(out, "  kind     {}", c.kind);
            let _ = writeln!(out, "  verdict  {}", c.verdict);
            let _ = writeln!(
                out,
                "  tail     [{}, {}], driving in [{:.8}, {:.8}]",
                c.r_star, c.horizon, c.inf_driving, c.sup_driving
            );
            if let Some(b) = c.bound {
                let _ = writeln!(out, "  bound    lambda*(M \\ B(R*)) >= {b:.10}");
            }
            let _ = writeln!(out, "  note     {}", c.note);
        }
        TaskOutput::Compare(c) => {
            let _ = writeln!(
                out,
                "  hypothesis K_rad <= -G: {} (max excess {:.3e} at t={})",
                c.hypothesis_met, c.max_hypothesis_violation, c.hypothesis_argmax_t
            );
            let _ = writeln!(
                out,
                "  Δρ >= ℓ: {} (max ℓ − Δρ = {:.3e} at t={})",
                c.passed, c.max_violation, c.argmax_t
            );
        }
        TaskOutput::Verify(v) => {
            let _ = writeln!(
                out,
                "  {:<16}  {:>12}  {:>10}  pass",
                "check", "max residual", "argmax t"
            );
            for r in &v.reports {
                let _ = writeln!(
                    out,
                    "  {:<16}  {:>12.3e}  {:>10.4}  {}",
                    r.check, r.max_residual, r.argmax_t, r.passed
                );
            }
            if let Some(s) = &v.sign {
                let _ = writeln!(
                    out,
                    "  sign of H: {:+} (residual +H {:.3e}, −H {:.3e}{})",
                    s.sign,
                    s.plus.max_residual,
                    s.minus.max_residual,
                    if s.degenerate { ", degenerate" } else { "" }
                );
            }
        }
        TaskOutput::Brooks(b) => {
            let r = &b.report;
            let _ = writeln!(
                out,
                "  mu estimate {:.6} (earlier {:.6}), volume diverges {}",
                r.mu_estimate, r.mu_earlier, r.volume_diverges
            );
            let _ = writeln!(
                out,
                "  verdict  {}  [{}]",
                r.verdict.as_str(),
                b.certificate.verdict
            );
            if let Some(u) = r.ess_upper_bound {
                let _ = writeln!(out, "  inf ess spectrum <= mu²/4 = {u:.6}");
            }
        }
    }
}
