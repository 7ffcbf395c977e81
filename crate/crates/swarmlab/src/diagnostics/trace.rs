//! Time series of scalar diagnostics emitted by the solvers.
//!
//! Traces serialize to CSV with a fixed header
//! `t,dE,dv,D,M,mom_x[,mom_y[,mom_z]],E,ens,seminorm,umax`, preceded by
//! `# key value` metadata lines. Floats are written with 17 significant
//! digits so the CSV round-trips f64 values exactly.

use crate::linalg::Vec3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("trace io: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace parse at line {line}: {reason}")]
    Parse { line: usize, reason: String },
    #[error("trace has too few samples for this operation (need {need}, have {have})")]
    TooFewSamples { need: usize, have: usize },
}

/// One sampled row of diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub t: f64,
    /// Energy fluctuations.
    pub d_e: f64,
    /// Uniform velocity fluctuation `max_i |v_i - v_mean|`.
    pub d_v: f64,
    /// Crowd diameter.
    pub diameter: f64,
    /// Total mass.
    pub mass: f64,
    /// Total momentum (padded to three components).
    pub momentum: Vec3,
    /// Total energy.
    pub energy: f64,
    /// Integral of the enstrophy rate since the previous sample.
    pub ens_increment: f64,
    /// Instantaneous fractional seminorm (raised to the 2p power); zero when
    /// not tracked.
    pub seminorm: f64,
    /// Maximum speed.
    pub umax: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceMeta {
    /// "agents" or "hydro".
    pub mode: String,
    pub family: String,
    pub p: f64,
    pub beta: f64,
    pub s: f64,
    pub mass: f64,
    /// Agent count N or cell count n.
    pub size: usize,
    pub dim: usize,
    /// Base time step (agents) or first accepted step (hydro).
    pub dt: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiagnosticsTrace {
    pub meta: TraceMeta,
    pub samples: Vec<Sample>,
}

/// 17-significant-digit float formatting (exact f64 round trip).
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl DiagnosticsTrace {
    pub fn cumulative_enstrophy(&self) -> f64 {
        self.samples.iter().map(|s| s.ens_increment).sum()
    }

    pub fn to_csv(&self) -> String {
        let m = &self.meta;
        let mut out = String::new();
        out.push_str("# swarmlab trace v1\n");
        out.push_str(&format!("# mode {}\n", m.mode));
        out.push_str(&format!("# family {}\n", m.family));
        out.push_str(&format!("# p {}\n", fmt_f64(m.p)));
        out.push_str(&format!("# beta {}\n", fmt_f64(m.beta)));
        out.push_str(&format!("# s {}\n", fmt_f64(m.s)));
        out.push_str(&format!("# mass {}\n", fmt_f64(m.mass)));
        out.push_str(&format!("# size {}\n", m.size));
        out.push_str(&format!("# dim {}\n", m.dim));
        out.push_str(&format!("# dt {}\n", fmt_f64(m.dt)));
        out.push_str("t,dE,dv,D,M");
        for ax in ["mom_x", "mom_y", "mom_z"].iter().take(m.dim) {
            out.push(',');
            out.push_str(ax);
        }
        out.push_str(",E,ens,seminorm,umax\n");
        for s in &self.samples {
            let mut row = vec![
                fmt_f64(s.t),
                fmt_f64(s.d_e),
                fmt_f64(s.d_v),
                fmt_f64(s.diameter),
                fmt_f64(s.mass),
            ];
            for i in 0..m.dim {
                row.push(fmt_f64(s.momentum[i]));
            }
            row.push(fmt_f64(s.energy));
            row.push(fmt_f64(s.ens_increment));
            row.push(fmt_f64(s.seminorm));
            row.push(fmt_f64(s.umax));
            out.push_str(&row.join(","));
            out.push('\n');
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Self, TraceError> {
        let mut meta = TraceMeta {
            mode: String::new(),
            family: String::new(),
            p: 1.0,
            beta: 0.0,
            s: 0.0,
            mass: 1.0,
            size: 0,
            dim: 1,
            dt: 0.0,
        };
        let mut samples = Vec::new();
        let mut header_seen = false;
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            let err = |reason: String| TraceError::Parse {
                line: lineno + 1,
                reason,
            };
            if line.is_empty() {
                continue;
            }
            if let Some(rest) = line.strip_prefix('#') {
                let mut it = rest.trim().splitn(2, ' ');
                let key = it.next().unwrap_or("");
                let val = it.next().unwrap_or("").trim();
                match key {
                    "mode" => meta.mode = val.to_string(),
                    "family" => meta.family = val.to_string(),
                    "p" => meta.p = parse_f64(val, lineno)?,
                    "beta" => meta.beta = parse_f64(val, lineno)?,
                    "s" => meta.s = parse_f64(val, lineno)?,
                    "mass" => meta.mass = parse_f64(val, lineno)?,
                    "size" => meta.size = val.parse().map_err(|e| err(format!("bad size: {e}")))?,
                    "dim" => meta.dim = val.parse().map_err(|e| err(format!("bad dim: {e}")))?,
                    "dt" => meta.dt = parse_f64(val, lineno)?,
                    _ => {}
                }
                continue;
            }
            if !header_seen {
                if !line.starts_with("t,dE,dv,D,M") {
                    return Err(err(format!("unexpected header: {line}")));
                }
                header_seen = true;
                continue;
            }
            let fields: Vec<&str> = line.split(',').collect();
            let want = 9 + meta.dim;
            if fields.len() != want {
                return Err(err(format!(
                    "expected {want} columns for dim {}, found {}",
                    meta.dim,
                    fields.len()
                )));
            }
            let f = |i: usize| parse_f64(fields[i], lineno);
            let mut momentum = [0.0; 3];
            for (i, mi) in momentum.iter_mut().enumerate().take(meta.dim) {
                *mi = f(5 + i)?;
            }
            let base = 5 + meta.dim;
            samples.push(Sample {
                t: f(0)?,
                d_e: f(1)?,
                d_v: f(2)?,
                diameter: f(3)?,
                mass: f(4)?,
                momentum,
                energy: f(base)?,
                ens_increment: f(base + 1)?,
                seminorm: f(base + 2)?,
                umax: f(base + 3)?,
            });
        }
        if !header_seen {
            return Err(TraceError::Parse {
                line: 0,
                reason: "missing header row".into(),
            });
        }
        Ok(DiagnosticsTrace { meta, samples })
    }
}

fn parse_f64(s: &str, lineno: usize) -> Result<f64, TraceError> {
    s.trim().parse().map_err(|e| TraceError::Parse {
        line: lineno + 1,
        reason: format!("bad float {s:?}: {e}"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(t: f64) -> Sample {
        Sample {
            t,
            d_e: 0.25 * (-2.0 * t).exp(),
            d_v: 0.5 * (-t).exp(),
            diameter: 1.0 + t,
            mass: 1.0,
            momentum: [0.125, -3.0e-17, 0.0],
            energy: 0.5,
            ens_increment: 0.01,
            seminorm: 0.0,
            umax: 1.0,
        }
    }

    #[test]
    fn csv_round_trip_exact() {
        let trace = DiagnosticsTrace {
            meta: TraceMeta {
                mode: "agents".into(),
                family: "heavy_tail".into(),
                p: 1.25,
                beta: 0.5,
                s: 0.0,
                mass: 1.0,
                size: 64,
                dim: 2,
                dt: 0.01,
            },
            samples: (0..7).map(|i| sample(i as f64 * 0.173)).collect(),
        };
        let csv = trace.to_csv();
        let back = DiagnosticsTrace::from_csv(&csv).unwrap();
        assert_eq!(trace, back);
    }

    #[test]
    fn rejects_garbage() {
        assert!(DiagnosticsTrace::from_csv("no header at all\n").is_err());
        let bad = "# dim 1\nt,dE,dv,D,M,mom_x,E,ens,seminorm,umax\n1,2\n";
        assert!(matches!(
            DiagnosticsTrace::from_csv(bad),
            Err(TraceError::Parse { .. })
        ));
    }
}
