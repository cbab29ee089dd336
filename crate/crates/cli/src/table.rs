//! Runs and aggregate CSV files.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use sgda_core::quadgame::fmt_real;
use thiserror::Error;

pub const RUNS_HEADER: &str =
    "algorithm,sampler,batch_size,seed,epoch,V_lambda,V_lambda_normalized,dist_sq,grad_phi_sq,status";
pub const DEBUG_COLUMN: &str = "schedule_digest";
pub const AGGREGATE_HEADER: &str = "algorithm,sampler,batch_size,epoch,mean_norm_V,ci_low,ci_high,num_runs";
/// Comment line naming the game a runs file was produced on.
pub const GAME_DIGEST_PREFIX: &str = "# game_digest=";
/// Half-width of the confidence band in standard deviations.
pub const CI_Z: f64 = 1.96;

#[derive(Debug, Error, PartialEq)]
pub enum TableError {
    #[error("runs file is empty")]
    Empty,
    #[error("line {line}: expected header `{RUNS_HEADER}`")]
    Header { line: usize },
    #[error("line {line}: {reason}")]
    Row { line: usize, reason: String },
    #[error("runs come from different games ({first} and {second})")]
    MixedGames { first: String, second: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub algorithm: String,
    pub sampler: String,
    pub batch_size: usize,
    pub seed: u64,
    pub epoch: usize,
    pub v_lambda: f64,
    pub v_normalized: f64,
    pub dist_sq: Option<f64>,
    pub grad_phi_sq: f64,
    pub status: String,
    /// Digest of the schedule used in the epoch starting at this row.
    pub schedule_digest: Option<u64>,
}

/// FNV-1a digest of a game file, printed as 16 hex digits.
pub fn game_digest(text: &str) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in text.bytes() {
        h ^= byte as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    format!("{h:016x}")
}

pub fn write_runs(game: &str, rows: &[RunRow], debug: bool) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{GAME_DIGEST_PREFIX}{game}");
    out.push_str(RUNS_HEADER);
    if debug {
        let _ = write!(out, ",{DEBUG_COLUMN}");
    }
    out.push('\n');
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.algorithm,
            r.sampler,
            r.batch_size,
            r.seed,
            r.epoch,
            fmt_real(r.v_lambda),
            fmt_real(r.v_normalized),
            r.dist_sq.map(fmt_real).unwrap_or_default(),
            fmt_real(r.grad_phi_sq),
            r.status
        );
        if debug {
            let _ = write!(out, ",{}", r.schedule_digest.map(|d| format!("{d:016x}")).unwrap_or_default());
        }
        out.push('\n');
    }
    out
}

/// Parsed runs file: the game digest (if recorded) and the rows.
#[derive(Debug, Clone, PartialEq)]
pub struct RunsFile {
    pub game: Option<String>,
    pub rows: Vec<RunRow>,
}

fn field<T: std::str::FromStr>(cols: &[&str], i: usize, name: &str, line: usize) -> Result<T, TableError> {
    cols[i].parse().map_err(|_| TableError::Row {
        line,
        reason: format!("invalid {name} `{}`", cols[i]),
    })
}

pub fn read_runs(text: &str) -> Result<RunsFile, TableError> {
    let mut game: Option<String> = None;
    let mut header: Option<bool> = None;
    let mut rows = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let raw = raw.trim_end_matches('\r');
        if let Some(d) = raw.strip_prefix(GAME_DIGEST_PREFIX) {
            let d = d.trim().to_string();
            match &game {
                Some(g) if *g != d => {
                    return Err(TableError::MixedGames {
                        first: g.clone(),
                        second: d,
                    })
                }
                _ => game = Some(d),
            }
            continue;
        }
        if raw.trim().is_empty() || raw.starts_with('#') {
            continue;
        }
        let Some(debug) = header else {
            header = Some(if raw == RUNS_HEADER {
                false
            } else if raw == format!("{RUNS_HEADER},{DEBUG_COLUMN}") {
                true
            } else {
                return Err(TableError::Header { line });
            });
            continue;
        };
        if raw == RUNS_HEADER || raw == format!("{RUNS_HEADER},{DEBUG_COLUMN}") {
            // Concatenated files repeat the header.
            continue;
        }
        let cols: Vec<&str> = raw.split(',').collect();
        let expected = if debug { 11 } else { 10 };
        if cols.len() != expected {
            return Err(TableError::Row {
                line,
                reason: format!("expected {expected} columns, got {}", cols.len()),
            });
        }
        rows.push(RunRow {
            algorithm: cols[0].to_string(),
            sampler: cols[1].to_string(),
            batch_size: field(&cols, 2, "batch_size", line)?,
            seed: field(&cols, 3, "seed", line)?,
            epoch: field(&cols, 4, "epoch", line)?,
            v_lambda: field(&cols, 5, "V_lambda", line)?,
            v_normalized: field(&cols, 6, "V_lambda_normalized", line)?,
            dist_sq: if cols[7].is_empty() {
                None
            } else {
                Some(field(&cols, 7, "dist_sq", line)?)
            },
            grad_phi_sq: field(&cols, 8, "grad_phi_sq", line)?,
            status: cols[9].to_string(),
            schedule_digest: if debug && !cols[10].is_empty() {
                Some(u64::from_str_radix(cols[10], 16).map_err(|_| TableError::Row {
                    line,
                    reason: format!("invalid {DEBUG_COLUMN} `{}`", cols[10]),
                })?)
            } else {
                None
            },
        });
    }
    if rows.is_empty() {
        return Err(TableError::Empty);
    }
    Ok(RunsFile { game, rows })
}

/// A series is one (algorithm, sampler, batch size) curve.
pub type SeriesKey = (String, String, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRow {
    pub series: SeriesKey,
    pub epoch: usize,
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub num_runs: usize,
}

/// Mean and `mean ± 1.96·std` of the normalized potential per series and
/// epoch, with the population (divisor n) standard deviation. Non-finite
/// values from divergent runs are left out of the statistics.
pub fn aggregate(rows: &[RunRow]) -> Vec<AggregateRow> {
    let mut order: Vec<SeriesKey> = Vec::new();
    let mut groups: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
    for r in rows {
        let key = (r.algorithm.clone(), r.sampler.clone(), r.batch_size);
        let s = match order.iter().position(|k| *k == key) {
            Some(s) => s,
            None => {
                order.push(key);
                order.len() - 1
            }
        };
        let values = groups.entry((s, r.epoch)).or_default();
        if r.v_normalized.is_finite() {
            values.push(r.v_normalized);
        }
    }
    groups
        .into_iter()
        .filter(|(_, v)| !v.is_empty())
        .map(|((s, epoch), values)| {
            let n = values.len() as f64;
            let mean = values.iter().sum::<f64>() / n;
            let std = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n).sqrt();
            AggregateRow {
                series: order[s].clone(),
                epoch,
                mean,
                ci_low: mean - CI_Z * std,
                ci_high: mean + CI_Z * std,
                num_runs: values.len(),
            }
        })
        .collect()
}

pub fn write_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = String::from(AGGREGATE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.series.0,
            r.series.1,
            r.series.2,
            r.epoch,
            fmt_real(r.mean),
            fmt_real(r.ci_low),
            fmt_real(r.ci_high),
            r.num_runs
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(seed: u64, epoch: usize, v: f64) -> RunRow {
        RunRow {
            algorithm: "simSGDA".into(),
            sampler: "RR".into(),
            batch_size: 1,
            seed,
            epoch,
            v_lambda: v,
            v_normalized: v,
            dist_sq: Some(0.1 + v),
            grad_phi_sq: 1.0 / 3.0,
            status: "Budget".into(),
            schedule_digest: Some(0xdead_beef),
        }
    }

    #[test]
    fn runs_round_trip_losslessly() {
        let rows = vec![row(0, 0, 1.0), row(0, 1, std::f64::consts::PI * 1e-7), row(1, 0, f64::INFINITY)];
        for debug in [false, true] {
            let text = write_runs("abc", &rows, debug);
            let back = read_runs(&text).unwrap();
            assert_eq!(back.game.as_deref(), Some("abc"));
            for (a, b) in rows.iter().zip(&back.rows) {
                assert_eq!(a.v_lambda.to_bits(), b.v_lambda.to_bits());
                assert_eq!(a.grad_phi_sq.to_bits(), b.grad_phi_sq.to_bits());
                assert_eq!(b.schedule_digest, if debug { Some(0xdead_beef) } else { None });
            }
        }
    }

    #[test]
    fn two_runs_population_std() {
        let agg = aggregate(&[row(0, 0, 1.0), row(1, 0, 3.0)]);
        assert_eq!(agg.len(), 1);
        assert_eq!(agg[0].mean, 2.0);
        assert_eq!(agg[0].ci_low, 2.0 - 1.96);
        assert_eq!(agg[0].ci_high, 2.0 + 1.96);
        assert_eq!(agg[0].num_runs, 2);
    }

    #[test]
    fn single_run_has_zero_width_band() {
        let agg = aggregate(&[row(0, 0, 0.7)]);
        assert_eq!((agg[0].ci_low, agg[0].ci_high), (0.7, 0.7));
    }

    #[test]
    fn read_errors() {
        assert_eq!(read_runs("").unwrap_err(), TableError::Empty);
        assert_eq!(read_runs(&format!("{RUNS_HEADER}\n")).unwrap_err(), TableError::Empty);
        assert!(matches!(read_runs("a,b\n").unwrap_err(), TableError::Header { line: 1 }));
        let mixed = format!("{GAME_DIGEST_PREFIX}aa\n{RUNS_HEADER}\n{GAME_DIGEST_PREFIX}bb\n");
        assert!(matches!(read_runs(&mixed).unwrap_err(), TableError::MixedGames { .. }));
        let short = format!("{RUNS_HEADER}\nsimSGDA,RR,1\n");
        assert!(matches!(read_runs(&short).unwrap_err(), TableError::Row { line: 2, .. }));
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(game_digest(""), "cbf29ce484222325");
        assert_ne!(game_digest("a"), game_digest("b"));
    }
}
