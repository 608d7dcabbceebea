//! CSV and JSON output for campaigns and Monte Carlo sweeps.
//!
//! Floats are written as `{:.8e}` (nine significant digits) so files are
//! byte-identical across reruns with the same seed.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::sim::{AttemptLog, CampaignResult, MonteCarloReport, Scenario};

pub const SCHEMA_VERSION: u32 = 1;

pub const ATTEMPT_HEADER: [&str; 18] = [
    "run_id",
    "k",
    "t_terminal",
    "p_dr_t_x",
    "p_dr_t_y",
    "p_dr_t_z",
    "p_pr_t_x",
    "p_pr_t_y",
    "p_pr_t_z",
    "radial_error",
    "success",
    "u_de_dr_x",
    "u_de_dr_y",
    "u_de_dr_z",
    "u_e_pr_x",
    "u_e_pr_y",
    "u_e_pr_z",
    "timed_out",
];

pub const TRAJECTORY_HEADER: [&str; 9] =
    ["run_id", "k", "t", "p_dr_x", "p_dr_y", "p_dr_z", "p_pr_x", "p_pr_y", "p_pr_z"];

/// One attempt as written to `attempts.csv`. Learned terms are the ones the
/// attempt flew with; terminal fields are empty after a timeout.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExportRow {
    pub run_id: u64,
    pub k: usize,
    pub t_terminal: Option<f64>,
    pub p_dr_t: Option<[f64; 3]>,
    pub p_pr_t: Option<[f64; 3]>,
    pub radial_error: Option<f64>,
    pub success: bool,
    pub u_de_dr: [f64; 3],
    pub u_e_pr: [f64; 3],
    pub timed_out: bool,
}

impl ExportRow {
    pub fn of(run_id: u64, a: &AttemptLog) -> Self {
        Self {
            run_id,
            k: a.k,
            t_terminal: a.terminal_time,
            p_dr_t: a.p_dr_t.map(Into::into),
            p_pr_t: a.p_pr_t.map(Into::into),
            radial_error: a.radial_error,
            success: a.success,
            u_de_dr: a.tilc_before.u_de_dr.into(),
            u_e_pr: a.tilc_before.u_e_pr.into(),
            timed_out: a.timed_out,
        }
    }

    fn fields(&self) -> Vec<String> {
        let opt3 = |v: Option<[f64; 3]>| match v {
            Some(v) => v.iter().map(|x| num(*x)).collect(),
            None => vec![String::new(); 3],
        };
        let mut f = vec![self.run_id.to_string(), self.k.to_string(), opt(self.t_terminal)];
        f.extend(opt3(self.p_dr_t));
        f.extend(opt3(self.p_pr_t));
        f.push(opt(self.radial_error));
        f.push(self.success.to_string());
        f.extend(self.u_de_dr.iter().map(|x| num(*x)));
        f.extend(self.u_e_pr.iter().map(|x| num(*x)));
        f.push(self.timed_out.to_string());
        f
    }

    fn from_record(r: &csv::StringRecord) -> Result<Self, ExportError> {
        if r.len() != ATTEMPT_HEADER.len() {
            return Err(ExportError::Format(format!("expected {} columns, got {}", ATTEMPT_HEADER.len(), r.len())));
        }
        let get = |i: usize| r.get(i).unwrap_or("");
        let f = |i: usize| -> Result<Option<f64>, ExportError> {
            let s = get(i);
            if s.is_empty() {
                return Ok(None);
            }
            s.parse()
                .map(Some)
                .map_err(|_| ExportError::Format(format!("column {}: bad number `{s}`", ATTEMPT_HEADER[i])))
        };
        let req = |i: usize| f(i)?.ok_or_else(|| ExportError::Format(format!("column {} is empty", ATTEMPT_HEADER[i])));
        let three = |i: usize| -> Result<Option<[f64; 3]>, ExportError> {
            Ok(match (f(i)?, f(i + 1)?, f(i + 2)?) {
                (Some(a), Some(b), Some(c)) => Some([a, b, c]),
                _ => None,
            })
        };
        let parse_int =
            |i: usize| get(i).parse::<u64>().map_err(|_| ExportError::Format(format!("column {}", ATTEMPT_HEADER[i])));
        let parse_bool =
            |i: usize| get(i).parse::<bool>().map_err(|_| ExportError::Format(format!("column {}", ATTEMPT_HEADER[i])));
        Ok(Self {
            run_id: parse_int(0)?,
            k: parse_int(1)? as usize,
            t_terminal: f(2)?,
            p_dr_t: three(3)?,
            p_pr_t: three(6)?,
            radial_error: f(9)?,
            success: parse_bool(10)?,
            u_de_dr: [req(11)?, req(12)?, req(13)?],
            u_e_pr: [req(14)?, req(15)?, req(16)?],
            timed_out: parse_bool(17)?,
        })
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExportError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed export: {0}")]
    Format(String),
}

pub fn num(x: f64) -> String {
    format!("{x:.8e}")
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

pub fn write_attempts_csv<W: Write>(w: W, results: &[CampaignResult]) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(ATTEMPT_HEADER)?;
    for r in results {
        for a in &r.attempts {
            out.write_record(ExportRow::of(r.run_id, a).fields())?;
        }
    }
    out.flush()?;
    Ok(())
}

pub fn read_attempts_csv<R: std::io::Read>(r: R) -> Result<Vec<ExportRow>, ExportError> {
    let mut rd = csv::Reader::from_reader(r);
    if rd.headers()?.iter().ne(ATTEMPT_HEADER) {
        return Err(ExportError::Format("unexpected header".into()));
    }
    rd.records().map(|rec| ExportRow::from_record(&rec?)).collect()
}

pub fn write_trajectories_csv<W: Write>(w: W, results: &[CampaignResult]) -> Result<(), ExportError> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(TRAJECTORY_HEADER)?;
    for r in results {
        for a in &r.attempts {
            for s in &a.trajectory {
                let mut f = vec![r.run_id.to_string(), a.k.to_string(), num(s.t)];
                f.extend(s.p_dr.iter().chain(s.p_pr.iter()).map(|x| num(*x)));
                out.write_record(f)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// `campaign.json`: the campaign without trajectories, which go to CSV.
#[derive(Debug, Clone, Serialize)]
pub struct CampaignDocument {
    pub schema_version: u32,
    pub master_seed: u64,
    pub n_attempts: usize,
    pub r_c: f64,
    pub success_rate: f64,
    pub first_success: Option<usize>,
    pub learning_curve: Vec<Option<f64>>,
    pub attempts: Vec<AttemptLog>,
}

impl CampaignDocument {
    pub fn new(scenario: &Scenario, result: &CampaignResult) -> Self {
        let attempts = result.attempts.iter().map(|a| AttemptLog { trajectory: Vec::new(), ..a.clone() }).collect();
        Self {
            schema_version: SCHEMA_VERSION,
            master_seed: scenario.campaign.master_seed,
            n_attempts: result.attempts.len(),
            r_c: scenario.campaign.r_c,
            success_rate: result.success_rate,
            first_success: result.first_success,
            learning_curve: result.learning_curve.iter().map(|e| e.is_finite().then_some(*e)).collect(),
            attempts,
        }
    }
}

pub fn write_json<W: Write, T: Serialize>(mut w: W, value: &T) -> Result<(), ExportError> {
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    Ok(())
}

/// `report.json` for a Monte Carlo sweep.
pub fn write_report<W: Write>(w: W, report: &MonteCarloReport) -> Result<(), ExportError> {
    write_json(w, report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::run_campaign;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() <= 5e-9 * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn number_format() {
        assert_eq!(num(0.0), "0.00000000e0");
        assert_eq!(num(-13.5), "-1.35000000e1");
        assert_eq!(num(1.0 / 3.0), "3.33333333e-1");
    }

    #[test]
    fn attempts_round_trip() {
        let mut sc = Scenario::default_affine();
        sc.campaign.n_attempts = 5;
        let res = run_campaign(&sc).unwrap();
        let mut buf = Vec::new();
        write_attempts_csv(&mut buf, std::slice::from_ref(&res)).unwrap();
        let rows = read_attempts_csv(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), 5);
        for (row, a) in rows.iter().zip(&res.attempts) {
            let mem = ExportRow::of(0, a);
            assert_eq!((row.k, row.success, row.timed_out), (mem.k, mem.success, mem.timed_out));
            assert!(close(row.radial_error.unwrap(), mem.radial_error.unwrap()));
            assert!(close(row.t_terminal.unwrap(), mem.t_terminal.unwrap()));
            for i in 0..3 {
                assert!(close(row.p_dr_t.unwrap()[i], mem.p_dr_t.unwrap()[i]));
                assert!(close(row.p_pr_t.unwrap()[i], mem.p_pr_t.unwrap()[i]));
                assert!(close(row.u_de_dr[i], mem.u_de_dr[i]));
                assert!(close(row.u_e_pr[i], mem.u_e_pr[i]));
            }
        }
    }

    #[test]
    fn timeout_row_has_empty_terminal_fields() {
        let mut sc = Scenario::default_affine();
        sc.campaign.n_attempts = 1;
        let mut res = run_campaign(&sc).unwrap();
        let a = &mut res.attempts[0];
        (a.terminal_time, a.p_dr_t, a.p_pr_t, a.radial_error, a.success, a.timed_out) =
            (None, None, None, None, false, true);
        let mut buf = Vec::new();
        write_attempts_csv(&mut buf, std::slice::from_ref(&res)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.lines().nth(1).unwrap().starts_with("0,1,,,,,,,,,false,"));
        let rows = read_attempts_csv(buf.as_slice()).unwrap();
        assert!(rows[0].timed_out && rows[0].p_dr_t.is_none());
    }

    #[test]
    fn header_is_checked() {
        assert!(read_attempts_csv("a,b\n1,2\n".as_bytes()).is_err());
    }
}
