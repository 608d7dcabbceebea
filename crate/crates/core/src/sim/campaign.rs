//! Sequential learning campaigns and parallel Monte Carlo sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::attempt::{fly, AttemptLog};
use super::seeds::{attempt_seed, run_seed};
use super::{Scenario, SimError};

pub const REPORT_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignResult {
    pub run_id: u64,
    pub attempts: Vec<AttemptLog>,
    pub success_rate: f64,
    /// 1-based index of the first successful attempt.
    pub first_success: Option<usize>,
    /// Radial error per attempt; `NaN` for attempts without contact.
    pub learning_curve: Vec<f64>,
}

impl CampaignResult {
    fn from_attempts(run_id: u64, attempts: Vec<AttemptLog>) -> Self {
        let n = attempts.len().max(1) as f64;
        let successes = attempts.iter().filter(|a| a.success).count();
        Self {
            run_id,
            first_success: attempts.iter().find(|a| a.success).map(|a| a.k),
            learning_curve: attempts.iter().map(|a| a.radial_error.unwrap_or(f64::NAN)).collect(),
            success_rate: successes as f64 / n,
            attempts,
        }
    }
}

/// Flies `campaign.n_attempts` attempts in sequence, carrying the learning
/// state. A timed-out attempt counts as a failure and leaves the state alone.
pub fn run_campaign(scenario: &Scenario) -> Result<CampaignResult, SimError> {
    run_indexed(scenario, 0)
}

fn run_indexed(scenario: &Scenario, run: u64) -> Result<CampaignResult, SimError> {
    scenario.validate()?;
    let rs = run_seed(scenario.campaign.master_seed, run);
    let mut state = scenario.warm_start;
    let mut attempts = Vec::with_capacity(scenario.campaign.n_attempts);
    for k in 1..=scenario.campaign.n_attempts {
        let log = fly(scenario, &state, k, attempt_seed(rs, k as u64))?;
        state = log.tilc_after;
        attempts.push(log);
    }
    Ok(CampaignResult::from_attempts(run, attempts))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: u64,
    pub first_success: Option<usize>,
    pub successes: usize,
    pub attempts: usize,
    /// Attempts after the first success, and how many of them succeeded.
    pub steady_attempts: usize,
    pub steady_successes: usize,
    pub radial_errors: Vec<f64>,
}

impl RunSummary {
    pub fn of(result: &CampaignResult) -> Self {
        let (steady_attempts, steady_successes) = match result.first_success {
            Some(f) => {
                let tail = &result.attempts[f..];
                (tail.len(), tail.iter().filter(|a| a.success).count())
            }
            // A run that never docks contributes all of its attempts as failures.
            None => (result.attempts.len(), 0),
        };
        Self {
            run_id: result.run_id,
            first_success: result.first_success,
            successes: result.attempts.iter().filter(|a| a.success).count(),
            attempts: result.attempts.len(),
            steady_attempts,
            steady_successes,
            radial_errors: result.learning_curve.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub schema_version: u32,
    pub master_seed: u64,
    pub n_runs: usize,
    pub attempts_per_run: usize,
    pub success_rate: f64,
    pub steady_state_success_rate: f64,
    /// 95 % Wilson interval of the steady-state rate.
    pub steady_state_ci: (f64, f64),
    /// Mean radial error per attempt index over runs with contact.
    pub mean_radial_error: Vec<f64>,
    /// Fraction of runs whose first success is at or before each attempt index.
    pub first_success_cdf: Vec<f64>,
    pub runs: Vec<RunSummary>,
}

/// Wilson score interval for `successes` out of `n` at normal quantile `z`.
pub fn wilson_interval(successes: usize, n: usize, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Runs `n_runs` independent campaigns in parallel. Run `r` uses seed
/// `run_seed(master, r)`, so results do not depend on thread count.
pub fn monte_carlo(scenario: &Scenario, n_runs: usize) -> Result<(MonteCarloReport, Vec<CampaignResult>), SimError> {
    if n_runs == 0 {
        return Err(SimError::InvalidScenario("at least one run is required".into()));
    }
    scenario.validate()?;
    let results: Vec<CampaignResult> =
        (0..n_runs as u64).into_par_iter().map(|r| run_indexed(scenario, r)).collect::<Result<_, _>>()?;
    Ok((summarize(scenario, &results), results))
}

pub(crate) fn summarize(scenario: &Scenario, results: &[CampaignResult]) -> MonteCarloReport {
    let runs: Vec<RunSummary> = results.iter().map(RunSummary::of).collect();
    let n_att = scenario.campaign.n_attempts;
    let total: usize = runs.iter().map(|r| r.attempts).sum();
    let succ: usize = runs.iter().map(|r| r.successes).sum();
    let st_n: usize = runs.iter().map(|r| r.steady_attempts).sum();
    let st_s: usize = runs.iter().map(|r| r.steady_successes).sum();
    let mean_radial_error = (0..n_att)
        .map(|k| {
            let v: Vec<f64> =
                runs.iter().filter_map(|r| r.radial_errors.get(k)).copied().filter(|e| e.is_finite()).collect();
            if v.is_empty() {
                f64::NAN
            } else {
                v.iter().sum::<f64>() / v.len() as f64
            }
        })
        .collect();
    let first_success_cdf = (1..=n_att)
        .map(|k| runs.iter().filter(|r| r.first_success.is_some_and(|f| f <= k)).count() as f64 / runs.len() as f64)
        .collect();
    MonteCarloReport {
        schema_version: REPORT_SCHEMA_VERSION,
        master_seed: scenario.campaign.master_seed,
        n_runs: runs.len(),
        attempts_per_run: n_att,
        success_rate: if total == 0 { 0.0 } else { succ as f64 / total as f64 },
        steady_state_success_rate: if st_n == 0 { 0.0 } else { st_s as f64 / st_n as f64 },
        steady_state_ci: wilson_interval(st_s, st_n, 1.959_963_984_540_054),
        mean_radial_error,
        first_success_cdf,
        runs,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_reference_values() {
        // 8 of 10 at 95 %: (0.4902, 0.9433).
        let (lo, hi) = wilson_interval(8, 10, 1.959_963_984_540_054);
        assert!((lo - 0.490_16).abs() < 1e-4, "{lo}");
        assert!((hi - 0.943_32).abs() < 1e-4, "{hi}");
        let (lo, hi) = wilson_interval(10, 10, 1.96);
        assert!(lo > 0.69 && hi == 1.0);
        assert_eq!(wilson_interval(0, 0, 1.96), (0.0, 1.0));
    }

    #[test]
    fn affine_campaign_is_deterministic() {
        let mut sc = Scenario::default_affine();
        sc.campaign.n_attempts = 8;
        let a = run_campaign(&sc).unwrap();
        let b = run_campaign(&sc).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.attempts.len(), 8);
        for w in a.attempts.windows(2) {
            assert_eq!(w[0].tilc_after, w[1].tilc_before);
        }
    }

    #[test]
    fn single_run_monte_carlo_matches_campaign() {
        let mut sc = Scenario::default_affine();
        sc.campaign.n_attempts = 6;
        let c = run_campaign(&sc).unwrap();
        let (report, results) = monte_carlo(&sc, 1).unwrap();
        assert_eq!(results[0], c);
        assert_eq!(report.runs[0], RunSummary::of(&c));
        assert_eq!(report.success_rate, c.success_rate);
    }

    #[test]
    fn steady_state_counts_after_first_success() {
        let mut sc = Scenario::default_affine();
        sc.campaign.n_attempts = 5;
        let mut c = run_campaign(&sc).unwrap();
        let pattern = [false, true, false, true, true];
        for (a, s) in c.attempts.iter_mut().zip(pattern) {
            a.success = s;
        }
        let c = CampaignResult::from_attempts(0, c.attempts);
        let s = RunSummary::of(&c);
        assert_eq!(c.first_success, Some(2));
        assert_eq!((s.steady_attempts, s.steady_successes), (3, 2));
    }
}
