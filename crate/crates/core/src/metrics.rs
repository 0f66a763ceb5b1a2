//! Aggregation of simulation traces into cross-replica statistics, plus the
//! CSV/JSON output formats consumed by downstream plotting tools.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::{detect_convergence, RoundRecord};
use crate::games::{action_label, Game, JointAction};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("no runs to aggregate")]
    Empty,
    #[error("mismatched round counts: {0} vs {1}")]
    MismatchedRounds(usize, usize),
}

/// Number of trailing rounds averaged into `final_avg_payoff`.
const FINAL_WINDOW: usize = 10;

/// One replica: its convergence outcome and payoff trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub converged_round: Option<u32>,
    pub norm: Option<JointAction>,
    /// Mean of the last ten rounds' average payoffs (fewer if the run is
    /// shorter).
    pub final_avg_payoff: f64,
    pub payoff_series: Vec<f64>,
}

/// Builds the per-run summary from a trace.
pub fn summarize(
    seed: u64,
    trace: &[RoundRecord],
    game: &Game,
    window: u32,
    threshold: f64,
) -> RunSummary {
    let payoff_series: Vec<f64> = trace.iter().map(|r| r.avg_payoff).collect();
    let tail = payoff_series.len().min(FINAL_WINDOW);
    let final_avg_payoff = if tail == 0 {
        0.0
    } else {
        payoff_series[payoff_series.len() - tail..].iter().sum::<f64>() / tail as f64
    };
    let converged = detect_convergence(trace, game, window, threshold);
    RunSummary {
        seed,
        converged_round: converged.map(|(r, _)| r),
        norm: converged.map(|(_, n)| n),
        final_avg_payoff,
        payoff_series,
    }
}

/// Statistics over a batch of replicas of one configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n_runs: usize,
    pub rounds: usize,
    /// Fraction of runs that converged.
    pub convergence_fraction: f64,
    /// Mean/std of the convergence round over converged runs only;
    /// non-converged runs are reported via `convergence_fraction`.
    pub mean_converged_round: Option<f64>,
    pub std_converged_round: Option<f64>,
    /// Norm frequencies over converged runs; sums to 1 when any converged.
    pub norm_frequencies: Vec<(JointAction, f64)>,
    pub mean_final_payoff: f64,
    pub mean_payoff_curve: Vec<f64>,
    pub std_payoff_curve: Vec<f64>,
}

/// Streaming mean/variance accumulator.
#[derive(Debug, Clone, Copy, Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, x: f64) {
        self.n += 1;
        let delta = x - self.mean;
        self.mean += delta / self.n as f64;
        self.m2 += delta * (x - self.mean);
    }

    fn mean(&self) -> f64 {
        self.mean
    }

    /// Population standard deviation.
    fn std(&self) -> f64 {
        if self.n == 0 {
            0.0
        } else {
            (self.m2 / self.n as f64).sqrt()
        }
    }
}

/// Pointwise statistics over equal-length runs. Permutation-invariant up to
/// floating-point accumulation order; tests pin agreement with the two-pass
/// computation to 1e-9 relative.
pub fn aggregate(summaries: &[RunSummary]) -> Result<Aggregate, MetricsError> {
    let first = summaries.first().ok_or(MetricsError::Empty)?;
    let rounds = first.payoff_series.len();
    for s in summaries {
        if s.payoff_series.len() != rounds {
            return Err(MetricsError::MismatchedRounds(rounds, s.payoff_series.len()));
        }
    }
    let mut curve = vec![Welford::default(); rounds];
    let mut final_payoff = Welford::default();
    let mut round_stats = Welford::default();
    let mut norm_counts: std::collections::BTreeMap<JointAction, u64> = Default::default();
    let mut converged = 0usize;
    for s in summaries {
        for (w, &x) in curve.iter_mut().zip(&s.payoff_series) {
            w.push(x);
        }
        final_payoff.push(s.final_avg_payoff);
        if let (Some(round), Some(norm)) = (s.converged_round, s.norm) {
            converged += 1;
            round_stats.push(round as f64);
            *norm_counts.entry(norm).or_insert(0) += 1;
        }
    }
    let norm_frequencies = norm_counts
        .into_iter()
        .map(|(norm, count)| (norm, count as f64 / converged as f64))
        .collect();
    Ok(Aggregate {
        n_runs: summaries.len(),
        rounds,
        convergence_fraction: converged as f64 / summaries.len() as f64,
        mean_converged_round: (converged > 0).then(|| round_stats.mean()),
        std_converged_round: (converged > 0).then(|| round_stats.std()),
        norm_frequencies,
        mean_final_payoff: final_payoff.mean(),
        mean_payoff_curve: curve.iter().map(Welford::mean).collect(),
        std_payoff_curve: curve.iter().map(Welford::std).collect(),
    })
}

/// One configuration's row in a comparison.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub name: String,
    pub n_runs: usize,
    pub convergence_fraction: f64,
    pub mean_converged_round: Option<f64>,
    pub mean_final_payoff: f64,
}

/// Comparison of named aggregates, ranked by mean convergence round
/// (fastest first; non-converging configurations last).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonTable {
    pub rows: Vec<ComparisonRow>,
}

pub fn compare(named: &[(String, Aggregate)]) -> Result<ComparisonTable, MetricsError> {
    let first = named.first().ok_or(MetricsError::Empty)?;
    for (_, agg) in named {
        if agg.rounds != first.1.rounds {
            return Err(MetricsError::MismatchedRounds(first.1.rounds, agg.rounds));
        }
    }
    let mut rows: Vec<ComparisonRow> = named
        .iter()
        .map(|(name, agg)| ComparisonRow {
            name: name.clone(),
            n_runs: agg.n_runs,
            convergence_fraction: agg.convergence_fraction,
            mean_converged_round: agg.mean_converged_round,
            mean_final_payoff: agg.mean_final_payoff,
        })
        .collect();
    rows.sort_by(|a, b| {
        match (a.mean_converged_round, b.mean_converged_round) {
            (Some(x), Some(y)) => x.partial_cmp(&y).expect("finite means"),
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => std::cmp::Ordering::Equal,
        }
        .then_with(|| a.name.cmp(&b.name))
    });
    Ok(ComparisonTable { rows })
}

impl ComparisonTable {
    /// CSV: `rank,name,n_runs,convergence_fraction,mean_converged_round,mean_final_payoff`.
    pub fn to_csv(&self) -> String {
        let mut out =
            String::from("rank,name,n_runs,convergence_fraction,mean_converged_round,mean_final_payoff\n");
        for (rank, row) in self.rows.iter().enumerate() {
            out.push_str(&format!(
                "{},{},{},{},{},{}\n",
                rank + 1,
                row.name,
                row.n_runs,
                row.convergence_fraction,
                row.mean_converged_round.map(|v| v.to_string()).unwrap_or_default(),
                row.mean_final_payoff
            ));
        }
        out
    }
}

/// Per-round curve CSV: `round,mean_payoff,std_payoff`.
pub fn curve_csv(aggregate: &Aggregate) -> String {
    let mut out = String::from("round,mean_payoff,std_payoff\n");
    for round in 0..aggregate.rounds {
        out.push_str(&format!(
            "{},{},{}\n",
            round, aggregate.mean_payoff_curve[round], aggregate.std_payoff_curve[round]
        ));
    }
    out
}

/// Per-run summary CSV: `seed,converged_round,norm_row,norm_col,final_avg_payoff`.
/// Non-converged runs leave the round and norm columns empty; norms are
/// action letters.
pub fn runs_csv(summaries: &[RunSummary]) -> String {
    let mut out = String::from("seed,converged_round,norm_row,norm_col,final_avg_payoff\n");
    for s in summaries {
        let round = s.converged_round.map(|r| r.to_string()).unwrap_or_default();
        let (norm_row, norm_col) = match s.norm {
            Some((r, c)) => (action_label(r), action_label(c)),
            None => (String::new(), String::new()),
        };
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            s.seed, round, norm_row, norm_col, s.final_avg_payoff
        ));
    }
    out
}

/// Aggregate as pretty JSON (stable field order).
pub fn aggregate_json(aggregate: &Aggregate) -> String {
    serde_json::to_string_pretty(aggregate).expect("aggregate serializes")
}
