use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::stats::{wilcoxon_signed_rank, MeanStd, Wilcoxon};
use super::{check_seeds, with_workers, Suite};
use crate::candidates::ground_metric;
use crate::config::{GameConfig, StoppingMode};
use crate::error::{Error, Result};
use crate::game::{run_game, Termination};

pub const CONVERGENCE_SCHEMA: &str = "bdg-convergence/1";

/// Fraction of instances on which both modes must converge before `T`.
pub const REQUIRED_CONVERGENCE: f64 = 0.9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergencePair {
    pub instance_id: String,
    pub seed: u64,
    pub classic: usize,
    pub wasserstein: usize,
    pub classic_termination: Termination,
    pub wasserstein_termination: Termination,
    pub classic_winner: String,
    pub wasserstein_winner: String,
}

impl ConvergencePair {
    /// Stopped by its criterion strictly before the iteration cap.
    pub fn converged_both(&self, max_iterations: usize) -> bool {
        self.classic_termination.converged()
            && self.wasserstein_termination.converged()
            && self.classic < max_iterations
            && self.wasserstein < max_iterations
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub schema: String,
    pub config: GameConfig,
    pub seeds: Vec<u64>,
    pub pairs: usize,
    pub converged_both: usize,
    pub convergence_rate: f64,
    /// Mean ± std over seeds of the per-seed mean iteration count.
    pub classic: MeanStd,
    pub wasserstein: MeanStd,
    /// `100 · mean(classic - wasserstein) / mean(classic)` over all pairs.
    pub reduction_percent: f64,
    /// Mean over pairs of `100 · (classic - wasserstein) / classic`.
    pub mean_pair_ratio_percent: f64,
    pub winner_agreement: f64,
    /// Test on `classic - wasserstein`.
    pub wilcoxon: Wilcoxon,
    pub rows: Vec<ConvergencePair>,
}

impl ConvergenceReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()).map_err(|e| Error::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }

    pub fn summary(&self) -> String {
        format!(
            "pairs {}  converged {:.1}%\nclassic      {:.2} ± {:.2}\nwasserstein  {:.2} ± {:.2}\nreduction    {:.1}%  (mean per-pair {:.1}%)\nwinner agreement {:.1}%\nwilcoxon n={} W+={} W-={} p={:.3e} ({:?})\n",
            self.pairs,
            100.0 * self.convergence_rate,
            self.classic.mean,
            self.classic.std,
            self.wasserstein.mean,
            self.wasserstein.std,
            self.reduction_percent,
            self.mean_pair_ratio_percent,
            100.0 * self.winner_agreement,
            self.wilcoxon.n,
            self.wilcoxon.w_plus,
            self.wilcoxon.w_minus,
            self.wilcoxon.p_value,
            self.wilcoxon.method,
        )
    }
}

/// Runs both stopping modes on every instance and compares iteration counts.
pub fn compare_convergence(
    suite: &Suite,
    cfg: &GameConfig,
    seeds: &[u64],
    workers: usize,
) -> Result<ConvergenceReport> {
    cfg.validate()?;
    suite.validate(cfg)?;
    check_seeds(seeds)?;
    let classic_cfg = cfg.clone().with_stopping(StoppingMode::Classic);
    let w_cfg = cfg.clone().with_stopping(StoppingMode::Wasserstein);

    let mut rows = Vec::new();
    let mut per_seed = Vec::new();
    for &seed in seeds {
        let instances = suite.instances(seed)?;
        let pairs: Vec<Result<ConvergencePair>> = with_workers(workers, || {
            instances
                .par_iter()
                .map(|trace| {
                    let set = trace.candidate_set(cfg)?;
                    let scores = trace.init_scores(&set)?;
                    let metric = ground_metric(&set)?;
                    let c = run_game(&scores, &set, &metric, &classic_cfg)?;
                    let w = run_game(&scores, &set, &metric, &w_cfg)?;
                    Ok(ConvergencePair {
                        instance_id: trace.instance_id.clone(),
                        seed,
                        classic: c.iterations_used,
                        wasserstein: w.iterations_used,
                        classic_termination: c.termination,
                        wasserstein_termination: w.termination,
                        classic_winner: c.winner_text,
                        wasserstein_winner: w.winner_text,
                    })
                })
                .collect()
        })?;
        let pairs = pairs.into_iter().collect::<Result<Vec<_>>>()?;
        let n = pairs.len() as f64;
        per_seed.push((
            pairs.iter().map(|p| p.classic as f64).sum::<f64>() / n,
            pairs.iter().map(|p| p.wasserstein as f64).sum::<f64>() / n,
        ));
        rows.extend(pairs);
    }

    let total = rows.len();
    let converged = rows
        .iter()
        .filter(|p| p.converged_both(cfg.max_iterations))
        .count();
    if (converged as f64) < REQUIRED_CONVERGENCE * total as f64 {
        return Err(Error::InsufficientConvergence {
            converged,
            total,
            required: 100.0 * REQUIRED_CONVERGENCE,
        });
    }

    let n = total as f64;
    let sum_c: f64 = rows.iter().map(|p| p.classic as f64).sum();
    let sum_w: f64 = rows.iter().map(|p| p.wasserstein as f64).sum();
    let reduction_percent = if sum_c > 0.0 {
        100.0 * (sum_c - sum_w) / sum_c
    } else {
        0.0
    };
    let ratios: Vec<f64> = rows
        .iter()
        .filter(|p| p.classic > 0)
        .map(|p| 100.0 * (p.classic as f64 - p.wasserstein as f64) / p.classic as f64)
        .collect();
    let mean_pair_ratio_percent = MeanStd::of(&ratios).map_or(0.0, |m| m.mean);
    let agree = rows
        .iter()
        .filter(|p| p.classic_winner == p.wasserstein_winner)
        .count();
    let diffs: Vec<f64> = rows
        .iter()
        .map(|p| p.classic as f64 - p.wasserstein as f64)
        .collect();
    let classic_means: Vec<f64> = per_seed.iter().map(|s| s.0).collect();
    let w_means: Vec<f64> = per_seed.iter().map(|s| s.1).collect();

    Ok(ConvergenceReport {
        schema: CONVERGENCE_SCHEMA.to_string(),
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        pairs: total,
        converged_both: converged,
        convergence_rate: converged as f64 / n,
        classic: MeanStd::of(&classic_means).expect("at least one seed"),
        wasserstein: MeanStd::of(&w_means).expect("at least one seed"),
        reduction_percent,
        mean_pair_ratio_percent,
        winner_agreement: agree as f64 / n,
        wilcoxon: wilcoxon_signed_rank(&diffs),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::SyntheticSpec;

    fn spec() -> SyntheticSpec {
        SyntheticSpec {
            n_clusters: 2,
            cluster_sizes: vec![2, 2],
            intra_cluster_distance: 0.05,
            inter_cluster_distance: 0.9,
            generator_noise: 0.3,
            verifier_noise: 1.0,
            correct_cluster: 0,
            seed: 5,
            generator_margin: 10.0,
            verifier_margin: 3.0,
            instances: 10,
            temperatures: vec![0.5, 1.0],
        }
    }

    #[test]
    fn single_iteration_cap_converges_nothing() {
        let cfg = GameConfig {
            max_iterations: 1,
            ..GameConfig::default()
        };
        match compare_convergence(&Suite::Synthetic(spec()), &cfg, &[1, 2], 1) {
            Err(Error::InsufficientConvergence {
                converged, total, ..
            }) => {
                assert_eq!((converged, total), (0, 20));
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn report_is_consistent() {
        let r = compare_convergence(
            &Suite::Synthetic(spec()),
            &GameConfig::default(),
            &[1, 2],
            2,
        )
        .unwrap();
        assert_eq!(r.pairs, 20);
        let mean_c = r.rows.iter().map(|p| p.classic as f64).sum::<f64>() / 20.0;
        assert!((r.classic.mean - mean_c).abs() < 1e-12);
        assert!(r.rows.iter().all(|p| p.classic >= 1 && p.wasserstein >= 1));
    }
}
