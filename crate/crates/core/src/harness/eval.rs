use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::metrics::{exact_match, rescale_similarity, semantic_similarity, token_f1};
use super::stats::MeanStd;
use super::{check_seeds, decide, with_workers, DecisionRule, Suite};
use crate::config::GameConfig;
use crate::error::{Error, Result};
use crate::game::Termination;

pub const REPORT_SCHEMA: &str = "bdg-report/1";

/// One (instance, rule, seed) outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub instance_id: String,
    pub rule: DecisionRule,
    pub seed: u64,
    pub answer: String,
    pub em: f64,
    pub f1: f64,
    /// Raw cosine; absent when the instance has no gold embedding.
    pub semsim: Option<f64>,
    pub iterations: Option<usize>,
    pub termination: Option<Termination>,
    /// Reserved for externally supplied judge labels.
    pub judge: Option<f64>,
}

/// Per-rule means over instances, then mean ± std over seeds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RuleAggregate {
    pub rule: DecisionRule,
    pub exact_match: MeanStd,
    pub token_f1: MeanStd,
    /// Rescaled to `[0, 1]`.
    pub semantic_similarity: Option<MeanStd>,
    pub iterations: Option<MeanStd>,
    pub judge_accuracy: Option<MeanStd>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema: String,
    pub config: GameConfig,
    pub seeds: Vec<u64>,
    pub rules: Vec<DecisionRule>,
    pub aggregates: Vec<RuleAggregate>,
    pub rows: Vec<EvalRow>,
}

fn io_error(path: &Path, e: impl ToString) -> Error {
    Error::Io {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

impl EvalReport {
    /// Recomputes every aggregate from `rows`.
    pub fn aggregate(
        rules: &[DecisionRule],
        seeds: &[u64],
        rows: &[EvalRow],
    ) -> Vec<RuleAggregate> {
        rules
            .iter()
            .map(|&rule| {
                let mut em = Vec::new();
                let mut f1 = Vec::new();
                let mut sim = Vec::new();
                let mut iters = Vec::new();
                let mut judge = Vec::new();
                for &seed in seeds {
                    let sel: Vec<&EvalRow> = rows
                        .iter()
                        .filter(|r| r.rule == rule && r.seed == seed)
                        .collect();
                    if sel.is_empty() {
                        continue;
                    }
                    let mean = |xs: Vec<f64>| -> Option<f64> {
                        (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
                    };
                    em.extend(mean(sel.iter().map(|r| r.em).collect()));
                    f1.extend(mean(sel.iter().map(|r| r.f1).collect()));
                    sim.extend(mean(
                        sel.iter()
                            .filter_map(|r| r.semsim.map(rescale_similarity))
                            .collect(),
                    ));
                    iters.extend(mean(
                        sel.iter()
                            .filter_map(|r| r.iterations.map(|i| i as f64))
                            .collect(),
                    ));
                    judge.extend(mean(sel.iter().filter_map(|r| r.judge).collect()));
                }
                let zero = MeanStd {
                    mean: 0.0,
                    std: 0.0,
                };
                RuleAggregate {
                    rule,
                    exact_match: MeanStd::of(&em).unwrap_or(zero),
                    token_f1: MeanStd::of(&f1).unwrap_or(zero),
                    semantic_similarity: MeanStd::of(&sim),
                    iterations: MeanStd::of(&iters),
                    judge_accuracy: MeanStd::of(&judge),
                }
            })
            .collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()).map_err(|e| io_error(path, e))
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let fmt_opt = |x: Option<String>| x.unwrap_or_default();
        w.write_record([
            "instance_id",
            "rule",
            "seed",
            "answer",
            "em",
            "f1",
            "semsim",
            "iterations",
            "termination",
        ])
        .map_err(|e| Error::Parse(e.to_string()))?;
        for r in &self.rows {
            w.write_record([
                r.instance_id.clone(),
                r.rule.to_string(),
                r.seed.to_string(),
                r.answer.clone(),
                r.em.to_string(),
                r.f1.to_string(),
                fmt_opt(r.semsim.map(|s| s.to_string())),
                fmt_opt(r.iterations.map(|i| i.to_string())),
                fmt_opt(r.termination.map(|t| t.as_str().to_string())),
            ])
            .map_err(|e| Error::Parse(e.to_string()))?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Parse(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_csv()?).map_err(|e| io_error(path, e))
    }

    /// Plain-text table of the aggregates.
    pub fn summary_table(&self) -> String {
        let fmt = |m: Option<MeanStd>| {
            m.map_or_else(
                || "-".to_string(),
                |m| format!("{:.4} ± {:.4}", m.mean, m.std),
            )
        };
        let mut out = format!(
            "{:<12} {:>17} {:>17} {:>17} {:>17}\n",
            "rule", "exact_match", "token_f1", "semsim", "iterations"
        );
        for a in &self.aggregates {
            out.push_str(&format!(
                "{:<12} {:>17} {:>17} {:>17} {:>17}\n",
                a.rule.as_str(),
                fmt(Some(a.exact_match)),
                fmt(Some(a.token_f1)),
                fmt(a.semantic_similarity),
                fmt(a.iterations)
            ));
        }
        out
    }
}

/// Runs every rule on every instance for every seed.
///
/// Instances are evaluated on `workers` threads (0 = all logical CPUs); rows are
/// merged by seed, then instance index, then rule, never by completion order.
pub fn run_eval(
    suite: &Suite,
    rules: &[DecisionRule],
    cfg: &GameConfig,
    seeds: &[u64],
    workers: usize,
) -> Result<EvalReport> {
    cfg.validate()?;
    suite.validate(cfg)?;
    check_seeds(seeds)?;
    if rules.is_empty() {
        return Err(Error::InvalidConfig("no decision rules given".into()));
    }
    let mut rows = Vec::new();
    for &seed in seeds {
        let instances = suite.instances(seed)?;
        let per_instance: Vec<Result<Vec<EvalRow>>> = with_workers(workers, || {
            instances
                .par_iter()
                .map(|trace| {
                    let gold = trace.gold_embedding();
                    rules
                        .iter()
                        .map(|&rule| {
                            let d = decide(rule, trace, cfg)?;
                            let semsim = gold
                                .map(|g| semantic_similarity(&d.embedding, g))
                                .transpose()?;
                            Ok(EvalRow {
                                instance_id: trace.instance_id.clone(),
                                rule,
                                seed,
                                em: exact_match(&d.answer, &trace.gold_answer),
                                f1: token_f1(&d.answer, &trace.gold_answer),
                                answer: d.answer,
                                semsim,
                                iterations: d.iterations,
                                termination: d.termination,
                                judge: None,
                            })
                        })
                        .collect()
                })
                .collect()
        })?;
        for r in per_instance {
            rows.extend(r?);
        }
    }
    Ok(EvalReport {
        schema: REPORT_SCHEMA.to_string(),
        config: cfg.clone(),
        seeds: seeds.to_vec(),
        rules: rules.to_vec(),
        aggregates: EvalReport::aggregate(rules, seeds, &rows),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::SyntheticSpec;

    fn spec(noise: f64) -> SyntheticSpec {
        SyntheticSpec {
            n_clusters: 2,
            cluster_sizes: vec![2, 2],
            intra_cluster_distance: 0.05,
            inter_cluster_distance: 0.9,
            generator_noise: noise,
            verifier_noise: noise,
            correct_cluster: 0,
            seed: 11,
            generator_margin: 2.0,
            verifier_margin: 2.0,
            instances: 6,
            temperatures: vec![0.5, 1.0],
        }
    }

    #[test]
    fn noise_free_suite_has_zero_spread() {
        let report = run_eval(
            &Suite::Synthetic(spec(0.0)),
            &DecisionRule::ALL,
            &GameConfig::default(),
            &[1, 2, 3, 4, 5],
            2,
        )
        .unwrap();
        assert_eq!(report.aggregates.len(), 5);
        for a in &report.aggregates {
            assert_eq!(a.exact_match.std, 0.0, "{}", a.rule);
            assert_eq!(a.token_f1.std, 0.0);
            assert_eq!(a.semantic_similarity.unwrap().std, 0.0);
            if let Some(it) = a.iterations {
                assert_eq!(it.std, 0.0);
            }
        }
    }

    #[test]
    fn aggregates_match_rows() {
        let seeds = [4, 9];
        let report = run_eval(
            &Suite::Synthetic(spec(0.8)),
            &DecisionRule::ALL,
            &GameConfig::default(),
            &seeds,
            1,
        )
        .unwrap();
        assert_eq!(report.rows.len(), 2 * 6 * 5);
        for a in &report.aggregates {
            let per_seed: Vec<f64> = seeds
                .iter()
                .map(|s| {
                    let v: Vec<f64> = report
                        .rows
                        .iter()
                        .filter(|r| r.rule == a.rule && r.seed == *s)
                        .map(|r| r.f1)
                        .collect();
                    v.iter().sum::<f64>() / v.len() as f64
                })
                .collect();
            let mean = (per_seed[0] + per_seed[1]) / 2.0;
            let std = (per_seed[0] - per_seed[1]).abs() / 2f64.sqrt();
            assert!((a.token_f1.mean - mean).abs() < 1e-12);
            assert!((a.token_f1.std - std).abs() < 1e-12);
            for row in report.rows.iter().filter(|r| r.rule == a.rule) {
                assert!((0.0..=1.0).contains(&row.em));
                assert!((-1.0..=1.0).contains(&row.semsim.unwrap()));
                assert_eq!(row.iterations.is_some(), a.rule.stopping_mode().is_some());
            }
        }
    }

    #[test]
    fn worker_count_does_not_change_output() {
        let run = |w| {
            run_eval(
                &Suite::Synthetic(spec(0.5)),
                &DecisionRule::ALL,
                &GameConfig::default(),
                &[1, 2],
                w,
            )
            .unwrap()
            .to_json()
        };
        assert_eq!(run(1), run(3));
    }

    #[test]
    fn csv_has_header_and_rows() {
        let report = run_eval(
            &Suite::Synthetic(spec(0.0)),
            &[DecisionRule::Greedy, DecisionRule::BdgWasserstein],
            &GameConfig::default(),
            &[1],
            1,
        )
        .unwrap();
        let csv = report.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(
            lines.next().unwrap(),
            "instance_id,rule,seed,answer,em,f1,semsim,iterations,termination"
        );
        assert_eq!(lines.count(), 12);
    }

    #[test]
    fn oversized_spec_rejected() {
        let big = SyntheticSpec {
            cluster_sizes: vec![5, 5],
            ..spec(0.0)
        };
        assert!(matches!(
            run_eval(
                &Suite::Synthetic(big),
                &[DecisionRule::Greedy],
                &GameConfig::default(),
                &[1],
                1
            ),
            Err(Error::InvalidConfig(_))
        ));
    }
}
