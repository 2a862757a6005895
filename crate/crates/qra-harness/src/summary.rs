//! Aggregation: per-(experiment, nc) summary rows and pairwise comparisons
//! with Wilcoxon signed-rank and paired t tests on shared (seed, trial) runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use qra::stats::{paired_t_test, wilcoxon_signed_rank, PairedSample};

use crate::experiment::RunResult;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SummaryRow {
    pub exp_id: String,
    pub nc: usize,
    pub n_runs: usize,
    pub mean_mse1: f64,
    pub std_mse1: f64,
    pub mean_loss: f64,
    pub std_loss: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ComparisonRow {
    pub exp_a: String,
    pub exp_b: String,
    pub nc: usize,
    pub n_pairs: usize,
    /// mean MSE of a over mean MSE of b.
    pub mean_ratio: f64,
    pub wilcoxon_w: Option<f64>,
    pub p_wilcoxon: Option<f64>,
    pub t_abs: Option<f64>,
    pub p_t: Option<f64>,
    /// Set when a test could not run (degenerate differences, too few pairs).
    pub note: String,
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// One row per (exp, nc) plus one row per requested comparison at every nc
/// shared by both experiments.
pub fn summarize(
    results: &[RunResult],
    comparisons: &[(String, String)],
) -> (Vec<SummaryRow>, Vec<ComparisonRow>) {
    let mut grouped: BTreeMap<(String, usize), Vec<&RunResult>> = BTreeMap::new();
    for r in results {
        grouped
            .entry((r.exp_id.clone(), r.nc))
            .or_default()
            .push(r);
    }

    let summary: Vec<SummaryRow> = grouped
        .iter()
        .map(|((exp_id, nc), rows)| {
            let mses: Vec<f64> = rows.iter().map(|r| r.mse_path1).collect();
            let losses: Vec<f64> = rows.iter().map(|r| r.final_loss).collect();
            let (mean_mse1, std_mse1) = mean_std(&mses);
            let (mean_loss, std_loss) = mean_std(&losses);
            SummaryRow {
                exp_id: exp_id.clone(),
                nc: *nc,
                n_runs: rows.len(),
                mean_mse1,
                std_mse1,
                mean_loss,
                std_loss,
            }
        })
        .collect();

    let mut comparison_rows = Vec::new();
    for (exp_a, exp_b) in comparisons {
        let ncs: Vec<usize> = grouped
            .keys()
            .filter(|(e, _)| e == exp_a)
            .map(|(_, nc)| *nc)
            .filter(|nc| grouped.contains_key(&(exp_b.clone(), *nc)))
            .collect();
        for nc in ncs {
            comparison_rows.push(compare_at(
                &grouped[&(exp_a.clone(), nc)],
                &grouped[&(exp_b.clone(), nc)],
                exp_a,
                exp_b,
                nc,
            ));
        }
    }
    (summary, comparison_rows)
}

fn compare_at(
    rows_a: &[&RunResult],
    rows_b: &[&RunResult],
    exp_a: &str,
    exp_b: &str,
    nc: usize,
) -> ComparisonRow {
    // pair on shared (seed, trial)
    let index_b: BTreeMap<(u64, u32), f64> = rows_b
        .iter()
        .map(|r| ((r.seed, r.trial), r.mse_path1))
        .collect();
    let mut a_vals = Vec::new();
    let mut b_vals = Vec::new();
    for r in rows_a {
        if let Some(&bv) = index_b.get(&(r.seed, r.trial)) {
            a_vals.push(r.mse_path1);
            b_vals.push(bv);
        }
    }
    let n_pairs = a_vals.len();
    let mean_a = a_vals.iter().sum::<f64>() / n_pairs.max(1) as f64;
    let mean_b = b_vals.iter().sum::<f64>() / n_pairs.max(1) as f64;
    let mean_ratio = if mean_b != 0.0 { mean_a / mean_b } else { f64::NAN };

    let mut row = ComparisonRow {
        exp_a: exp_a.to_string(),
        exp_b: exp_b.to_string(),
        nc,
        n_pairs,
        mean_ratio,
        wilcoxon_w: None,
        p_wilcoxon: None,
        t_abs: None,
        p_t: None,
        note: String::new(),
    };
    match PairedSample::new(a_vals, b_vals) {
        Ok(sample) => {
            match wilcoxon_signed_rank(&sample) {
                Ok((w, p)) => {
                    row.wilcoxon_w = Some(w);
                    row.p_wilcoxon = Some(p);
                }
                Err(e) => row.note = format!("wilcoxon: {e}"),
            }
            match paired_t_test(&sample) {
                Ok((t, p)) => {
                    row.t_abs = Some(t.abs());
                    row.p_t = Some(p);
                }
                Err(e) => {
                    if !row.note.is_empty() {
                        row.note.push_str("; ");
                    }
                    row.note.push_str(&format!("t-test: {e}"));
                }
            }
        }
        Err(e) => row.note = e.to_string(),
    }
    row
}

pub fn summary_to_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("exp_id,nc,n_runs,mean_mse1,std_mse1,mean_loss,std_loss\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.exp_id, r.nc, r.n_runs, r.mean_mse1, r.std_mse1, r.mean_loss, r.std_loss
        ));
    }
    out
}

pub fn comparisons_to_csv(rows: &[ComparisonRow]) -> String {
    let mut out =
        String::from("exp_a,exp_b,nc,n_pairs,mean_ratio,wilcoxon_w,p_wilcoxon,t_abs,p_t,note\n");
    let fmt_opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{}\n",
            r.exp_a,
            r.exp_b,
            r.nc,
            r.n_pairs,
            r.mean_ratio,
            fmt_opt(r.wilcoxon_w),
            fmt_opt(r.p_wilcoxon),
            fmt_opt(r.t_abs),
            fmt_opt(r.p_t),
            r.note.replace(',', ";")
        ));
    }
    out
}

pub fn write_summary(
    dir: &Path,
    summary: &[SummaryRow],
    comparisons: &[ComparisonRow],
) -> std::io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("summary.csv"), summary_to_csv(summary))?;
    if !comparisons.is_empty() {
        std::fs::write(dir.join("comparisons.csv"), comparisons_to_csv(comparisons))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn result(exp: &str, seed: u64, trial: u32, nc: usize, mse: f64) -> RunResult {
        RunResult {
            exp_id: exp.into(),
            seed,
            trial,
            nc,
            mse_path1: mse,
            mse_path2: mse,
            final_loss: mse,
            converged_at: Some(1),
            wall_time_ms: 0,
            rng_fingerprint: String::new(),
        }
    }

    #[test]
    fn single_run_has_zero_std() {
        let rows = vec![result("1", 0, 0, 5, 0.25)];
        let (summary, _) = summarize(&rows, &[]);
        assert_eq!(summary.len(), 1);
        assert_eq!(summary[0].n_runs, 1);
        assert_eq!(summary[0].mean_mse1, 0.25);
        assert_eq!(summary[0].std_mse1, 0.0);
    }

    #[test]
    fn comparison_pairs_on_seed_and_trial() {
        let mut rows = Vec::new();
        for seed in 0..2u64 {
            for trial in 0..3u32 {
                let base = 0.1 + seed as f64 * 0.01 + trial as f64 * 0.001;
                rows.push(result("2", seed, trial, 10, base * 10.0));
                rows.push(result("7", seed, trial, 10, base));
            }
        }
        let (_, cmp) = summarize(&rows, &[("7".into(), "2".into())]);
        assert_eq!(cmp.len(), 1);
        let c = &cmp[0];
        assert_eq!(c.n_pairs, 6);
        assert!((c.mean_ratio - 0.1).abs() < 1e-12);
        assert!(c.p_wilcoxon.unwrap() < 0.05);
        assert!(c.p_t.unwrap() < 0.05);
    }

    #[test]
    fn self_comparison_flagged_degenerate() {
        let rows: Vec<RunResult> = (0..6)
            .map(|i| result("2", i as u64, 0, 10, 0.1 + i as f64 * 0.01))
            .collect();
        let (_, cmp) = summarize(&rows, &[("2".into(), "2".into())]);
        assert_eq!(cmp.len(), 1);
        let c = &cmp[0];
        assert!((c.mean_ratio - 1.0).abs() < 1e-12);
        // identical samples: Wilcoxon degenerate, t-test degenerate
        assert!(c.p_wilcoxon.is_none());
        assert!(!c.note.is_empty());
    }

    #[test]
    fn too_few_pairs_noted() {
        let rows = vec![
            result("2", 0, 0, 10, 0.1),
            result("7", 0, 0, 10, 0.01),
        ];
        let (_, cmp) = summarize(&rows, &[("7".into(), "2".into())]);
        assert_eq!(cmp[0].n_pairs, 1);
        assert!(cmp[0].p_wilcoxon.is_none());
        assert!(!cmp[0].note.is_empty());
    }

    #[test]
    fn csv_serialization_shapes() {
        let rows = vec![result("1", 0, 0, 5, 0.5)];
        let (summary, cmp) = summarize(&rows, &[]);
        let text = summary_to_csv(&summary);
        assert!(text.starts_with("exp_id,nc,"));
        assert_eq!(text.lines().count(), 2);
        assert!(comparisons_to_csv(&cmp).starts_with("exp_a,"));
    }
}
