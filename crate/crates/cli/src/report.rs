//! Aggregation of metrics CSVs into mean ± sd tables.

use std::collections::BTreeMap;
use std::path::Path;

use anyhow::Result;

use crate::harness::{read_metrics_csv, MetricsRow};

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let sd = if values.len() > 1 {
        (values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)).sqrt()
    } else {
        0.0
    };
    (mean, sd)
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_else(|| "na".into())
}

/// Aggregate rows into one line per (sampler, sigma), averaging over
/// replications.
pub fn aggregate(rows: &[MetricsRow]) -> String {
    let mut groups: BTreeMap<(String, String), Vec<&MetricsRow>> = BTreeMap::new();
    for r in rows {
        groups
            .entry((r.sampler.clone(), format!("{:012.6}", r.sigma)))
            .or_default()
            .push(r);
    }
    let mut out = String::new();
    out.push_str("# mean +/- sd over replications per (sampler, sigma)\n");
    out.push_str("# snr_db = 20*log10(signal_range/sigma) with signal_range = 1 after intensity normalization\n");
    out.push_str(
        "sampler,sigma,snr_db,n,j_mse_mean,j_mse_sd,root_j_mse_mean,c_mse_mean,c_mse_sd,root_c_mse_mean\n",
    );
    for ((sampler, _), group) in &groups {
        let sigma = group[0].sigma;
        let snr_db = if sigma > 0.0 {
            format!("{:.4}", 20.0 * (1.0 / sigma).log10())
        } else {
            "inf".into()
        };
        let j: Vec<f64> = group.iter().filter_map(|r| r.j_mse).collect();
        let c: Vec<f64> = group.iter().filter_map(|r| r.c_mse).collect();
        let (jm, js) = if j.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_sd(&j)
        };
        let (cm, cs) = if c.is_empty() {
            (f64::NAN, f64::NAN)
        } else {
            mean_sd(&c)
        };
        out.push_str(&format!(
            "{sampler},{sigma},{snr_db},{},{},{},{},{},{},{}\n",
            group.len(),
            fmt_opt(j.first().map(|_| jm)),
            fmt_opt(j.first().map(|_| js)),
            fmt_opt(j.first().map(|_| jm.sqrt())),
            fmt_opt(c.first().map(|_| cm)),
            fmt_opt(c.first().map(|_| cs)),
            fmt_opt(c.first().map(|_| cm.sqrt())),
        ));
    }
    out
}

pub fn report_from_file(metrics: &Path) -> Result<String> {
    let rows = read_metrics_csv(metrics)?;
    Ok(aggregate(&rows))
}
