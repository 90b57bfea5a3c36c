//! Experiment execution: single runs and malicious-fraction sweeps.

use std::fmt::Write as _;
use std::path::Path;

use brafl_core::fedsim::{run_federated, RoundRecord};

use crate::config::ConfigModel;
use crate::heatmap::render_heatmap;
use crate::manifest::RunManifest;
use crate::metrics::render_metrics;
use crate::CliError;

/// Mean of the last `n` evaluated rounds (or all of them, if fewer).
pub fn window_mean(records: &[RoundRecord], n: usize, metric: impl Fn(&RoundRecord) -> f64) -> f64 {
    assert!(!records.is_empty(), "no evaluated rounds");
    let n = records.len().min(n).max(1);
    let tail = &records[records.len() - n..];
    tail.iter().map(&metric).sum::<f64>() / tail.len() as f64
}

/// The summary window follows the ablation protocol: metrics averaged
/// over the last 20 evaluated rounds.
pub const SUMMARY_WINDOW: usize = 20;

/// Executes one run and writes `metrics.csv` (plus `heatmap.svg` for the
/// Bayesian aggregator) and `manifest.txt` under the output directory.
pub fn run_experiment(
    model: &ConfigModel,
    config_path: &str,
    output_dir: &Path,
) -> Result<(RunManifest, Vec<RoundRecord>), CliError> {
    let config = model.build()?;
    let records = run_federated(&config)?;

    let mut manifest = RunManifest::new(config_path, output_dir);
    manifest.emit("metrics.csv", &render_metrics(&records, model.clients))?;
    if model.is_bra() {
        manifest.emit("heatmap.svg", &render_heatmap(&records, model.clients))?;
    }
    manifest.write()?;
    Ok((manifest, records))
}

/// Runs the template once per malicious fraction and writes a summary
/// table of final-window metrics, one row per fraction. Per-fraction
/// artifacts land in `eps_<fraction>/` subdirectories.
pub fn sweep(
    model: &ConfigModel,
    config_path: &str,
    epsilons: &[f64],
    output_dir: &Path,
) -> Result<RunManifest, CliError> {
    if epsilons.is_empty() {
        return Err(CliError::Config("sweep needs at least one epsilon".into()));
    }
    for &eps in epsilons {
        if !(0.0..0.5).contains(&eps) {
            return Err(CliError::Config(format!(
                "sweep epsilon {eps} outside [0, 0.5)"
            )));
        }
        if eps > 0.0 && model.attack.is_none() {
            return Err(CliError::Config(
                "sweep with a non-zero epsilon needs an attack in the template".into(),
            ));
        }
    }

    let with_asr = model.is_backdoor();
    let mut manifest = RunManifest::new(config_path, output_dir);
    let mut summary = String::from(if with_asr { "epsilon,acc,asr\n" } else { "epsilon,acc\n" });

    for &eps in epsilons {
        let variant = model.with_fraction(eps);
        let config = variant.build()?;
        let records = run_federated(&config)?;

        let tag = format!("eps_{eps:.2}");
        manifest.emit(
            &format!("{tag}/metrics.csv"),
            &render_metrics(&records, variant.clients),
        )?;
        if variant.is_bra() {
            manifest.emit(
                &format!("{tag}/heatmap.svg"),
                &render_heatmap(&records, variant.clients),
            )?;
        }

        let acc = window_mean(&records, SUMMARY_WINDOW, |r| r.acc);
        let _ = write!(summary, "{eps},{acc:.6}");
        if with_asr {
            summary.push(',');
            // The success rate is undefined without an attacker.
            if eps > 0.0 {
                let asr = window_mean(&records, SUMMARY_WINDOW, |r| r.asr.unwrap_or(0.0));
                let _ = write!(summary, "{asr:.6}");
            }
        }
        summary.push('\n');
    }

    manifest.emit("summary.csv", &summary)?;
    manifest.write()?;
    Ok(manifest)
}
