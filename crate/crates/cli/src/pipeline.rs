//! The stages shared by the command-line tool and the acceptance suite.

use std::path::{Path, PathBuf};

use log::info;
use serde::{Deserialize, Serialize};
use sgnlab_core::net::{NetSpec, Params};
use sgnlab_core::noise::{encode_binary, write_csv, GradientBank};

use crate::campaign::{run_campaign, LangevinReport};
use crate::config::ExperimentConfig;
use crate::dataset::{load_dataset, Dataset};
use crate::error::{CliError, Result};
use crate::report::{self, ReportWriter};
use crate::svg::{histogram_plot, line_plot, Series};
use crate::sweep::{bound_sweep, build_bank, gaussianity_sweep, probe_config, tail_index_sweep, BoundReport, GaussianityReport, TailReport};
use crate::train::{train, Checkpoint, CheckpointFile, TrainOutcome};

/// Dataset plus the checkpoints to analyze.
pub struct Prepared {
    pub data: Dataset,
    pub checkpoints: Vec<Checkpoint>,
    pub training: Option<TrainSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainSummary {
    pub epoch_losses: Vec<f64>,
    pub final_accuracy: f64,
    pub checkpoint_epochs: Vec<usize>,
}

impl From<&TrainOutcome> for TrainSummary {
    fn from(o: &TrainOutcome) -> Self {
        TrainSummary {
            epoch_losses: o.epoch_losses.clone(),
            final_accuracy: o.final_accuracy,
            checkpoint_epochs: o.checkpoints.iter().map(|c| c.epoch).collect(),
        }
    }
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Dataset> {
    let data = load_dataset(&cfg.dataset, cfg.net.output_dim())?;
    if data.input_dim != cfg.net.input_dim() {
        return Err(CliError::Config(format!(
            "dataset has {} features but the net expects {}",
            data.input_dim,
            cfg.net.input_dim()
        )));
    }
    Ok(data)
}

/// Trains to the configured checkpoints, or loads a single checkpoint file.
pub fn prepare(cfg: &ExperimentConfig, checkpoint: Option<&Path>) -> Result<Prepared> {
    let data = load_data(cfg)?;
    if let Some(path) = checkpoint {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let file: CheckpointFile =
            serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let (spec, ckpt) = file.into_checkpoint()?;
        if spec != cfg.net {
            return Err(CliError::Config("checkpoint was saved for a different net".into()));
        }
        return Ok(Prepared { data, checkpoints: vec![ckpt], training: None });
    }
    info!("training {} epochs on {} samples", cfg.train.epochs, data.samples.len());
    let outcome = train(&cfg.net, &cfg.train, &data.samples, &cfg.probe.checkpoint_epochs)?;
    let training = Some(TrainSummary::from(&outcome));
    let checkpoints = cfg
        .probe
        .checkpoint_epochs
        .iter()
        .filter_map(|&e| outcome.checkpoint(e).cloned())
        .collect();
    Ok(Prepared { data, checkpoints, training })
}

pub fn bank_for(cfg: &ExperimentConfig, data: &Dataset, params: &Params) -> Result<GradientBank> {
    build_bank(&cfg.net, params, &data.samples, &cfg.probe)
}

pub fn gaussianity(cfg: &ExperimentConfig, bank: &GradientBank, ckpt: &Checkpoint) -> Result<GaussianityReport> {
    info!("gaussianity sweep at epoch {}", ckpt.epoch);
    gaussianity_sweep(bank, &cfg.probe, &cfg.stats, ckpt.epoch, &ckpt.params.fingerprint())
}

pub fn bounds(cfg: &ExperimentConfig, bank: &GradientBank, g: &GaussianityReport) -> Result<BoundReport> {
    bound_sweep(bank, &cfg.stats, g)
}

pub fn tails(cfg: &ExperimentConfig, bank: &GradientBank, ckpt: &Checkpoint) -> Result<TailReport> {
    tail_index_sweep(bank, &cfg.probe, ckpt.epoch)
}

pub fn langevin(cfg: &ExperimentConfig, out: Option<&ReportWriter>) -> Result<LangevinReport> {
    info!("langevin campaign: {} steps", cfg.langevin.steps);
    match out {
        Some(w) if cfg.langevin.trajectory_stride > 0 => {
            let path = w.path("trajectory", "csv");
            let file = std::fs::File::create(&path).map_err(|e| CliError::io(&path, e))?;
            let mut buf = std::io::BufWriter::new(file);
            let report = run_campaign(&cfg.langevin, Some(&mut buf))?;
            std::io::Write::flush(&mut buf).map_err(|e| CliError::io(&path, e))?;
            Ok(report)
        }
        _ => run_campaign(&cfg.langevin, None),
    }
}

/// Which analyses a run performs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Stages {
    pub probe: bool,
    pub gaussianity: bool,
    pub bounds: bool,
    pub tails: bool,
    pub langevin: bool,
}

impl Stages {
    pub fn all() -> Self {
        Stages { probe: true, gaussianity: true, bounds: true, tails: true, langevin: true }
    }

    fn needs_network(&self) -> bool {
        self.probe || self.gaussianity || self.bounds || self.tails
    }
}

/// Runs the requested stages and writes every artifact under `writer`.
/// Returns the paths written, in order.
pub fn run(cfg: &ExperimentConfig, stages: Stages, checkpoint: Option<&Path>, writer: &ReportWriter) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    if stages.needs_network() {
        let prep = prepare(cfg, checkpoint)?;
        if let Some(t) = &prep.training {
            written.push(writer.write_json("train", t)?);
        }
        for ckpt in &prep.checkpoints {
            let bank = bank_for(cfg, &prep.data, &ckpt.params)?;
            let tag = |kind: &str| format!("{kind}-e{}", ckpt.epoch);
            if stages.probe {
                for &b in &cfg.probe.batch_sizes {
                    let set = bank.sample_noise(&probe_config(&cfg.probe, b))?;
                    let name = format!("{}-b{b}", tag("noise"));
                    written.push(writer.write_bytes(&name, "sgnl", &encode_binary(&set))?);
                    let mut csv = Vec::new();
                    write_csv(&set, &mut csv).map_err(|e| CliError::io(writer.path(&name, "csv"), e))?;
                    written.push(writer.write_bytes(&name, "csv", &csv)?);
                }
            }
            if stages.gaussianity || stages.bounds {
                let g = gaussianity(cfg, &bank, ckpt)?;
                written.push(writer.write_json(&tag("gaussianity"), &g)?);
                written.push(writer.write_text(&tag("gaussianity"), "csv", &report::gaussianity_csv(&g)?)?);
                written.push(writer.write_text(&tag("gaussianity"), "svg", &gaussianity_svg(&g))?);
                if stages.bounds {
                    let b = bounds(cfg, &bank, &g)?;
                    written.push(writer.write_json(&tag("bounds"), &b)?);
                    written.push(writer.write_text(&tag("bounds"), "csv", &report::bounds_csv(&b)?)?);
                    for l in &b.layers {
                        let name = format!("{}-layer{}", tag("beta"), l.layer);
                        written.push(writer.write_text(&name, "svg", &beta_svg(l))?);
                    }
                }
            }
            if stages.tails {
                let t = tails(cfg, &bank, ckpt)?;
                written.push(writer.write_json(&tag("tailindex"), &t)?);
                written.push(writer.write_text(&tag("tailindex"), "csv", &report::tail_csv(&t)?)?);
            }
        }
    }
    if stages.langevin {
        let l = langevin(cfg, Some(writer))?;
        written.push(writer.write_json("langevin", &l)?);
        written.push(writer.write_text("langevin", "csv", &report::marginals_csv(&l)?)?);
        if cfg.langevin.trajectory_stride > 0 {
            written.push(writer.path("trajectory", "csv"));
        }
    }
    Ok(written)
}

/// Trains and saves every configured checkpoint as JSON.
pub fn train_and_save(cfg: &ExperimentConfig, writer: &ReportWriter) -> Result<Vec<PathBuf>> {
    let data = load_data(cfg)?;
    let outcome = train(&cfg.net, &cfg.train, &data.samples, &cfg.probe.checkpoint_epochs)?;
    let mut written = vec![writer.write_json("train", &TrainSummary::from(&outcome))?];
    for c in &outcome.checkpoints {
        written.push(save_checkpoint(writer, &cfg.net, c)?);
    }
    Ok(written)
}

pub fn save_checkpoint(writer: &ReportWriter, spec: &NetSpec, c: &Checkpoint) -> Result<PathBuf> {
    let text = report::canonical_json(&CheckpointFile::new(spec, c))?;
    writer.write_text(&format!("checkpoint-e{}", c.epoch), "json", &text)
}

pub fn gaussianity_svg(g: &GaussianityReport) -> String {
    let series: Vec<Series> = g
        .layers()
        .into_iter()
        .map(|layer| Series {
            label: format!("layer {layer}"),
            points: g.rows.iter().filter(|r| r.layer == layer).map(|r| (r.batch_size as f64, r.percentage)).collect(),
        })
        .collect();
    line_plot(
        &format!("Gaussian coordinates, epoch {}", g.checkpoint_epoch),
        "batch size",
        "% Gaussian",
        &series,
        Some((0.0, 100.0)),
        true,
    )
}

pub fn beta_svg(l: &crate::sweep::LayerBounds) -> String {
    let markers: Vec<(f64, String)> = l
        .spines
        .iter()
        .filter_map(|s| s.beta_ratio.map(|b| (b, format!("b={} ({:.0}%)", s.batch_size, s.gaussian_percentage))))
        .collect();
    histogram_plot(&format!("β/σ³ of per-sample noise, layer {}", l.layer), "β/σ³", &l.beta_ratio.histogram, &markers)
}
