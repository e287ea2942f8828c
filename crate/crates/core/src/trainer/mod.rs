//! Training loop, evaluation and the top-5 reporting protocol.
//!
//! Each repeat trains a freshly seeded model with Adam on the summed
//! per-snapshot cross-entropy of the training snapshots. From the warm-up
//! epoch on, every epoch is evaluated on the validation and test snapshots;
//! a repeat reports the mean test metrics of its five best epochs by
//! validation F1, and the run reports the mean over repeats.

mod checkpoint;
mod metrics;
mod report;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{read_checkpoint, write_checkpoint, CheckpointManifest, ParamEntry, CHECKPOINT_MANIFEST, CHECKPOINT_PARAMS};
pub use metrics::{evaluate, mean_metrics, Confusion, Metrics};
pub use report::{epochs_csv, format_table};

use crate::autodiff::{adam_step, AdamConfig, AdamState, Matrix, Tape};
use crate::data::{build_features, SnapshotSeries};
use crate::graphlet::MotifSeries;
use crate::group::row_stochastic_deviation;
use crate::model::{anomaly_scores, Ablation, Dropout, Model, ModelConfig, ModelInputs, ModelKind};
use crate::{sha256_hex, Error, Result};

/// Number of epochs averaged per repeat.
pub const TOP_K: usize = 5;

/// Hyperparameters and protocol settings for one experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelKind,
    pub lr: f64,
    pub weight_decay: f64,
    pub emb_dim: usize,
    pub gcn_layers: usize,
    pub dropout: f64,
    pub warmup_epochs: usize,
    pub total_epochs: usize,
    pub repeats: usize,
    pub beta: f64,
    pub groups: usize,
    pub feature_dim: usize,
    pub seed: u64,
    pub no_motif: bool,
    pub no_sign: bool,
    pub no_global: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            model: ModelKind::MgsTgcn,
            lr: 0.005,
            weight_decay: 5e-5,
            emb_dim: 200,
            gcn_layers: 2,
            dropout: 0.2,
            warmup_epochs: 50,
            total_epochs: 200,
            repeats: 5,
            beta: 0.35,
            groups: 10,
            feature_dim: crate::data::RAW_FEATURES,
            seed: 0,
            no_motif: false,
            no_sign: false,
            no_global: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        if self.warmup_epochs >= self.total_epochs {
            return bad(format!(
                "warmup_epochs ({}) must be below total_epochs ({})",
                self.warmup_epochs, self.total_epochs
            ));
        }
        if self.repeats == 0 {
            return bad("repeats must be at least 1".into());
        }
        if self.gcn_layers != 2 {
            return bad(format!("only 2-layer aggregation is supported, got {}", self.gcn_layers));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) || !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad("lr must be positive and weight_decay non-negative".into());
        }
        if self.feature_dim < 2 {
            return bad(format!("feature_dim {} < 2", self.feature_dim));
        }
        self.model_config().validate()
    }

    pub fn ablation(&self) -> Ablation {
        Ablation {
            no_motif: self.no_motif,
            no_sign: self.no_sign,
            no_global: self.no_global,
        }
    }

    pub fn model_config(&self) -> ModelConfig {
        ablate(self)
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            weight_decay: self.weight_decay,
            ..AdamConfig::default()
        }
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        sha256_hex(serde_json::to_string(self).expect("plain data").as_bytes())
    }

    /// Short name used in tables.
    pub fn label(&self) -> String {
        match self.model {
            ModelKind::Gcn => "GCN".into(),
            ModelKind::MgsTgcn => match self.ablation().label().as_str() {
                "full" => "MGS-TGCN".into(),
                other => other.into(),
            },
        }
    }
}

/// Model variant selected by the configuration's ablation flags.
pub fn ablate(config: &RunConfig) -> ModelConfig {
    ModelConfig {
        kind: config.model,
        input_dim: config.feature_dim,
        emb_dim: config.emb_dim,
        groups: config.groups,
        beta: if config.no_motif { 0.0 } else { config.beta },
        dropout: config.dropout,
        ablation: config.ablation(),
    }
}

/// The full model followed by each single-component ablation.
pub fn ablation_suite(config: &RunConfig) -> Vec<RunConfig> {
    let base = RunConfig {
        model: ModelKind::MgsTgcn,
        no_motif: false,
        no_sign: false,
        no_global: false,
        ..config.clone()
    };
    vec![
        base.clone(),
        RunConfig {
            no_motif: true,
            ..base.clone()
        },
        RunConfig {
            no_sign: true,
            ..base.clone()
        },
        RunConfig { no_global: true, ..base },
    ]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean of the per-snapshot training losses.
    pub loss: f64,
    pub valid: Option<Metrics>,
    pub test: Option<Metrics>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedReport {
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epochs whose test metrics were averaged.
    pub top_epochs: Vec<usize>,
    pub valid: Metrics,
    pub test: Metrics,
    pub max_apm_row_deviation: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub label: String,
    pub config: RunConfig,
    pub config_hash: String,
    pub seeds: Vec<SeedReport>,
    /// Mean over repeats of each repeat's top-epoch test metrics.
    pub test: Metrics,
    pub valid: Metrics,
    /// Worst `|Σ_c APM[v, c] - 1|` seen in any forward pass (global path
    /// only).
    pub max_apm_row_deviation: Option<f64>,
}

/// Trained models of one repeat.
#[derive(Clone, Debug)]
pub struct RepeatModels {
    pub seed: u64,
    pub final_model: Model,
    /// Parameters after the epoch with the best validation F1.
    pub best_model: Model,
    pub best_epoch: usize,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub report: MetricsReport,
    pub models: Vec<RepeatModels>,
}

fn check_series(series: &SnapshotSeries) -> Result<()> {
    if series.len() < 3 {
        return Err(Error::InvalidArgument(format!("need at least 3 snapshots, got {}", series.len())));
    }
    let split = &series.split;
    if split.train.is_empty() || split.train.iter().all(|&t| series.snapshots[t].edges().is_empty()) {
        return Err(Error::InvalidArgument("training split has no edges".into()));
    }
    let eval_edges: usize = split.valid.iter().chain(&split.test).map(|&t| series.snapshots[t].edges().len()).sum();
    if split.valid.is_empty() || split.test.is_empty() || eval_edges == 0 {
        return Err(Error::InvalidArgument("validation and test splits need edges".into()));
    }
    if split.train.iter().chain(&split.valid).chain(&split.test).any(|&t| t >= series.len()) {
        return Err(Error::InvalidArgument("split references a missing snapshot".into()));
    }
    Ok(())
}

/// Constant model inputs for `config`. Motif counts are read only by
/// variants that use them.
pub fn prepare_inputs(config: &RunConfig, series: &SnapshotSeries, motifs: Option<&MotifSeries>) -> Result<ModelInputs> {
    let features = build_features(series, config.feature_dim)?;
    let motifs = if config.model_config().uses_motifs() {
        Some(motifs.ok_or_else(|| Error::InvalidArgument("this model needs motif counts".into()))?)
    } else {
        None
    };
    ModelInputs::new(series, &features, motifs)
}

/// Trains `config.repeats` models with seeds `seed, seed + 1, ...`.
pub fn train(config: &RunConfig, series: &SnapshotSeries, motifs: Option<&MotifSeries>) -> Result<TrainOutcome> {
    config.validate()?;
    check_series(series)?;
    let inputs = prepare_inputs(config, series, motifs)?;
    let mut seeds = Vec::with_capacity(config.repeats);
    let mut models = Vec::with_capacity(config.repeats);
    for r in 0..config.repeats {
        let seed = config.seed.wrapping_add(r as u64);
        let (report, trained) = train_repeat(config, series, &inputs, seed)?;
        log::info!(
            "{} seed {seed}: test F1 {:.4} (epochs {:?})",
            config.label(),
            report.test.f1,
            report.top_epochs
        );
        seeds.push(report);
        models.push(trained);
    }
    let test = mean_metrics(&seeds.iter().map(|s| &s.test).collect::<Vec<_>>()).expect("repeats >= 1");
    let valid = mean_metrics(&seeds.iter().map(|s| &s.valid).collect::<Vec<_>>()).expect("repeats >= 1");
    let max_apm_row_deviation = seeds
        .iter()
        .filter_map(|s| s.max_apm_row_deviation)
        .reduce(f64::max);
    Ok(TrainOutcome {
        report: MetricsReport {
            label: config.label(),
            config: config.clone(),
            config_hash: config.hash(),
            seeds,
            test,
            valid,
            max_apm_row_deviation,
        },
        models,
    })
}

/// Static GCN baseline under the same protocol.
pub fn baseline_gcn(config: &RunConfig, series: &SnapshotSeries) -> Result<TrainOutcome> {
    let config = RunConfig {
        model: ModelKind::Gcn,
        ..config.clone()
    };
    train(&config, series, None)
}

/// Scores and labels of the given snapshots, concatenated in order.
pub fn predict(model: &Model, inputs: &ModelInputs, snapshots: &[usize]) -> Result<(Vec<f64>, Vec<usize>)> {
    let last = match snapshots.iter().max() {
        Some(&t) => t,
        None => return Ok((Vec::new(), Vec::new())),
    };
    let mut tape = Tape::new();
    let bound = model.params.record(&mut tape)?;
    let fwd = model.forward(&mut tape, &bound, inputs, last, &mut Dropout::off())?;
    collect_scores(&tape, &fwd.logits, inputs, snapshots)
}

/// Evaluates `model` on the given snapshots.
pub fn evaluate_model(model: &Model, inputs: &ModelInputs, snapshots: &[usize]) -> Result<Metrics> {
    let (scores, labels) = predict(model, inputs, snapshots)?;
    evaluate(&scores, &labels)
}

/// Final node embeddings of every snapshot (evaluation mode).
pub fn node_embeddings(model: &Model, inputs: &ModelInputs) -> Result<Vec<Matrix>> {
    let mut tape = Tape::new();
    let bound = model.params.record(&mut tape)?;
    let last = inputs.snapshots.len().checked_sub(1).ok_or_else(|| Error::InvalidArgument("no snapshots".into()))?;
    let fwd = model.forward(&mut tape, &bound, inputs, last, &mut Dropout::off())?;
    Ok(fwd.embeddings.iter().map(|&e| tape.value(e).clone()).collect())
}

fn collect_scores(
    tape: &Tape,
    logits: &[Option<crate::autodiff::Var>],
    inputs: &ModelInputs,
    snapshots: &[usize],
) -> Result<(Vec<f64>, Vec<usize>)> {
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for &t in snapshots {
        if let Some(l) = logits[t] {
            scores.extend(anomaly_scores(tape.value(l)));
            labels.extend_from_slice(&inputs.snapshots[t].labels);
        }
    }
    Ok((scores, labels))
}

fn train_repeat(
    config: &RunConfig,
    series: &SnapshotSeries,
    inputs: &ModelInputs,
    seed: u64,
) -> Result<(SeedReport, RepeatModels)> {
    let split = &series.split;
    let mut model = Model::new(config.model_config(), seed)?;
    let adam = config.adam();
    let mut state = AdamState::new(model.params.values());
    let alpha = model.params.index_of(crate::model::ALPHA);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
    let last_train = *split.train.iter().max().expect("checked");
    let last_eval = *split.valid.iter().chain(&split.test).max().expect("checked");
    let mut deviation: Option<f64> = None;
    let mut track = |tape: &Tape, assignments: &[crate::autodiff::Var]| {
        for &a in assignments {
            let d = row_stochastic_deviation(tape.value(a));
            deviation = Some(deviation.map_or(d, |m: f64| m.max(d)));
        }
    };

    let mut epochs = Vec::with_capacity(config.total_epochs);
    let mut best: Option<(f64, usize, Model)> = None;
    for epoch in 0..config.total_epochs {
        let mut tape = Tape::new();
        let bound = model.params.record(&mut tape)?;
        let fwd = model.forward(&mut tape, &bound, inputs, last_train, &mut Dropout::train(config.dropout, &mut rng))?;
        track(&tape, &fwd.assignments);
        let mut loss = None;
        let mut terms = 0usize;
        for &t in &split.train {
            if let Some(l) = fwd.logits[t] {
                let ce = tape.cross_entropy(l, &inputs.snapshots[t].labels)?;
                loss = Some(match loss {
                    Some(acc) => tape.add(acc, ce)?,
                    None => ce,
                });
                terms += 1;
            }
        }
        let loss = loss.expect("checked: training edges exist");
        let loss_value = tape.value(loss).get(0, 0) / terms as f64;
        let grads = tape.backward(loss)?;
        let grads = bound.gradients(&tape, &grads);
        drop(tape);
        adam_step(model.params.values_mut(), &grads, &mut state, &adam)?;
        if let Some(i) = alpha {
            // Keep motif weights non-negative so every normalized degree stays >= 1.
            for a in model.params.values_mut()[i].as_mut_slice() {
                *a = a.max(0.0);
            }
        }

        let mut record = EpochRecord {
            epoch,
            loss: loss_value,
            valid: None,
            test: None,
        };
        if epoch >= config.warmup_epochs {
            let mut tape = Tape::new();
            let bound = model.params.record(&mut tape)?;
            let fwd = model.forward(&mut tape, &bound, inputs, last_eval, &mut Dropout::off())?;
            track(&tape, &fwd.assignments);
            let (s, l) = collect_scores(&tape, &fwd.logits, inputs, &split.valid)?;
            let valid = evaluate(&s, &l)?;
            let (s, l) = collect_scores(&tape, &fwd.logits, inputs, &split.test)?;
            let test = evaluate(&s, &l)?;
            if best.as_ref().is_none_or(|(f1, _, _)| valid.f1 > *f1) {
                best = Some((valid.f1, epoch, model.clone()));
            }
            record.valid = Some(valid);
            record.test = Some(test);
        }
        log::debug!("seed {seed} epoch {epoch}: loss {loss_value:.5}");
        epochs.push(record);
    }

    let top = top_epochs(&epochs, TOP_K);
    let pick = |f: fn(&EpochRecord) -> &Option<Metrics>| {
        let items: Vec<&Metrics> = top.iter().map(|&e| f(&epochs[e]).as_ref().expect("evaluated")).collect();
        mean_metrics(&items).expect("window is non-empty")
    };
    let test = pick(|r| &r.test);
    let valid = pick(|r| &r.valid);
    let (_, best_epoch, best_model) = best.expect("window is non-empty");
    Ok((
        SeedReport {
            seed,
            epochs,
            top_epochs: top,
            valid,
            test,
            max_apm_row_deviation: deviation,
        },
        RepeatModels {
            seed,
            final_model: model,
            best_model,
            best_epoch,
        },
    ))
}

/// Indices of the `k` evaluated epochs with the highest validation F1;
/// ties go to the earlier epoch. Returned in epoch order.
pub fn top_epochs(epochs: &[EpochRecord], k: usize) -> Vec<usize> {
    let mut scored: Vec<(usize, f64)> = epochs
        .iter()
        .enumerate()
        .filter_map(|(i, r)| r.valid.as_ref().map(|m| (i, m.f1)))
        .collect();
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut top: Vec<usize> = scored.into_iter().take(k).map(|(i, _)| i).collect();
    top.sort_unstable();
    top
}
