//! Finite-difference checks of whole-model gradients on the toy series.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use trustgcn::autodiff::{Matrix, Tape};
use trustgcn::data::build_features;
use trustgcn::graphlet::{count_series, MotifSeries};
use trustgcn::model::{Ablation, Dropout, Model, ModelConfig, ModelInputs, ModelKind, ALPHA};

pub fn toy(config: &ModelConfig) -> (ModelInputs, MotifSeries) {
    let series = super::toy_series();
    let features = build_features(&series, config.input_dim).unwrap();
    let motifs = MotifSeries::new(count_series(&series).unwrap());
    let inputs = ModelInputs::new(&series, &features, config.uses_motifs().then_some(&motifs)).unwrap();
    (inputs, motifs)
}

pub fn randomized(config: ModelConfig, seed: u64) -> Model {
    let mut model = Model::new(config, seed).unwrap();
    let mut r = ChaCha8Rng::seed_from_u64(seed + 100);
    let alpha_index = model.params.index_of(ALPHA);
    for (i, v) in model.params.values_mut().iter_mut().enumerate() {
        for x in v.as_mut_slice() {
            *x = if Some(i) == alpha_index {
                r.gen_range(0.05..0.5)
            } else {
                r.gen_range(-0.6..0.6)
            };
        }
    }
    model
}

pub fn model_loss(model: &Model, inputs: &ModelInputs) -> (f64, Vec<Matrix>) {
    let mut tape = Tape::new();
    let bound = model.params.record(&mut tape).unwrap();
    let last = inputs.snapshots.len() - 1;
    let fwd = model.forward(&mut tape, &bound, inputs, last, &mut Dropout::off()).unwrap();
    let mut loss = None;
    for (t, l) in fwd.logits.iter().enumerate() {
        if let Some(l) = *l {
            let ce = tape.cross_entropy(l, &inputs.snapshots[t].labels).unwrap();
            loss = Some(match loss {
                Some(acc) => tape.add(acc, ce).unwrap(),
                None => ce,
            });
        }
    }
    let loss = loss.unwrap();
    let grads = tape.backward(loss).unwrap();
    (tape.value(loss).get(0, 0), bound.gradients(&tape, &grads))
}

/// Relative error per parameter tensor.
pub fn check_model(model: &Model, inputs: &ModelInputs, h: f64) -> Vec<(String, f64)> {
    let (_, analytic) = model_loss(model, inputs);
    let mut out = Vec::new();
    for (i, name) in model.params.names().iter().enumerate() {
        let v = &model.params.values()[i];
        let mut numeric = Matrix::zeros(v.rows(), v.cols());
        for k in 0..v.len() {
            let mut plus = model.clone();
            plus.params.values_mut()[i].as_mut_slice()[k] += h;
            let mut minus = model.clone();
            minus.params.values_mut()[i].as_mut_slice()[k] -= h;
            numeric.as_mut_slice()[k] = (model_loss(&plus, inputs).0 - model_loss(&minus, inputs).0) / (2.0 * h);
        }
        assert!(numeric.norm() > 0.0 || analytic[i].norm() == 0.0);
        out.push((name.clone(), super::relative_error(&analytic[i], &numeric)));
    }
    out
}

pub fn toy_config(kind: ModelKind, ablation: Ablation) -> ModelConfig {
    ModelConfig {
        kind,
        input_dim: 5,
        emb_dim: 3,
        groups: 2,
        beta: 0.35,
        dropout: 0.0,
        ablation,
    }
}

