use std::path::Path;

use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::Serialize;

use super::forward::{argmax, record_logits, AgentMask, Variant};
use super::{TrainConfig, TrainError};
use crate::dataset::SampleRecord;
use crate::nnet::{AdamW, Checkpoint, Gradients, Graph, Group, NnetError, Stage, UapNet};
use crate::rng;

/// One line of the training log.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LogRow {
    pub step: u64,
    pub split: String,
    pub loss: f64,
    /// Top-1 accuracy for handoff rows, mean absolute count error for
    /// inspection rows.
    pub metric: f64,
}

pub fn write_log(path: &Path, rows: &[LogRow]) -> Result<(), TrainError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

/// Groups `(record, vehicle)` samples by record, keeping first-seen order.
fn group_by_record(batch: &[(usize, usize)]) -> Vec<(usize, Vec<usize>)> {
    let mut groups: Vec<(usize, Vec<usize>)> = Vec::new();
    for &(r, v) in batch {
        match groups.iter_mut().find(|(g, _)| *g == r) {
            Some((_, vs)) => vs.push(v),
            None => groups.push((r, vec![v])),
        }
    }
    groups
}

/// Gradient of `Σ CE / norm` over `batch`, with the summed cross-entropy and
/// the number of correct predictions. Records are differentiated in
/// parallel and reduced in batch order.
pub fn batch_gradients(
    net: &UapNet,
    records: &[SampleRecord],
    batch: &[(usize, usize)],
    variant: Variant,
    norm: f64,
) -> Result<(Gradients, f64, usize), TrainError> {
    let mask = AgentMask::full(variant);
    let parts = group_by_record(batch)
        .par_iter()
        .map(|(r, vs)| -> Result<(Gradients, f64, usize), NnetError> {
            let rec = &records[*r];
            let mut g = Graph::new(&net.store);
            let logits = record_logits(net, &mut g, rec, vs, &mask)?;
            let mut ces = Vec::with_capacity(vs.len());
            let mut correct = 0;
            for (&l, &v) in logits.iter().zip(vs) {
                let label = rec.vehicles[v].label;
                correct += usize::from(argmax(g.value(l)) == label);
                ces.push(g.softmax_cross_entropy(l, label)?);
            }
            let total = g.sum(&ces);
            let ce = g.scalar(total);
            let loss = g.scale(total, 1.0 / norm);
            Ok((g.backward(loss)?, ce, correct))
        })
        .collect::<Vec<_>>();
    let mut grads = Gradients::zeros_like(&net.store);
    let (mut ce, mut correct) = (0.0, 0);
    for p in parts {
        let (g, c, k) = p?;
        grads.accumulate(&g);
        ce += c;
        correct += k;
    }
    Ok((grads, ce, correct))
}

/// Mean cross-entropy and top-1 accuracy over every vehicle of the listed
/// records.
pub fn accuracy(net: &UapNet, records: &[SampleRecord], idx: &[usize], variant: Variant) -> Result<(f64, f64), TrainError> {
    let mask = AgentMask::full(variant);
    let parts = idx
        .par_iter()
        .map(|&r| -> Result<(f64, usize, usize), NnetError> {
            let rec = &records[r];
            let mut g = Graph::inference(&net.store);
            let all: Vec<usize> = (0..rec.vehicles.len()).collect();
            let logits = record_logits(net, &mut g, rec, &all, &mask)?;
            let mut ce = 0.0;
            let mut correct = 0;
            for (&l, veh) in logits.iter().zip(&rec.vehicles) {
                let p = crate::nnet::softmax(g.value(l));
                ce += super::cross_entropy(&p, veh.label);
                correct += usize::from(argmax(&p) == veh.label);
            }
            Ok((ce, correct, all.len()))
        })
        .collect::<Vec<_>>();
    let (mut ce, mut correct, mut n) = (0.0, 0, 0);
    for p in parts {
        let (c, k, m) = p?;
        ce += c;
        correct += k;
        n += m;
    }
    if n == 0 {
        return Ok((0.0, 0.0));
    }
    Ok((ce / n as f64, correct as f64 / n as f64))
}

#[derive(Clone, Debug)]
pub struct Stage1Outcome {
    /// Parameters with the best validation accuracy.
    pub model: UapNet,
    pub log: Vec<LogRow>,
    /// `(step, validation accuracy)` at every checkpoint save.
    pub saves: Vec<(u64, f64)>,
    pub steps: u64,
}

/// End-to-end handoff training with gradient accumulation. Keeps the
/// parameters of the epoch with the best validation accuracy; ties keep the
/// earlier epoch. Without a validation split the last epoch is kept.
pub fn train_stage1(
    mut net: UapNet,
    records: &[SampleRecord],
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
    variant: Variant,
) -> Result<Stage1Outcome, TrainError> {
    cfg.validate()?;
    let c = &cfg.stage1;
    let total: usize = train.iter().map(|&r| records[r].vehicles.len()).sum();
    if total == 0 {
        return Err(TrainError::EmptySplit("no training samples".into()));
    }
    let batch = c.batch_size.min(total);
    for g in Group::HANDOFF {
        net.store.set_frozen(g, false);
    }
    let mut opt = AdamW::new(cfg.optimizer.clone(), &net.store);
    let mut log = Vec::new();
    let mut saves = Vec::new();
    let mut best: Option<(f64, UapNet)> = None;
    let mut step = 0u64;

    for epoch in 0..c.epochs {
        let mut order = train.to_vec();
        order.shuffle(&mut rng::stream(&[cfg.rng_seed, rng::TAG_SHUFFLE, 1, epoch as u64]));
        let samples: Vec<(usize, usize)> = order.iter().flat_map(|&r| (0..records[r].vehicles.len()).map(move |v| (r, v))).collect();
        let mut acc = Gradients::zeros_like(&net.store);
        let mut pending = 0usize;
        let (mut window_ce, mut window_correct, mut window_n) = (0.0, 0usize, 0usize);
        let chunks: Vec<&[(usize, usize)]> = samples.chunks(batch).collect();
        for (i, chunk) in chunks.iter().enumerate() {
            let (g, ce, correct) = batch_gradients(&net, records, chunk, variant, chunk.len() as f64)?;
            if !ce.is_finite() {
                return Err(TrainError::NonFinite { step });
            }
            acc.accumulate(&g);
            pending += 1;
            window_ce += ce;
            window_correct += correct;
            window_n += chunk.len();
            if pending == c.grad_accum_steps || i + 1 == chunks.len() {
                acc.scale(1.0 / pending as f64);
                opt.step(&mut net.store, &acc, c.learning_rate);
                step += 1;
                log.push(LogRow {
                    step,
                    split: "train".into(),
                    loss: window_ce / window_n as f64,
                    metric: window_correct as f64 / window_n as f64,
                });
                acc = Gradients::zeros_like(&net.store);
                pending = 0;
                (window_ce, window_correct, window_n) = (0.0, 0, 0);
            }
        }
        if val.is_empty() {
            best = Some((0.0, net.clone()));
            continue;
        }
        let (val_ce, val_acc) = accuracy(&net, records, val, variant)?;
        log::info!("stage 1 epoch {epoch}: val loss {val_ce:.4} acc {val_acc:.4}");
        log.push(LogRow {
            step,
            split: "val".into(),
            loss: val_ce,
            metric: val_acc,
        });
        if best.as_ref().is_none_or(|(b, _)| val_acc > *b) {
            saves.push((step, val_acc));
            best = Some((val_acc, net.clone()));
        }
    }
    Ok(Stage1Outcome {
        model: best.map_or(net, |(_, m)| m),
        log,
        saves,
        steps: step,
    })
}

/// Image features of every present UAV of the listed records, paired with
/// their lane counts.
pub fn uav_features(net: &UapNet, records: &[SampleRecord], idx: &[usize]) -> Result<Vec<(Vec<f64>, Vec<f64>)>, TrainError> {
    let per_record = idx
        .par_iter()
        .map(|&r| -> Result<Vec<(Vec<f64>, Vec<f64>)>, NnetError> {
            let mut out = Vec::new();
            for u in &records[r].uavs {
                if !u.present || !u.view_present.iter().any(|&p| p) {
                    continue;
                }
                let mut g = Graph::inference(&net.store);
                let x = net.ufe_forward(&mut g, &u.images, &u.view_present)?;
                out.push((g.value(x).to_vec(), u.counts.iter().map(|&c| c as f64).collect()));
            }
            Ok(out)
        })
        .collect::<Vec<_>>();
    let mut all = Vec::new();
    for p in per_record {
        all.extend(p?);
    }
    Ok(all)
}

fn tih_batch(net: &UapNet, data: &[(Vec<f64>, Vec<f64>)], train: bool) -> Result<(Option<Gradients>, f64, f64), TrainError> {
    let mut g = if train { Graph::new(&net.store) } else { Graph::inference(&net.store) };
    let mut losses = Vec::with_capacity(data.len());
    let mut abs_err = 0.0;
    for (x, d) in data {
        let xv = g.input(vec![x.len()], x.clone())?;
        let pred = net.tih_forward(&mut g, xv)?;
        abs_err += g.value(pred).iter().zip(d).map(|(p, t)| (p - t).abs()).sum::<f64>() / d.len() as f64;
        losses.push(g.mse(pred, d)?);
    }
    let total = g.sum(&losses);
    let mse = g.scalar(total) / data.len() as f64;
    let grads = if train {
        let loss = g.scale(total, 1.0 / data.len() as f64);
        Some(g.backward(loss)?)
    } else {
        None
    };
    Ok((grads, mse, abs_err / data.len() as f64))
}

#[derive(Clone, Debug)]
pub struct Stage2Outcome {
    pub model: UapNet,
    pub log: Vec<LogRow>,
    /// `(step, validation MSE)` at every checkpoint save.
    pub saves: Vec<(u64, f64)>,
    pub steps: u64,
}

/// Trains only the inspection head on features of the frozen image
/// extractor. The rest of the network is frozen as well and leaves the
/// stage bit-identical. Keeps the epoch with the lowest validation MSE.
pub fn train_stage2(
    stage1: &Checkpoint,
    records: &[SampleRecord],
    train: &[usize],
    val: &[usize],
    cfg: &TrainConfig,
) -> Result<Stage2Outcome, TrainError> {
    cfg.validate()?;
    if stage1.stage == Stage::Init {
        return Err(TrainError::MissingStage1);
    }
    let mut net = stage1.clone().into_model()?;
    for g in Group::HANDOFF {
        net.store.set_frozen(g, true);
    }
    net.store.set_frozen(Group::Tih, false);
    let train_data = uav_features(&net, records, train)?;
    let val_data = uav_features(&net, records, val)?;
    if train_data.is_empty() {
        return Err(TrainError::EmptySplit("no UAV observations to train on".into()));
    }
    let c = &cfg.stage2;
    let batch = c.batch_size.min(train_data.len());
    let mut opt = AdamW::new(cfg.optimizer.clone(), &net.store);
    let mut log = Vec::new();
    let mut saves = Vec::new();
    let mut best: Option<(f64, UapNet)> = None;
    let mut step = 0u64;
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    for epoch in 0..c.epochs {
        order.shuffle(&mut rng::stream(&[cfg.rng_seed, rng::TAG_SHUFFLE, 2, epoch as u64]));
        for chunk in order.chunks(batch) {
            let data: Vec<(Vec<f64>, Vec<f64>)> = chunk.iter().map(|&i| train_data[i].clone()).collect();
            let (grads, mse, mae) = tih_batch(&net, &data, true)?;
            if !mse.is_finite() {
                return Err(TrainError::NonFinite { step });
            }
            opt.step(&mut net.store, &grads.expect("training batch"), c.learning_rate);
            step += 1;
            log.push(LogRow {
                step,
                split: "train".into(),
                loss: mse,
                metric: mae,
            });
        }
        if val_data.is_empty() {
            best = Some((0.0, net.clone()));
            continue;
        }
        let (_, mse, mae) = tih_batch(&net, &val_data, false)?;
        log::info!("stage 2 epoch {epoch}: val mse {mse:.4} mae {mae:.4}");
        log.push(LogRow {
            step,
            split: "val".into(),
            loss: mse,
            metric: mae,
        });
        if best.as_ref().is_none_or(|(b, _)| mse < *b) {
            saves.push((step, mse));
            best = Some((mse, net.clone()));
        }
    }
    Ok(Stage2Outcome {
        model: best.map_or(net, |(_, m)| m),
        log,
        saves,
        steps: step,
    })
}
