use std::fmt::Write as _;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::{causality_loss, distance_loss, global_causality_loss};
use super::optim::{AdamW, AdamWConfig};
use super::report::{evaluate_targets, EmbeddingReport};
use super::{BatchMode, CausalityMode, Model, Result, TargetMode, TrainConfig};
use crate::autodiff::{Matrix, Tape, Var};
use crate::graph::{dag_to_poset, shortest_paths, Poset, UndirectedView, WeightedDigraph};

const SHUFFLE_STREAM: u64 = 0x5348_5546;

/// One row of the loss curve, measured before that epoch's last update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossPoint {
    pub epoch: usize,
    /// Mean over the epoch's steps.
    pub distance_loss: f64,
    pub causality_loss: f64,
    pub total_correct: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: Model,
    pub report: EmbeddingReport,
    pub curve: Vec<LossPoint>,
}

/// `(u, v, w)` for every edge `u -> v` of weight `w`.
pub fn edge_targets(graph: &WeightedDigraph) -> Vec<(usize, usize, f64)> {
    graph.edges().iter().map(|e| (e.source, e.target, e.weight)).collect()
}

/// Shortest-path distance for every connected unordered pair `u < v` of the
/// underlying undirected graph.
pub fn all_pair_targets(graph: &WeightedDigraph) -> Result<Vec<(usize, usize, f64)>> {
    let dist = shortest_paths(&UndirectedView::from_digraph(graph))?;
    let n = graph.node_count();
    let mut out = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if let Some(d) = dist.get(u, v) {
                out.push((u, v, d));
            }
        }
    }
    Ok(out)
}

/// Every pair `u < v` of the strict order.
pub fn closure_pairs(poset: &Poset) -> Vec<(usize, usize)> {
    poset.strict_pairs()
}

/// Incomparable pairs, in both orders.
pub fn antichain_pairs(poset: &Poset) -> Vec<(usize, usize)> {
    let n = poset.len();
    let mut out = Vec::new();
    for u in 0..n {
        for v in 0..n {
            if u != v && !poset.comparable(u, v) {
                out.push((u, v));
            }
        }
    }
    out
}

pub fn loss_curve_csv(curve: &[LossPoint]) -> String {
    let mut s = String::from("epoch,distance_loss,causality_loss,total_correct\n");
    for p in curve {
        let tc = p.total_correct.map(|x| x.to_string()).unwrap_or_default();
        let _ = writeln!(s, "{},{},{},{}", p.epoch, p.distance_loss, p.causality_loss, tc);
    }
    s
}

/// Builds a seeded model for `config` and trains it on `graph`.
pub fn train(graph: &WeightedDigraph, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let model = Model::from_config(config, graph.feature_dim())?;
    train_model(model, graph, config)
}

/// Trains `model` on `graph`. Dimensions come from the model, optimisation
/// settings from `config`.
pub fn train_model(mut model: Model, graph: &WeightedDigraph, config: &TrainConfig) -> Result<TrainOutcome> {
    config.validate()?;
    let start = Instant::now();
    let features = Matrix::from_rows(graph.features());
    if features.cols() != model.input_dim() {
        return Err(super::TrainError::FeatureWidth {
            expected: model.input_dim(),
            found: features.cols(),
        });
    }
    let mut terms = LossTerms::for_graph(graph, config)?;
    let targets = std::mem::take(&mut terms.pairs);

    let mut opt = AdamW::new(AdamWConfig::new(config.lr, config.clip), model.store());
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..targets.len()).collect();
    let mut curve = Vec::with_capacity(config.epochs);

    for epoch in 0..config.epochs {
        let batches: Vec<Vec<usize>> = match config.batch {
            BatchMode::Full => vec![order.clone()],
            BatchMode::Pairs(size) => {
                order.shuffle(&mut rng);
                order.chunks(size).map(<[usize]>::to_vec).collect()
            }
        };
        let batches = if batches.iter().all(Vec::is_empty) { vec![Vec::new()] } else { batches };
        let (mut dsum, mut last) = (0.0, None);
        for batch in &batches {
            terms.pairs = batch.iter().map(|&i| targets[i]).collect();
            let step = step(&mut model, &mut opt, &features, &terms, config)?;
            dsum += step.distance;
            last = Some(step);
        }
        let last = last.expect("at least one batch");
        curve.push(LossPoint {
            epoch,
            distance_loss: dsum / batches.len() as f64,
            causality_loss: last.causality,
            total_correct: last.total_correct,
        });
    }

    model.store_mut().zero_grad();
    let mut report = evaluate_targets(&model, graph, &targets)?;
    report.wall_time_secs = start.elapsed().as_secs_f64();
    Ok(TrainOutcome { model, report, curve })
}

/// Index sets a training loss is evaluated on.
#[derive(Debug, Clone, Default)]
pub struct LossTerms {
    /// `(u, v, true distance)` pairs for the distance term.
    pub pairs: Vec<(usize, usize, f64)>,
    pub edges: Vec<(usize, usize)>,
    /// Closure and antichain pairs, used by the global causality mode.
    pub closure: Vec<(usize, usize)>,
    pub antichain: Vec<(usize, usize)>,
}

impl LossTerms {
    /// Edge targets and edges, plus closure and antichain in global mode.
    pub fn for_graph(graph: &WeightedDigraph, config: &TrainConfig) -> Result<Self> {
        let poset = dag_to_poset(graph)?;
        let global = config.causality == CausalityMode::Global;
        Ok(Self {
            pairs: match config.targets {
                TargetMode::Edges => edge_targets(graph),
                TargetMode::AllPairs => all_pair_targets(graph)?,
            },
            edges: graph.edges().iter().map(|e| (e.source, e.target)).collect(),
            closure: if global { closure_pairs(&poset) } else { Vec::new() },
            antichain: if global { antichain_pairs(&poset) } else { Vec::new() },
        })
    }
}

/// Weighted training loss recorded on `tape`, with its parts.
#[derive(Debug, Clone, Copy)]
pub struct RecordedLoss {
    /// `None` when every term is empty.
    pub total: Option<Var>,
    pub distance: f64,
    pub causality: f64,
    pub total_correct: Option<f64>,
}

pub fn record_loss(
    model: &Model,
    tape: &mut Tape,
    features: &Matrix,
    terms: &LossTerms,
    config: &TrainConfig,
) -> Result<RecordedLoss> {
    let x = tape.constant(features.clone());
    let emb = model.embed(tape, x)?;
    let mut parts: Vec<Var> = Vec::new();
    let pairs = &terms.pairs;
    let edges = &terms.edges;

    let mut distance = 0.0;
    if !pairs.is_empty() {
        let us: Vec<usize> = pairs.iter().map(|p| p.0).collect();
        let vs: Vec<usize> = pairs.iter().map(|p| p.1).collect();
        let eu = tape.gather_rows(emb, &us)?;
        let ev = tape.gather_rows(emb, &vs)?;
        let (pred, rows) = model.pair_distances(tape, eu, ev)?;
        let truth: Vec<f64> = match rows {
            None => pairs.iter().map(|p| p.2).collect(),
            Some(rows) => rows.iter().map(|&r| pairs[r].2).collect(),
        };
        if !truth.is_empty() {
            let target = tape.constant(Matrix::from_vec(truth.len(), 1, truth));
            let loss = distance_loss(tape, pred, target)?;
            distance = tape.value(loss).item();
            parts.push(tape.scale(loss, config.distance_weight));
        }
    }

    let mut causality = 0.0;
    let mut total_correct = None;
    if let Some(times) = model.time_codes(tape, emb)? {
        match config.causality {
            CausalityMode::Local if !edges.is_empty() => {
                let (loss, tc) = causality_loss(tape, times, edges)?;
                causality = tape.value(loss).item();
                total_correct = Some(tc);
                parts.push(tape.scale(loss, config.causality_weight));
            }
            CausalityMode::Global if !(terms.closure.is_empty() && terms.antichain.is_empty()) => {
                let loss = global_causality_loss(
                    tape,
                    times,
                    &terms.closure,
                    &terms.antichain,
                    config.epsilon,
                    config.smooth,
                )?;
                causality = tape.value(loss).item();
                if !edges.is_empty() {
                    total_correct = Some(super::total_correct(tape.value(times), edges)?);
                }
                parts.push(tape.scale(loss, config.causality_weight));
            }
            _ => {}
        }
    }

    let mut total = None;
    for t in parts {
        total = Some(match total {
            None => t,
            Some(acc) => tape.add(acc, t)?,
        });
    }
    Ok(RecordedLoss {
        total,
        distance,
        causality,
        total_correct,
    })
}

/// Distance from the current parameters to the nearest point where the
/// training loss is not smooth: a kink on the tape, or an edge whose time
/// codes are about to change correctness (which flips the detached factor).
pub fn loss_kink_margin(
    model: &Model,
    features: &Matrix,
    terms: &LossTerms,
    config: &TrainConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    record_loss(model, &mut tape, features, terms, config)?;
    let mut margin = tape.kink_margin();
    let mut tape = Tape::new();
    let x = tape.constant(features.clone());
    let emb = model.embed(&mut tape, x)?;
    if let Some(times) = model.time_codes(&mut tape, emb)? {
        let times = tape.value(times);
        for &(u, v) in &terms.edges {
            let worst = times
                .row(u)
                .iter()
                .zip(times.row(v))
                .map(|(a, b)| a - b)
                .fold(f64::NEG_INFINITY, f64::max);
            margin = margin.min(worst.abs());
        }
    }
    Ok(margin)
}

fn step(model: &mut Model, opt: &mut AdamW, features: &Matrix, terms: &LossTerms, config: &TrainConfig) -> Result<RecordedLoss> {
    let mut tape = Tape::new();
    let rec = record_loss(model, &mut tape, features, terms, config)?;
    if let Some(total) = rec.total {
        tape.backward(total, model.store_mut())?;
        opt.step(model.store_mut());
    }
    Ok(rec)
}
