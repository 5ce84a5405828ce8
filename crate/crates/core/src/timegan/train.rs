use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::checkpoint::Checkpoint;
use super::config::{TimeGanConfig, TrainSchedule};
use super::losses::{bce_with_logits, moment_loss, mse, sqrt_grad, supervised_loss};
use super::model::TimeGanModel;
use crate::error::{invalid, Error, Result};
use crate::nn::{gradient_check, AdamState, GradCheckReport, Parameterized, SeqNet, Tensor};
use crate::preprocess::TransformParams;
use crate::windows::{WindowSet, AXES};

/// Slack allowed when checking that training windows are in [0, 1].
const RANGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Phase {
    Embedding,
    Supervised,
    Joint,
    Done,
}

impl Phase {
    pub fn name(self) -> &'static str {
        match self {
            Phase::Embedding => "embedding",
            Phase::Supervised => "supervised",
            Phase::Joint => "joint",
            Phase::Done => "done",
        }
    }
}

/// Where training stands: `epoch` epochs of `phase` are complete.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SchedulePosition {
    pub phase: Phase,
    pub epoch: usize,
}

/// Epoch means of the joint-phase losses.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JointLosses {
    pub generator: f64,
    pub adversarial: f64,
    pub supervised: f64,
    pub moment: f64,
    /// Reconstruction MSE seen by the embedder updates.
    pub reconstruction: f64,
    pub discriminator: f64,
    /// Share of discriminator opportunities that led to an update.
    pub discriminator_update_rate: f64,
}

impl JointLosses {
    pub const FIELDS: [&'static str; 7] = [
        "generator",
        "adversarial",
        "supervised",
        "moment",
        "reconstruction",
        "discriminator",
        "discriminator_update_rate",
    ];

    pub fn to_array(&self) -> [f64; 7] {
        [
            self.generator,
            self.adversarial,
            self.supervised,
            self.moment,
            self.reconstruction,
            self.discriminator,
            self.discriminator_update_rate,
        ]
    }

    pub fn from_array(a: [f64; 7]) -> Self {
        JointLosses {
            generator: a[0],
            adversarial: a[1],
            supervised: a[2],
            moment: a[3],
            reconstruction: a[4],
            discriminator: a[5],
            discriminator_update_rate: a[6],
        }
    }

    fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LossHistory {
    pub embedding: Vec<f64>,
    pub supervised: Vec<f64>,
    pub joint: Vec<JointLosses>,
}

/// One Adam state per update rule.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimizers {
    /// Embedder and recovery, embedding phase.
    pub embedding: AdamState,
    /// Supervisor, supervised phase.
    pub supervised: AdamState,
    /// Generator and supervisor, joint phase.
    pub generator: AdamState,
    /// Embedder and recovery, joint phase.
    pub embedder: AdamState,
    pub discriminator: AdamState,
}

pub const OPTIMIZERS: [&str; 5] = [
    "embedding",
    "supervised",
    "generator",
    "embedder",
    "discriminator",
];

impl Optimizers {
    pub fn new(model: &TimeGanModel) -> Self {
        let cfg = model.config.adam;
        let er = model.embedder.param_count() + model.recovery.param_count();
        let s = model.supervisor.param_count();
        let gs = model.generator.param_count() + s;
        Optimizers {
            embedding: AdamState::new(cfg, er),
            supervised: AdamState::new(cfg, s),
            generator: AdamState::new(cfg, gs),
            embedder: AdamState::new(cfg, er),
            discriminator: AdamState::new(cfg, model.discriminator.param_count()),
        }
    }

    pub fn all(&self) -> [&AdamState; 5] {
        [
            &self.embedding,
            &self.supervised,
            &self.generator,
            &self.embedder,
            &self.discriminator,
        ]
    }
}

/// A joint-phase snapshot: the full training state and a generated dataset in degrees.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub epoch: usize,
    pub checkpoint: Checkpoint,
    pub windows: WindowSet,
    /// Generated values clamped into [0, 1] before inversion.
    pub clamped: usize,
}

/// Receives snapshots as training produces them.
pub trait SnapshotSink {
    fn snapshot(&mut self, snapshot: Snapshot) -> Result<()>;

    /// Stores a checkpoint taken just before a non-finite loss aborts training.
    fn diagnostic(&mut self, _checkpoint: &Checkpoint) -> Result<Option<PathBuf>> {
        Ok(None)
    }
}

/// Keeps every snapshot in memory.
#[derive(Debug, Default)]
pub struct MemorySink {
    pub snapshots: Vec<Snapshot>,
}

impl SnapshotSink for MemorySink {
    fn snapshot(&mut self, snapshot: Snapshot) -> Result<()> {
        self.snapshots.push(snapshot);
        Ok(())
    }
}

/// Drops snapshots.
#[derive(Debug, Default)]
pub struct DiscardSink;

impl SnapshotSink for DiscardSink {
    fn snapshot(&mut self, _snapshot: Snapshot) -> Result<()> {
        Ok(())
    }
}

/// Copies `batch` windows into a time-major `[T, B, 3]` tensor.
fn gather(windows: &WindowSet, batch: &[usize]) -> Tensor {
    let (t, b) = (windows.len(), batch.len());
    let mut data = vec![0.0; t * b * AXES];
    for (k, &w) in batch.iter().enumerate() {
        let src = windows.window(w);
        for s in 0..t {
            let dst = (s * b + k) * AXES;
            data[dst..dst + AXES].copy_from_slice(&src[s * AXES..(s + 1) * AXES]);
        }
    }
    Tensor::from_vec(&[t, b, AXES], data).expect("non-empty batch")
}

fn scaled(t: &Tensor, k: f64) -> Tensor {
    let data = t.data().iter().map(|v| v * k).collect();
    Tensor::from_vec(t.shape(), data).expect("same shape")
}

fn add_scaled(acc: &mut Tensor, t: &Tensor, k: f64) {
    for (a, v) in acc.data_mut().iter_mut().zip(t.data()) {
        *a += k * v;
    }
}

#[derive(Debug, Clone, Copy, Default)]
struct GeneratorStep {
    total: f64,
    adversarial: f64,
    supervised: f64,
    moment: f64,
}

/// Runs the three training phases with resumable state.
#[derive(Debug, Clone)]
pub struct Trainer {
    state: Checkpoint,
}

impl Trainer {
    /// `windows` must be in the transformed [0, 1] representation.
    pub fn new(
        windows: &WindowSet,
        transform: TransformParams,
        config: TimeGanConfig,
        schedule: TrainSchedule,
    ) -> Result<Self> {
        schedule.validate()?;
        check_range(windows)?;
        let model = TimeGanModel::new(config, windows.len(), windows.rate_hz(), schedule.seed)?;
        let optimizers = Optimizers::new(&model);
        Ok(Trainer {
            state: Checkpoint {
                model,
                optimizers,
                schedule,
                position: SchedulePosition {
                    phase: Phase::Embedding,
                    epoch: 0,
                },
                rng: ChaCha8Rng::seed_from_u64(schedule.seed),
                transform,
                history: LossHistory::default(),
                real_window_count: windows.count(),
            },
        })
    }

    pub fn from_checkpoint(checkpoint: Checkpoint) -> Self {
        Trainer { state: checkpoint }
    }

    pub fn checkpoint(&self) -> &Checkpoint {
        &self.state
    }

    pub fn into_checkpoint(self) -> Checkpoint {
        self.state
    }

    pub fn model(&self) -> &TimeGanModel {
        &self.state.model
    }

    pub fn history(&self) -> &LossHistory {
        &self.state.history
    }

    pub fn position(&self) -> SchedulePosition {
        self.state.position
    }

    pub fn is_done(&self) -> bool {
        self.state.position.phase == Phase::Done
    }

    fn check_windows(&self, windows: &WindowSet) -> Result<()> {
        let m = &self.state.model;
        if windows.len() != m.seq_len || windows.count() != self.state.real_window_count {
            return Err(invalid(format!(
                "training windows are {}×{}, the model was set up for {}×{}",
                windows.count(),
                windows.len(),
                self.state.real_window_count,
                m.seq_len
            )));
        }
        check_range(windows)
    }

    /// Trains until the schedule is complete.
    pub fn run(&mut self, windows: &WindowSet, sink: &mut dyn SnapshotSink) -> Result<()> {
        while self.step(windows, sink)? {}
        Ok(())
    }

    /// Trains until the given phase is complete (or the schedule ends).
    pub fn run_through(
        &mut self,
        phase: Phase,
        windows: &WindowSet,
        sink: &mut dyn SnapshotSink,
    ) -> Result<()> {
        self.advance(sink)?;
        while self.state.position.phase != Phase::Done && self.state.position.phase <= phase {
            self.step(windows, sink)?;
        }
        Ok(())
    }

    /// Runs one epoch of the current phase. Returns false once training is done.
    pub fn step(&mut self, windows: &WindowSet, sink: &mut dyn SnapshotSink) -> Result<bool> {
        self.check_windows(windows)?;
        self.advance(sink)?;
        let phase = self.state.position.phase;
        let finite = match phase {
            Phase::Done => return Ok(false),
            Phase::Embedding => {
                let loss = self.embedding_epoch(windows)?;
                self.state.history.embedding.push(loss);
                loss.is_finite()
            }
            Phase::Supervised => {
                let loss = self.supervised_epoch(windows)?;
                self.state.history.supervised.push(loss);
                loss.is_finite()
            }
            Phase::Joint => {
                let losses = self.joint_epoch(windows)?;
                self.state.history.joint.push(losses);
                losses.is_finite()
            }
        };
        self.state.position.epoch += 1;
        if !finite {
            let checkpoint = sink.diagnostic(&self.state)?;
            return Err(Error::NonFiniteLoss {
                phase: phase.name(),
                epoch: self.state.position.epoch,
                checkpoint,
            });
        }
        if phase == Phase::Joint && self.state.schedule.is_snapshot_epoch(self.state.position.epoch) {
            self.emit_snapshot(sink)?;
        }
        self.advance(sink)?;
        Ok(!self.is_done())
    }

    /// Moves past completed phases.
    fn advance(&mut self, sink: &mut dyn SnapshotSink) -> Result<()> {
        let s = self.state.schedule;
        loop {
            let pos = &mut self.state.position;
            match pos.phase {
                Phase::Embedding if pos.epoch >= s.epochs_embedding => {
                    *pos = SchedulePosition {
                        phase: Phase::Supervised,
                        epoch: 0,
                    };
                }
                Phase::Supervised if pos.epoch >= s.epochs_supervised => {
                    *pos = SchedulePosition {
                        phase: Phase::Joint,
                        epoch: 0,
                    };
                    if s.epochs_joint == 0 {
                        self.emit_snapshot(sink)?;
                    }
                }
                Phase::Joint if pos.epoch >= s.epochs_joint => {
                    *pos = SchedulePosition {
                        phase: Phase::Done,
                        epoch: 0,
                    };
                }
                _ => return Ok(()),
            }
        }
    }

    fn emit_snapshot(&self, sink: &mut dyn SnapshotSink) -> Result<()> {
        let epoch = self.state.position.epoch;
        let n = self.state.schedule.snapshot_multiplier * self.state.real_window_count;
        let mut rng = ChaCha8Rng::seed_from_u64(self.state.schedule.seed);
        rng.set_stream(1 + epoch as u64);
        let (windows, clamped) = self
            .state
            .model
            .generate_with_rng(&self.state.transform, n, &mut rng)?;
        sink.snapshot(Snapshot {
            epoch,
            checkpoint: self.state.clone(),
            windows,
            clamped,
        })
    }

    fn batches(&mut self, count: usize) -> Vec<Vec<usize>> {
        let mut order: Vec<usize> = (0..count).collect();
        order.shuffle(&mut self.state.rng);
        order
            .chunks(self.state.schedule.batch_size)
            .map(|c| c.to_vec())
            .collect()
    }

    fn embedding_epoch(&mut self, windows: &WindowSet) -> Result<f64> {
        let batches = self.batches(windows.count());
        let mut total = 0.0;
        for batch in &batches {
            let x = gather(windows, batch);
            let m = &mut self.state.model;
            let (loss, ge, gr) = embedding_grads(m, &x)?;
            self.state
                .optimizers
                .embedding
                .step(&mut [&mut m.embedder, &mut m.recovery], &[&ge, &gr])?;
            total += loss;
        }
        Ok(total / batches.len() as f64)
    }

    fn supervised_epoch(&mut self, windows: &WindowSet) -> Result<f64> {
        let batches = self.batches(windows.count());
        let mut total = 0.0;
        for batch in &batches {
            let x = gather(windows, batch);
            let m = &mut self.state.model;
            let (loss, gs) = supervised_grads(m, &x)?;
            self.state
                .optimizers
                .supervised
                .step(&mut [&mut m.supervisor], &[&gs])?;
            total += loss;
        }
        Ok(total / batches.len() as f64)
    }

    fn joint_epoch(&mut self, windows: &WindowSet) -> Result<JointLosses> {
        let batches = self.batches(windows.count());
        let steps = self.state.schedule.generator_steps;
        let mut sum = JointLosses::default();
        let mut d_updates = 0usize;
        for batch in &batches {
            let x = gather(windows, batch);
            for _ in 0..steps {
                let z = self.state.model.sample_noise(batch.len(), &mut self.state.rng);
                let g = generator_step(
                    &mut self.state.model,
                    &mut self.state.optimizers.generator,
                    &x,
                    &z,
                )?;
                sum.generator += g.total;
                sum.adversarial += g.adversarial;
                sum.supervised += g.supervised;
                sum.moment += g.moment;
                sum.reconstruction +=
                    embedder_step(&mut self.state.model, &mut self.state.optimizers.embedder, &x)?;
            }
            let z = self.state.model.sample_noise(batch.len(), &mut self.state.rng);
            let (d_loss, updated) = discriminator_step(
                &mut self.state.model,
                &mut self.state.optimizers.discriminator,
                &x,
                &z,
            )?;
            sum.discriminator += d_loss;
            d_updates += updated as usize;
        }
        let (nb, ng) = (batches.len() as f64, (batches.len() * steps) as f64);
        Ok(JointLosses {
            generator: sum.generator / ng,
            adversarial: sum.adversarial / ng,
            supervised: sum.supervised / ng,
            moment: sum.moment / ng,
            reconstruction: sum.reconstruction / ng,
            discriminator: sum.discriminator / nb,
            discriminator_update_rate: d_updates as f64 / nb,
        })
    }
}

fn check_range(windows: &WindowSet) -> Result<()> {
    if let Some(v) = windows
        .data()
        .iter()
        .find(|v| !(-RANGE_TOLERANCE..=1.0 + RANGE_TOLERANCE).contains(*v))
    {
        return Err(invalid(format!(
            "training windows must be transformed into [0, 1]; found {v}"
        )));
    }
    Ok(())
}

/// Embedding phase: plain reconstruction MSE through embedder and recovery.
fn embedding_grads(m: &TimeGanModel, x: &Tensor) -> Result<(f64, SeqNet, SeqNet)> {
    let (h, ce) = m.embedder.forward(x)?;
    let (x_tilde, cr) = m.recovery.forward(&h)?;
    let (loss, d_xt) = mse(&x_tilde, x);
    let (mut ge, mut gr) = (m.embedder.zeros_like(), m.recovery.zeros_like());
    let dh = m.recovery.backward(&cr, &d_xt, Some(&mut gr))?;
    m.embedder.backward(&ce, &dh, Some(&mut ge))?;
    Ok((loss, ge, gr))
}

/// Supervised phase: next-step latent MSE, supervisor only.
fn supervised_grads(m: &TimeGanModel, x: &Tensor) -> Result<(f64, SeqNet)> {
    let h = m.embedder.predict(x)?;
    let (h_sup, cs) = m.supervisor.forward(&h)?;
    let (loss, d_sup, _) = supervised_loss(&h_sup, &h);
    let mut gs = m.supervisor.zeros_like();
    m.supervisor.backward(&cs, &d_sup, Some(&mut gs))?;
    Ok((loss, gs))
}

fn flat(nets: &[&SeqNet]) -> Vec<f64> {
    nets.iter().flat_map(|n| n.to_flat()).collect()
}

/// Writes `params` into the networks picked by `pick`, in order.
fn with_params(
    m: &TimeGanModel,
    params: &[f64],
    pick: fn(&mut TimeGanModel) -> Vec<&mut SeqNet>,
) -> TimeGanModel {
    let mut m = m.clone();
    let mut rest = params;
    for net in pick(&mut m) {
        let n = net.param_count();
        net.set_from_flat(&rest[..n]).expect("parameter count matches");
        rest = &rest[n..];
    }
    m
}

/// Compares the analytic gradient of every update rule (named as in
/// [`OPTIMIZERS`]) with central finite differences of its loss. `x` is a
/// time-major `[T, B, 3]` batch and `z` noise of matching shape. The
/// discriminator is checked ungated.
pub fn check_update_gradients(
    m: &TimeGanModel,
    x: &Tensor,
    z: &Tensor,
    step: f64,
    tolerance: f64,
) -> Result<Vec<(&'static str, GradCheckReport)>> {
    let loss = |r: Result<f64>| r.expect("forward pass on a checked batch");
    let mut out = Vec::new();

    let (_, ge, gr) = embedding_grads(m, x)?;
    let pick: fn(&mut TimeGanModel) -> Vec<&mut SeqNet> = |m| vec![&mut m.embedder, &mut m.recovery];
    let report = gradient_check(
        &flat(&[&m.embedder, &m.recovery]),
        &flat(&[&ge, &gr]),
        |p| loss(embedding_grads(&with_params(m, p, pick), x).map(|r| r.0)),
        step,
        tolerance,
    );
    out.push(("embedding", report));

    let (_, gs) = supervised_grads(m, x)?;
    let report = gradient_check(
        &m.supervisor.to_flat(),
        &gs.to_flat(),
        |p| loss(supervised_grads(&with_params(m, p, |m| vec![&mut m.supervisor]), x).map(|r| r.0)),
        step,
        tolerance,
    );
    out.push(("supervised", report));

    let (_, gg, gs) = generator_grads(m, x, z)?;
    let report = gradient_check(
        &flat(&[&m.generator, &m.supervisor]),
        &flat(&[&gg, &gs]),
        |p| {
            let m = with_params(m, p, |m| vec![&mut m.generator, &mut m.supervisor]);
            loss(generator_grads(&m, x, z).map(|r| r.0.total))
        },
        step,
        tolerance,
    );
    out.push(("generator", report));

    let (_, _, ge, gr) = embedder_grads(m, x)?;
    let report = gradient_check(
        &flat(&[&m.embedder, &m.recovery]),
        &flat(&[&ge, &gr]),
        |p| loss(embedder_grads(&with_params(m, p, pick), x).map(|r| r.1)),
        step,
        tolerance,
    );
    out.push(("embedder", report));

    let (_, gd) = discriminator_grads(m, x, z, false)?;
    let gd = gd.expect("ungated");
    let report = gradient_check(
        &m.discriminator.to_flat(),
        &gd.to_flat(),
        |p| {
            loss(
                discriminator_grads(&with_params(m, p, |m| vec![&mut m.discriminator]), x, z, false)
                    .map(|r| r.0),
            )
        },
        step,
        tolerance,
    );
    out.push(("discriminator", report));
    Ok(out)
}

/// Generator + supervisor update: adversarial loss on supervised generator
/// latents, plus weighted √(supervised MSE) on real latents and moment matching
/// on recovered samples.
fn generator_step(
    m: &mut TimeGanModel,
    opt: &mut AdamState,
    x: &Tensor,
    z: &Tensor,
) -> Result<GeneratorStep> {
    let (losses, gg, gs) = generator_grads(m, x, z)?;
    opt.step(&mut [&mut m.generator, &mut m.supervisor], &[&gg, &gs])?;
    Ok(losses)
}

fn generator_grads(m: &TimeGanModel, x: &Tensor, z: &Tensor) -> Result<(GeneratorStep, SeqNet, SeqNet)> {
    let w = m.config.loss;
    let (e_hat, cg) = m.generator.forward(z)?;
    let (h_hat, cs_fake) = m.supervisor.forward(&e_hat)?;
    let (x_hat, cr) = m.recovery.forward(&h_hat)?;
    let (y_fake, cd) = m.discriminator.forward(&h_hat)?;
    let h = m.embedder.predict(x)?;
    let (h_sup, cs_real) = m.supervisor.forward(&h)?;

    let (mut adversarial, d_y) = bce_with_logits(&y_fake, 1.0);
    let (sup, d_sup, _) = supervised_loss(&h_sup, &h);
    let (moment, d_xhat) = moment_loss(&x_hat, x);

    let mut d_hhat = m.discriminator.backward(&cd, &d_y, None)?;
    let d_from_rec = m.recovery.backward(&cr, &scaled(&d_xhat, w.moment), None)?;
    add_scaled(&mut d_hhat, &d_from_rec, 1.0);

    let (mut gg, mut gs) = (m.generator.zeros_like(), m.supervisor.zeros_like());
    let mut d_ehat = m.supervisor.backward(&cs_fake, &d_hhat, Some(&mut gs))?;
    if m.config.three_stream {
        let (y_e, cde) = m.discriminator.forward(&e_hat)?;
        let (adv_e, d_ye) = bce_with_logits(&y_e, 1.0);
        adversarial += w.gamma * adv_e;
        let d = m.discriminator.backward(&cde, &d_ye, None)?;
        add_scaled(&mut d_ehat, &d, w.gamma);
    }
    m.generator.backward(&cg, &d_ehat, Some(&mut gg))?;
    m.supervisor.backward(
        &cs_real,
        &scaled(&d_sup, w.supervised * sqrt_grad(sup)),
        Some(&mut gs),
    )?;

    let losses = GeneratorStep {
        total: adversarial + w.supervised * sup.sqrt() + w.moment * moment,
        adversarial,
        supervised: sup,
        moment,
    };
    Ok((losses, gg, gs))
}

/// Embedder + recovery update: weighted √(reconstruction MSE) plus weighted
/// supervised MSE, differentiated through both the supervisor input and the
/// next-step target. Returns the reconstruction MSE.
fn embedder_step(m: &mut TimeGanModel, opt: &mut AdamState, x: &Tensor) -> Result<f64> {
    let (rec, _, ge, gr) = embedder_grads(m, x)?;
    opt.step(&mut [&mut m.embedder, &mut m.recovery], &[&ge, &gr])?;
    Ok(rec)
}

/// Returns (reconstruction MSE, embedder loss, embedder grads, recovery grads).
fn embedder_grads(m: &TimeGanModel, x: &Tensor) -> Result<(f64, f64, SeqNet, SeqNet)> {
    let w = m.config.loss;
    let (h, ce) = m.embedder.forward(x)?;
    let (x_tilde, cr) = m.recovery.forward(&h)?;
    let (h_sup, cs) = m.supervisor.forward(&h)?;
    let (rec, d_xt) = mse(&x_tilde, x);
    let (sup, d_sup, d_target) = supervised_loss(&h_sup, &h);

    let (mut ge, mut gr) = (m.embedder.zeros_like(), m.recovery.zeros_like());
    let mut dh = m.recovery.backward(
        &cr,
        &scaled(&d_xt, w.reconstruction * sqrt_grad(rec)),
        Some(&mut gr),
    )?;
    let through_sup = m.supervisor.backward(&cs, &d_sup, None)?;
    add_scaled(&mut dh, &through_sup, w.embedder_supervised);
    add_scaled(&mut dh, &d_target, w.embedder_supervised);
    m.embedder.backward(&ce, &dh, Some(&mut ge))?;
    let loss = w.reconstruction * rec.sqrt() + w.embedder_supervised * sup;
    Ok((rec, loss, ge, gr))
}

/// Discriminator opportunity: real embedded latents against supervised
/// generator latents. Updates only while the loss exceeds the threshold.
fn discriminator_step(
    m: &mut TimeGanModel,
    opt: &mut AdamState,
    x: &Tensor,
    z: &Tensor,
) -> Result<(f64, bool)> {
    let (loss, gd) = discriminator_grads(m, x, z, true)?;
    match gd {
        Some(gd) => {
            opt.step(&mut [&mut m.discriminator], &[&gd])?;
            Ok((loss, true))
        }
        None => Ok((loss, false)),
    }
}

/// Discriminator loss and, when it exceeds the threshold (or `gated` is false), its gradient.
fn discriminator_grads(
    m: &TimeGanModel,
    x: &Tensor,
    z: &Tensor,
    gated: bool,
) -> Result<(f64, Option<SeqNet>)> {
    let h = m.embedder.predict(x)?;
    let e_hat = m.generator.predict(z)?;
    let h_hat = m.supervisor.predict(&e_hat)?;
    let d: &SeqNet = &m.discriminator;
    let (y_real, c_real) = d.forward(&h)?;
    let (y_fake, c_fake) = d.forward(&h_hat)?;
    let (l_real, g_real) = bce_with_logits(&y_real, 1.0);
    let (l_fake, g_fake) = bce_with_logits(&y_fake, 0.0);
    let mut loss = l_real + l_fake;
    let extra = if m.config.three_stream {
        let (y_e, c_e) = d.forward(&e_hat)?;
        let (l_e, g_e) = bce_with_logits(&y_e, 0.0);
        loss += m.config.loss.gamma * l_e;
        Some((c_e, g_e))
    } else {
        None
    };
    if gated && !(loss > m.config.discriminator_threshold) {
        return Ok((loss, None));
    }
    let mut gd = d.zeros_like();
    d.backward(&c_real, &g_real, Some(&mut gd))?;
    d.backward(&c_fake, &g_fake, Some(&mut gd))?;
    if let Some((c_e, g_e)) = extra {
        d.backward(&c_e, &scaled(&g_e, m.config.loss.gamma), Some(&mut gd))?;
    }
    Ok((loss, Some(gd)))
}
