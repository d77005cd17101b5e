//! Two-step training of the network parameters and the tied latent factors.
//!
//! Every epoch first runs Adam minibatch updates on the network parameters
//! (weights, biases and loading matrices) over a seeded random permutation of
//! the frames, then takes one plain gradient step on every session and speaker
//! factor. A factor's gradient is the sum of the per-frame factor gradients of
//! all frames tied to it, accumulated in ascending frame order so the result
//! does not depend on how frames are stored.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::Matrix;
use crate::network::{
    adam_update, backward_accumulate, factor_gradients, forward, mse_cost, AdamState, Architecture,
    DropoutMask, GradientBundle, NetworkParams,
};
use crate::rng::Rng;

/// Labelled training frames. Session and speaker labels are zero-based.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    frames: Matrix,
    session: Vec<u32>,
    speaker: Vec<u32>,
    num_sessions: usize,
    num_speakers: usize,
    session_frames: Vec<Vec<usize>>,
    speaker_frames: Vec<Vec<usize>>,
}

impl Dataset {
    /// Validates labels and builds the session/speaker index tables. Every
    /// session must belong to a single speaker.
    pub fn new(
        frames: Matrix,
        session: Vec<u32>,
        speaker: Vec<u32>,
        num_sessions: usize,
        num_speakers: usize,
    ) -> Result<Self> {
        check_dim("dataset session labels", frames.rows(), session.len())?;
        check_dim("dataset speaker labels", frames.rows(), speaker.len())?;
        let mut session_frames = vec![Vec::new(); num_sessions];
        let mut speaker_frames = vec![Vec::new(); num_speakers];
        let mut owner: Vec<Option<u32>> = vec![None; num_sessions];
        for (t, (&f, &s)) in session.iter().zip(&speaker).enumerate() {
            let (fi, si) = (f as usize, s as usize);
            if fi >= num_sessions {
                return Err(Error::InvalidInput(format!(
                    "frame {t}: session {f} out of range (F = {num_sessions})"
                )));
            }
            if si >= num_speakers {
                return Err(Error::InvalidInput(format!(
                    "frame {t}: speaker {s} out of range (S = {num_speakers})"
                )));
            }
            match owner[fi] {
                Some(prev) if prev != s => {
                    return Err(Error::InvalidInput(format!(
                        "session {f} is labelled with speakers {prev} and {s}"
                    )))
                }
                _ => owner[fi] = Some(s),
            }
            session_frames[fi].push(t);
            speaker_frames[si].push(t);
        }
        Ok(Self {
            frames,
            session,
            speaker,
            num_sessions,
            num_speakers,
            session_frames,
            speaker_frames,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.rows() == 0
    }

    pub fn dim(&self) -> usize {
        self.frames.cols()
    }

    pub fn frames(&self) -> &Matrix {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &[f64] {
        self.frames.row(t)
    }

    pub fn session_labels(&self) -> &[u32] {
        &self.session
    }

    pub fn speaker_labels(&self) -> &[u32] {
        &self.speaker
    }

    pub fn num_sessions(&self) -> usize {
        self.num_sessions
    }

    pub fn num_speakers(&self) -> usize {
        self.num_speakers
    }

    /// Frames of session `f`, ascending.
    pub fn session_frames(&self, f: usize) -> &[usize] {
        &self.session_frames[f]
    }

    /// Frames of speaker `s`, ascending.
    pub fn speaker_frames(&self, s: usize) -> &[usize] {
        &self.speaker_frames[s]
    }
}

/// Session factor table (`F × R1`) and speaker factor table (`S × R2`).
#[derive(Debug, Clone, PartialEq)]
pub struct LatentFactors {
    pub session: Matrix,
    pub speaker: Matrix,
}

impl LatentFactors {
    pub fn zeros(
        num_sessions: usize,
        session_rank: usize,
        num_speakers: usize,
        speaker_rank: usize,
    ) -> Self {
        Self {
            session: Matrix::zeros(num_sessions, session_rank),
            speaker: Matrix::zeros(num_speakers, speaker_rank),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub architecture: Architecture,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr_theta: f64,
    pub lr_session: f64,
    pub lr_speaker: f64,
    /// Initialisation standard deviations of weights, session factors and
    /// speaker factors.
    pub prior_theta: f64,
    pub prior_session: f64,
    pub prior_speaker: f64,
    pub dropout: f64,
    /// Adds the Gaussian prior's pull toward zero to the factor gradients.
    pub factor_l2: bool,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(architecture: Architecture) -> Self {
        Self {
            architecture,
            epochs: 15,
            batch_size: 64,
            lr_theta: 1e-3,
            lr_session: 5e-2,
            lr_speaker: 1e-2,
            prior_theta: 0.1,
            prior_session: 1.0,
            prior_speaker: 1.0,
            dropout: 0.0,
            factor_l2: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidInput(msg.into()));
        if self.epochs == 0 {
            return bad("epochs must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch size must be at least 1");
        }
        for (name, v) in [
            ("lr_theta", self.lr_theta),
            ("lr_session", self.lr_session),
            ("lr_speaker", self.lr_speaker),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("prior_theta", self.prior_theta),
            ("prior_session", self.prior_session),
            ("prior_speaker", self.prior_speaker),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout must lie in [0, 1)");
        }
        self.architecture.layer_specs().map(|_| ())
    }
}

// RNG streams forked from the configured seed.
const STREAM_WEIGHTS: u64 = 0;
const STREAM_SESSION: u64 = 1;
const STREAM_SPEAKER: u64 = 2;
const STREAM_SHUFFLE: u64 = 3;
const STREAM_DROPOUT: u64 = 4;

/// Draws network parameters and factor tables from their priors.
pub fn init(
    cfg: &TrainConfig,
    num_sessions: usize,
    num_speakers: usize,
) -> Result<(NetworkParams, LatentFactors)> {
    let arch = &cfg.architecture;
    let specs = arch.layer_specs()?;
    let root = Rng::new(cfg.seed);
    let params = NetworkParams::random(
        &specs,
        arch.session_rank,
        arch.speaker_rank,
        cfg.prior_theta,
        &mut root.fork(STREAM_WEIGHTS),
    )?;
    let mut z = LatentFactors::zeros(
        num_sessions,
        arch.session_rank,
        num_speakers,
        arch.speaker_rank,
    );
    let mut rs = root.fork(STREAM_SESSION);
    for v in z.session.as_mut_slice() {
        *v = cfg.prior_session * rs.standard_normal();
    }
    let mut rk = root.fork(STREAM_SPEAKER);
    for v in z.speaker.as_mut_slice() {
        *v = cfg.prior_speaker * rk.standard_normal();
    }
    Ok((params, z))
}

fn check_factors(params: &NetworkParams, data: &Dataset, z: &LatentFactors) -> Result<()> {
    check_dim("session factor rows", data.num_sessions(), z.session.rows())?;
    check_dim(
        "session factor cols",
        params.session_rank(),
        z.session.cols(),
    )?;
    check_dim("speaker factor rows", data.num_speakers(), z.speaker.rows())?;
    check_dim(
        "speaker factor cols",
        params.speaker_rank(),
        z.speaker.cols(),
    )?;
    check_dim("dataset feature dim", params.input_dim(), data.dim())
}

/// Mean cost and parameter gradient over `batch`, each frame using its own
/// session and speaker factors. Frames are reduced in the order given.
pub fn batch_gradient(
    params: &NetworkParams,
    data: &Dataset,
    z: &LatentFactors,
    batch: &[usize],
    dropout: f64,
    rng: &mut Rng,
) -> Result<(f64, GradientBundle)> {
    if batch.is_empty() {
        return Err(Error::Empty("minibatch"));
    }
    check_factors(params, data, z)?;
    let mut acc = GradientBundle::zeros_like(params);
    let mut cost = 0.0;
    for &t in batch {
        if t >= data.len() {
            return Err(Error::InvalidInput(format!("frame index {t} out of range")));
        }
        let x = data.frame(t);
        let f = data.session[t] as usize;
        let s = data.speaker[t] as usize;
        let mask = if dropout > 0.0 {
            Some(DropoutMask::sample(params, dropout, rng)?)
        } else {
            None
        };
        let acts = forward(params, x, z.session.row(f), z.speaker.row(s), mask.as_ref())?;
        let (c, d) = mse_cost(acts.output(), x)?;
        cost += c;
        backward_accumulate(params, &acts, &d, &mut acc)?;
    }
    let inv = 1.0 / batch.len() as f64;
    acc.scale_params(inv);
    for v in acc.dz_session.iter_mut().chain(acc.dz_speaker.iter_mut()) {
        *v *= inv;
    }
    Ok((cost * inv, acc))
}

/// One Adam update of the network parameters on the mean cost of `batch`.
/// Returns the batch's mean cost before the update.
#[allow(clippy::too_many_arguments)]
pub fn step_theta(
    params: &mut NetworkParams,
    adam: &mut AdamState,
    data: &Dataset,
    z: &LatentFactors,
    batch: &[usize],
    lr: f64,
    dropout: f64,
    rng: &mut Rng,
) -> Result<f64> {
    let (cost, grads) = batch_gradient(params, data, z, batch, dropout, rng)?;
    adam_update(adam, params, &grads, lr)?;
    Ok(cost)
}

/// Summed factor gradients for every session and speaker, plus the mean
/// frame cost. Dropout is off.
pub fn tied_gradients(
    params: &NetworkParams,
    data: &Dataset,
    z: &LatentFactors,
) -> Result<(Matrix, Matrix, f64)> {
    check_factors(params, data, z)?;
    let mut g_session = Matrix::zeros(z.session.rows(), z.session.cols());
    let mut g_speaker = Matrix::zeros(z.speaker.rows(), z.speaker.cols());
    let mut cost = 0.0;
    for t in 0..data.len() {
        let x = data.frame(t);
        let f = data.session[t] as usize;
        let s = data.speaker[t] as usize;
        let acts = forward(params, x, z.session.row(f), z.speaker.row(s), None)?;
        let (c, d) = mse_cost(acts.output(), x)?;
        cost += c;
        let (dz1, dz2) = factor_gradients(params, &acts, &d)?;
        for (a, v) in g_session.row_mut(f).iter_mut().zip(&dz1) {
            *a += v;
        }
        for (a, v) in g_speaker.row_mut(s).iter_mut().zip(&dz2) {
            *a += v;
        }
    }
    let mean = if data.is_empty() {
        0.0
    } else {
        cost / data.len() as f64
    };
    Ok((g_session, g_speaker, mean))
}

/// Optional Gaussian-prior pull applied by [`step_factors`]: the factor
/// gradients gain `z / stddev²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FactorPrior {
    pub session_stddev: f64,
    pub speaker_stddev: f64,
}

/// One gradient step on every tied factor, both tables computed from the
/// same pre-update factors. Returns the mean frame cost before the step.
pub fn step_factors(
    params: &NetworkParams,
    data: &Dataset,
    z: &mut LatentFactors,
    lr_session: f64,
    lr_speaker: f64,
    prior: Option<FactorPrior>,
) -> Result<f64> {
    let (mut g1, mut g2, cost) = tied_gradients(params, data, z)?;
    if let Some(p) = prior {
        if p.session_stddev > 0.0 {
            let prec = 1.0 / (p.session_stddev * p.session_stddev);
            g1 = g1.add_scaled(prec, &z.session)?;
        }
        if p.speaker_stddev > 0.0 {
            let prec = 1.0 / (p.speaker_stddev * p.speaker_stddev);
            g2 = g2.add_scaled(prec, &z.speaker)?;
        }
    }
    z.session = z.session.add_scaled(-lr_session, &g1)?;
    z.speaker = z.speaker.add_scaled(-lr_speaker, &g2)?;
    Ok(cost)
}

/// Mean dropout-free cost over all frames.
pub fn dataset_cost(params: &NetworkParams, data: &Dataset, z: &LatentFactors) -> Result<f64> {
    check_factors(params, data, z)?;
    if data.is_empty() {
        return Ok(0.0);
    }
    let mut cost = 0.0;
    for t in 0..data.len() {
        let x = data.frame(t);
        let f = data.session[t] as usize;
        let s = data.speaker[t] as usize;
        let acts = forward(params, x, z.session.row(f), z.speaker.row(s), None)?;
        cost += mse_cost(acts.output(), x)?.0;
    }
    Ok(cost / data.len() as f64)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutput {
    pub params: NetworkParams,
    pub factors: LatentFactors,
    /// Dropout-free mean training cost per epoch, measured after that epoch's
    /// parameter updates and before its factor step.
    pub loss_trace: Vec<f64>,
}

pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutput> {
    train_with(cfg, data, |_, _| {})
}

/// [`train`] with a callback receiving `(epoch, loss)` after every epoch.
pub fn train_with<F: FnMut(usize, f64)>(
    cfg: &TrainConfig,
    data: &Dataset,
    mut on_epoch: F,
) -> Result<TrainOutput> {
    cfg.validate()?;
    if data.is_empty() {
        return Err(Error::Empty("training dataset"));
    }
    let (mut params, mut z) = init(cfg, data.num_sessions(), data.num_speakers())?;
    check_factors(&params, data, &z)?;
    let mut adam = AdamState::for_params(&params);
    let root = Rng::new(cfg.seed);
    let mut shuffle_rng = root.fork(STREAM_SHUFFLE);
    let mut dropout_rng = root.fork(STREAM_DROPOUT);
    let prior = cfg.factor_l2.then_some(FactorPrior {
        session_stddev: cfg.prior_session,
        speaker_stddev: cfg.prior_speaker,
    });
    let mut order: Vec<usize> = (0..data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        order.sort_unstable();
        shuffle_rng.shuffle(&mut order);
        for batch in order.chunks(cfg.batch_size) {
            step_theta(
                &mut params,
                &mut adam,
                data,
                &z,
                batch,
                cfg.lr_theta,
                cfg.dropout,
                &mut dropout_rng,
            )?;
        }
        let loss = if params.has_factors() {
            step_factors(&params, data, &mut z, cfg.lr_session, cfg.lr_speaker, prior)?
        } else {
            dataset_cost(&params, data, &z)?
        };
        if !loss.is_finite() || !params.is_finite() {
            return Err(Error::NonFinite("training loss"));
        }
        trace.push(loss);
        on_epoch(epoch, loss);
    }
    Ok(TrainOutput {
        params,
        factors: z,
        loss_trace: trace,
    })
}
