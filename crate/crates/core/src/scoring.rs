//! Log-likelihood-ratio scoring of test utterances against enrolled speakers.
//!
//! Every frame is forwarded once with zero factors; its penultimate output
//! feeds both the speaker head and the UBM head, which share the UBM variances.
//! A speaker enrolled with a factor gets its own numerator pass with that
//! factor injected. Scores are per-frame means of the log ratio.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::adaptation::{SpeakerModel, UbmModel};
use crate::error::{check_dim, Error, Result};
use crate::linalg::{log_sum_exp, logpdf_diag_gaussian, Matrix};
use crate::network::{forward, DropoutMask};
use crate::rng::{stream_id, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Label {
    Target,
    Nontarget,
    Unknown,
}

impl Label {
    pub fn as_str(self) -> &'static str {
        match self {
            Label::Target => "tgt",
            Label::Nontarget => "non",
            Label::Unknown => "unk",
        }
    }

    pub fn parse(s: &str) -> Option<Label> {
        match s {
            "tgt" => Some(Label::Target),
            "non" => Some(Label::Nontarget),
            "unk" => Some(Label::Unknown),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub model_id: String,
    pub utterance_id: String,
    pub frames: Matrix,
    pub label: Label,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ScoreMethod {
    Deterministic,
    McDropout { p: f64, samples: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialScore {
    /// Mean log ratio per frame.
    pub llr: f64,
    pub frames: usize,
    pub method: ScoreMethod,
}

impl TrialScore {
    /// Utterance-level log ratio (the per-frame mean times the frame count).
    pub fn total(&self) -> f64 {
        self.llr * self.frames as f64
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScoreConfig {
    /// Monte-Carlo dropout `(p, samples)`; `None` scores deterministically.
    pub mc: Option<(f64, usize)>,
    pub seed: u64,
    /// Report per-frame means; otherwise utterance sums.
    pub normalize: bool,
    /// One set of masks per utterance instead of per frame.
    pub shared_masks: bool,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        Self {
            mc: None,
            seed: 0,
            normalize: true,
            shared_masks: false,
        }
    }
}

fn check_trial(spk: &SpeakerModel, ubm: &UbmModel, frames: &Matrix) -> Result<()> {
    if frames.rows() == 0 {
        return Err(Error::Empty("test utterance"));
    }
    check_dim("test feature dim", ubm.feature_dim(), frames.cols())?;
    spk.validate_against(ubm)
}

fn head_mean(b: &Matrix, y: &[f64]) -> Vec<f64> {
    let mut out = b.row(b.rows() - 1).to_vec();
    for (i, &yi) in y.iter().enumerate() {
        crate::linalg::axpy(yi, b.row(i), &mut out);
    }
    out
}

/// Numerator and denominator log-likelihoods of one frame under one mask.
fn frame_logliks(
    spk: &SpeakerModel,
    ubm: &UbmModel,
    x: &[f64],
    mask: Option<&DropoutMask>,
) -> Result<(f64, f64)> {
    let z1 = vec![0.0; ubm.params.session_rank()];
    let z2 = vec![0.0; ubm.params.speaker_rank()];
    let acts = forward(&ubm.params, x, &z1, &z2, mask)?;
    let den = logpdf_diag_gaussian(
        x,
        &head_mean(&ubm.head.b, acts.penultimate()),
        &ubm.head.psi,
    )?;
    let num = match &spk.z_speaker {
        Some(z) => {
            let adapted = forward(&ubm.params, x, &z1, z, mask)?;
            logpdf_diag_gaussian(x, &head_mean(&spk.b, adapted.penultimate()), &ubm.head.psi)?
        }
        None => logpdf_diag_gaussian(x, &head_mean(&spk.b, acts.penultimate()), &ubm.head.psi)?,
    };
    Ok((num, den))
}

pub fn score_trial(spk: &SpeakerModel, ubm: &UbmModel, frames: &Matrix) -> Result<TrialScore> {
    check_trial(spk, ubm, frames)?;
    let mut sum = 0.0;
    for t in 0..frames.rows() {
        let (num, den) = frame_logliks(spk, ubm, frames.row(t), None)?;
        sum += num - den;
    }
    finish(sum, frames.rows(), ScoreMethod::Deterministic)
}

fn finish(sum: f64, n: usize, method: ScoreMethod) -> Result<TrialScore> {
    let llr = sum / n as f64;
    if !llr.is_finite() {
        return Err(Error::NonFinite("trial score"));
    }
    Ok(TrialScore {
        llr,
        frames: n,
        method,
    })
}

/// Scores with dropout marginalized by `samples` Monte-Carlo masks per frame:
/// each head's likelihood is averaged in the probability domain before the
/// ratio is taken. Numerator and denominator see the same masks.
pub fn score_trial_mc(
    spk: &SpeakerModel,
    ubm: &UbmModel,
    frames: &Matrix,
    p: f64,
    samples: usize,
    shared_masks: bool,
    rng: &mut Rng,
) -> Result<TrialScore> {
    if samples == 0 {
        return Err(Error::InvalidInput(
            "Monte-Carlo scoring needs at least one sample".into(),
        ));
    }
    if !(0.0..1.0).contains(&p) {
        return Err(Error::InvalidInput(alloc::format!(
            "dropout probability must lie in [0, 1), got {p}"
        )));
    }
    if p == 0.0 {
        return score_trial(spk, ubm, frames);
    }
    check_trial(spk, ubm, frames)?;
    let shared: Vec<DropoutMask> = if shared_masks {
        (0..samples)
            .map(|_| DropoutMask::sample(&ubm.params, p, rng))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };
    let ln_l = libm::log(samples as f64);
    let mut nums = vec![0.0; samples];
    let mut dens = vec![0.0; samples];
    let mut sum = 0.0;
    for t in 0..frames.rows() {
        let x = frames.row(t);
        for l in 0..samples {
            let sampled;
            let mask = if shared_masks {
                &shared[l]
            } else {
                sampled = DropoutMask::sample(&ubm.params, p, rng)?;
                &sampled
            };
            let (num, den) = frame_logliks(spk, ubm, x, Some(mask))?;
            nums[l] = num;
            dens[l] = den;
        }
        sum += (log_sum_exp(&nums) - ln_l) - (log_sum_exp(&dens) - ln_l);
    }
    finish(sum, frames.rows(), ScoreMethod::McDropout { p, samples })
}

/// Scoring outcome for one trial of a trial set.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub model_id: String,
    pub utterance_id: String,
    pub label: Label,
    pub score: core::result::Result<TrialScore, String>,
}

impl TrialResult {
    /// The value written to a score table under `cfg`.
    pub fn value(&self, cfg: &ScoreConfig) -> Option<f64> {
        self.score
            .as_ref()
            .ok()
            .map(|s| if cfg.normalize { s.llr } else { s.total() })
    }
}

/// Random stream for one trial, derived from the master seed and the trial's
/// identifiers only, so results do not depend on trial order.
pub fn trial_rng(seed: u64, model_id: &str, utterance_id: &str) -> Rng {
    let mut key = Vec::with_capacity(model_id.len() + utterance_id.len() + 1);
    key.extend_from_slice(model_id.as_bytes());
    key.push(0);
    key.extend_from_slice(utterance_id.as_bytes());
    Rng::new(seed).fork(stream_id(&key))
}

/// Speaker models indexed by id.
pub fn index_models(models: &[SpeakerModel]) -> Result<BTreeMap<&str, &SpeakerModel>> {
    let mut map = BTreeMap::new();
    for m in models {
        if map.insert(m.id.as_str(), m).is_some() {
            return Err(Error::InvalidInput(alloc::format!(
                "duplicate speaker model id {}",
                m.id
            )));
        }
    }
    Ok(map)
}

pub fn score_one(
    models: &BTreeMap<&str, &SpeakerModel>,
    ubm: &UbmModel,
    trial: &Trial,
    cfg: &ScoreConfig,
) -> TrialResult {
    let score = match models.get(trial.model_id.as_str()) {
        None => Err(alloc::format!("unknown model {}", trial.model_id)),
        Some(spk) => match cfg.mc {
            None => score_trial(spk, ubm, &trial.frames),
            Some((p, samples)) => {
                let mut rng = trial_rng(cfg.seed, &trial.model_id, &trial.utterance_id);
                score_trial_mc(
                    spk,
                    ubm,
                    &trial.frames,
                    p,
                    samples,
                    cfg.shared_masks,
                    &mut rng,
                )
            }
        }
        .map_err(|e| e.to_string()),
    };
    TrialResult {
        model_id: trial.model_id.clone(),
        utterance_id: trial.utterance_id.clone(),
        label: trial.label,
        score,
    }
}

/// Scores every trial; a failing trial yields an error record and the rest
/// still run.
pub fn score_trialset(
    models: &[SpeakerModel],
    ubm: &UbmModel,
    trials: &[Trial],
    cfg: &ScoreConfig,
) -> Result<Vec<TrialResult>> {
    let index = index_models(models)?;
    Ok(trials
        .iter()
        .map(|t| score_one(&index, ubm, t, cfg))
        .collect())
}
