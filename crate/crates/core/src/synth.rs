//! Synthetic multi-speaker, multi-session corpus.
//!
//! Frames follow `x = warp(m + U h_s + G c_f) + ε` with a speaker factor `h_s`
//! shared by all sessions of a speaker, a session factor `c_f` shared by all
//! frames of a session and white noise `ε`. Loading matrices are scaled so the
//! speaker and session offsets have per-dimension standard deviation equal to
//! their configured scales.

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::linalg::{softplus, Matrix};
use crate::rng::Rng;
use crate::trainer::Dataset;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub dim: usize,
    pub speakers: usize,
    pub sessions_per_speaker: usize,
    pub frames_per_session: usize,
    pub speaker_rank: usize,
    pub speaker_scale: f64,
    pub session_rank: usize,
    pub session_scale: f64,
    pub noise: f64,
    /// Pass the mean through softplus before adding noise.
    pub warp: bool,
    /// Sessions per speaker held out for enrollment; each is cut into
    /// `enrol_utterances` contiguous utterances.
    pub enrol_sessions: usize,
    pub enrol_utterances: usize,
    /// Sessions per speaker held out as test utterances.
    pub test_sessions: usize,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 20,
            speakers: 50,
            sessions_per_speaker: 10,
            frames_per_session: 200,
            speaker_rank: 4,
            speaker_scale: 1.0,
            session_rank: 4,
            session_scale: 2.0,
            noise: 0.5,
            warp: true,
            enrol_sessions: 1,
            enrol_utterances: 3,
            test_sessions: 2,
            seed: 1,
        }
    }
}

impl SynthConfig {
    pub fn train_sessions(&self) -> usize {
        self.sessions_per_speaker
            .saturating_sub(self.enrol_sessions + self.test_sessions)
    }

    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("dim", self.dim),
            ("speakers", self.speakers),
            ("sessions_per_speaker", self.sessions_per_speaker),
            ("frames_per_session", self.frames_per_session),
            ("enrol_sessions", self.enrol_sessions),
            ("enrol_utterances", self.enrol_utterances),
            ("test_sessions", self.test_sessions),
        ];
        for (name, v) in counts {
            if v == 0 {
                return Err(Error::InvalidInput(format!("{name} must be at least 1")));
            }
        }
        for (name, v) in [
            ("speaker_scale", self.speaker_scale),
            ("session_scale", self.session_scale),
            ("noise", self.noise),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidInput(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if self.train_sessions() == 0 {
            return Err(Error::InvalidInput(
                "sessions_per_speaker must exceed enrol_sessions + test_sessions".into(),
            ));
        }
        if self.enrol_utterances > self.frames_per_session {
            return Err(Error::InvalidInput(
                "enrol_utterances cannot exceed frames_per_session".into(),
            ));
        }
        Ok(())
    }
}

/// Held-out utterance of a known speaker.
#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub speaker: u32,
    pub frames: Matrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub train: Dataset,
    pub enrol: Vec<Utterance>,
    pub test: Vec<Utterance>,
}

fn loading(rng: &mut Rng, dim: usize, rank: usize, scale: f64) -> Matrix {
    let sd = if rank == 0 {
        0.0
    } else {
        scale / libm::sqrt(rank as f64)
    };
    let mut m = Matrix::zeros(dim, rank);
    for v in m.as_mut_slice() {
        *v = sd * rng.standard_normal();
    }
    m
}

pub fn generate(cfg: &SynthConfig) -> Result<SynthCorpus> {
    cfg.validate()?;
    let root = Rng::new(cfg.seed);
    let mut model_rng = root.fork(0);
    let mean = model_rng.gaussian(cfg.dim, 1.0);
    let u = loading(&mut model_rng, cfg.dim, cfg.speaker_rank, cfg.speaker_scale);
    let g = loading(&mut model_rng, cfg.dim, cfg.session_rank, cfg.session_scale);
    let mut speaker_rng = root.fork(1);
    let mut session_rng = root.fork(2);
    let mut noise_rng = root.fork(3);

    let n_train = cfg.train_sessions();
    let mut train_frames = Vec::new();
    let mut train_session = Vec::new();
    let mut train_speaker = Vec::new();
    let mut enrol = Vec::new();
    let mut test = Vec::new();

    for s in 0..cfg.speakers {
        let h = speaker_rng.gaussian(cfg.speaker_rank, 1.0);
        let spk_offset = u.matvec(&h)?;
        for k in 0..cfg.sessions_per_speaker {
            let c = session_rng.gaussian(cfg.session_rank, 1.0);
            let ses_offset = g.matvec(&c)?;
            let centre: Vec<f64> = (0..cfg.dim)
                .map(|d| {
                    let v = mean[d] + spk_offset[d] + ses_offset[d];
                    if cfg.warp {
                        softplus(v)
                    } else {
                        v
                    }
                })
                .collect();
            let mut frames = Vec::with_capacity(cfg.frames_per_session * cfg.dim);
            for _ in 0..cfg.frames_per_session {
                for &cd in &centre {
                    frames.push(cd + cfg.noise * noise_rng.standard_normal());
                }
            }
            if k < n_train {
                let f = (s * n_train + k) as u32;
                train_frames.extend_from_slice(&frames);
                train_session.extend(core::iter::repeat_n(f, cfg.frames_per_session));
                train_speaker.extend(core::iter::repeat_n(s as u32, cfg.frames_per_session));
            } else if k < n_train + cfg.enrol_sessions {
                let n = cfg.frames_per_session;
                let parts = cfg.enrol_utterances;
                for p in 0..parts {
                    let (lo, hi) = (p * n / parts, (p + 1) * n / parts);
                    enrol.push(Utterance {
                        speaker: s as u32,
                        frames: Matrix::from_vec(
                            hi - lo,
                            cfg.dim,
                            frames[lo * cfg.dim..hi * cfg.dim].to_vec(),
                        )?,
                    });
                }
            } else {
                test.push(Utterance {
                    speaker: s as u32,
                    frames: Matrix::from_vec(cfg.frames_per_session, cfg.dim, frames)?,
                });
            }
        }
    }
    let total = train_session.len();
    let train = Dataset::new(
        Matrix::from_vec(total, cfg.dim, train_frames)?,
        train_session,
        train_speaker,
        cfg.speakers * n_train,
        cfg.speakers,
    )?;
    Ok(SynthCorpus { train, enrol, test })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small() -> SynthConfig {
        SynthConfig {
            dim: 6,
            speakers: 5,
            sessions_per_speaker: 6,
            frames_per_session: 30,
            ..SynthConfig::default()
        }
    }

    #[test]
    fn degenerate_generator_emits_the_warped_mean() {
        let cfg = SynthConfig {
            noise: 0.0,
            speaker_scale: 0.0,
            session_scale: 0.0,
            ..small()
        };
        let c = generate(&cfg).unwrap();
        let first = c.train.frame(0).to_vec();
        for t in 0..c.train.len() {
            assert_eq!(c.train.frame(t), &first[..]);
        }
        let mean = Rng::new(cfg.seed).fork(0).gaussian(cfg.dim, 1.0);
        for (a, m) in first.iter().zip(mean) {
            assert_eq!(*a, softplus(m));
        }
    }

    #[test]
    fn split_sizes_and_labels() {
        let cfg = small();
        let c = generate(&cfg).unwrap();
        assert_eq!(c.train.len(), 5 * 3 * 30);
        assert_eq!(c.train.num_sessions(), 15);
        assert_eq!(c.enrol.len(), 5 * 3);
        assert_eq!(
            c.enrol.iter().map(|u| u.frames.rows()).sum::<usize>(),
            5 * 30
        );
        assert_eq!(c.test.len(), 5 * 2);
        for f in 0..15 {
            let frames = c.train.session_frames(f);
            let spk = c.train.speaker_labels()[frames[0]];
            assert!(frames.iter().all(|&t| c.train.speaker_labels()[t] == spk));
        }
    }

    #[test]
    fn deterministic_per_seed() {
        assert_eq!(generate(&small()).unwrap(), generate(&small()).unwrap());
        let other = SynthConfig { seed: 2, ..small() };
        assert_ne!(generate(&small()).unwrap(), generate(&other).unwrap());
    }

    #[test]
    fn rejects_impossible_splits() {
        let cfg = SynthConfig {
            sessions_per_speaker: 3,
            ..small()
        };
        assert!(generate(&cfg).is_err());
        assert!(generate(&SynthConfig {
            speakers: 0,
            ..small()
        })
        .is_err());
        assert!(generate(&SynthConfig {
            noise: -1.0,
            ..small()
        })
        .is_err());
    }
}
