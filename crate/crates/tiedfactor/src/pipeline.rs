//! Glue between archives, trial lists and the core pipeline, shared by the
//! command line and the benchmark.

use rayon::prelude::*;
use tiedfactor_core::adaptation::{build_ubm, enrol};
use tiedfactor_core::scoring::{index_models, score_one, TrialResult};
use tiedfactor_core::trainer::train_with;
use tiedfactor_core::{
    AdaptMethod, Dataset, Label, Matrix, ScoreConfig, SpeakerModel, StatsFactors, TrainConfig,
    Trial, UbmModel, Utterance,
};

use crate::archive::{session_matrix, speaker_matrix};
use crate::error::{IoError, IoResult};
use crate::scores::TrialRef;

pub fn model_id(speaker: usize) -> String {
    format!("spk{speaker}")
}

pub fn utterance_id(session: usize) -> String {
    format!("utt{session}")
}

fn parse_utterance_id(id: &str) -> Option<usize> {
    let n = id.strip_prefix("utt")?;
    if n.is_empty() || (n.len() > 1 && n.starts_with('0')) {
        return None;
    }
    n.parse().ok()
}

/// Packs held-out utterances into an archive with one session per utterance.
pub fn utterance_archive(utts: &[Utterance], dim: usize, speakers: usize) -> IoResult<Dataset> {
    let mut frames = Vec::new();
    let mut sessions = Vec::new();
    let mut spk = Vec::new();
    for (i, u) in utts.iter().enumerate() {
        frames.extend_from_slice(u.frames.as_slice());
        sessions.extend(std::iter::repeat_n(i as u32, u.frames.rows()));
        spk.extend(std::iter::repeat_n(u.speaker, u.frames.rows()));
    }
    let t = sessions.len();
    Ok(Dataset::new(
        Matrix::from_vec(t, dim, frames)?,
        sessions,
        spk,
        utts.len(),
        speakers,
    )?)
}

/// Every speaker model against every test utterance, labelled by whether the
/// utterance's speaker matches.
pub fn trial_list(test: &Dataset, speakers: usize) -> Vec<TrialRef> {
    let owner: Vec<Option<u32>> = (0..test.num_sessions())
        .map(|f| {
            test.session_frames(f)
                .first()
                .map(|&t| test.speaker_labels()[t])
        })
        .collect();
    let mut out = Vec::new();
    for s in 0..speakers {
        for (f, o) in owner.iter().enumerate() {
            let Some(o) = o else { continue };
            out.push(TrialRef {
                model_id: model_id(s),
                utterance_id: utterance_id(f),
                label: if *o as usize == s {
                    Label::Target
                } else {
                    Label::Nontarget
                },
            });
        }
    }
    out
}

pub fn train_ubm<F: FnMut(usize, f64)>(
    cfg: &TrainConfig,
    data: &Dataset,
    baseline_dnn: bool,
    lambda0: f64,
    stats_factors: StatsFactors,
    on_epoch: F,
) -> IoResult<(UbmModel, Vec<f64>)> {
    let mut cfg = cfg.clone();
    if baseline_dnn {
        cfg.architecture = cfg.architecture.without_factors();
    }
    let out = train_with(&cfg, data, on_epoch)?;
    let ubm = build_ubm(out.params, out.factors, data, lambda0, stats_factors)?;
    Ok((ubm, out.loss_trace))
}

fn pool(threads: usize) -> IoResult<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| IoError::Io(format!("thread pool: {e}")))
}

/// One model per speaker that has frames in `data`, with id `spk<label>`.
pub fn enrol_speakers(
    ubm: &UbmModel,
    data: &Dataset,
    method: AdaptMethod,
    threads: usize,
) -> IoResult<Vec<SpeakerModel>> {
    if data.dim() != ubm.feature_dim() {
        return Err(IoError::Format(format!(
            "enrollment archive has dimension {}, model expects {}",
            data.dim(),
            ubm.feature_dim()
        )));
    }
    let speakers: Vec<usize> = (0..data.num_speakers())
        .filter(|&s| !data.speaker_frames(s).is_empty())
        .collect();
    pool(threads)?.install(|| {
        speakers
            .par_iter()
            .map(|&s| Ok(enrol(ubm, model_id(s), &speaker_matrix(data, s), method)?))
            .collect()
    })
}

/// Scores trial references against utterances of `test`; a trial naming an
/// unknown model or utterance yields an error record.
pub fn score_refs(
    models: &[SpeakerModel],
    ubm: &UbmModel,
    refs: &[TrialRef],
    test: &Dataset,
    cfg: &ScoreConfig,
    threads: usize,
) -> IoResult<Vec<TrialResult>> {
    if test.dim() != ubm.feature_dim() {
        return Err(IoError::Format(format!(
            "test archive has dimension {}, model expects {}",
            test.dim(),
            ubm.feature_dim()
        )));
    }
    for m in models {
        m.validate_against(ubm)?;
    }
    let index = index_models(models)?;
    pool(threads)?.install(|| {
        Ok(refs
            .par_iter()
            .map(|r| match parse_utterance_id(&r.utterance_id) {
                Some(f) if f < test.num_sessions() && !test.session_frames(f).is_empty() => {
                    let trial = Trial {
                        model_id: r.model_id.clone(),
                        utterance_id: r.utterance_id.clone(),
                        frames: session_matrix(test, f),
                        label: r.label,
                    };
                    score_one(&index, ubm, &trial, cfg)
                }
                _ => TrialResult {
                    model_id: r.model_id.clone(),
                    utterance_id: r.utterance_id.clone(),
                    label: r.label,
                    score: Err(format!("unknown utterance {}", r.utterance_id)),
                },
            })
            .collect())
    })
}
