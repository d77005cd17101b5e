//! Paired benchmark: the same synthetic corpus, seeds and head pipeline for a
//! plain autoencoder and for its tied-factor counterpart, per factor-rank
//! grid point.

use std::fmt::Write as _;
use std::time::Instant;

use tiedfactor_core::metrics::{eer, min_dcf};
use tiedfactor_core::synth::generate;
use tiedfactor_core::{
    AdaptMethod, Architecture, CostParams, Dataset, Label, ScoreConfig, ScoreSet, StatsFactors,
    SynthConfig, TrainConfig, UbmModel,
};

use crate::error::{IoError, IoResult};
use crate::pipeline::{enrol_speakers, score_refs, train_ubm, trial_list, utterance_archive};
use crate::scores::TrialRef;

pub const DEFAULT_HIDDEN: usize = 64;
pub const DEFAULT_DEPTH: usize = 2;
pub const DEFAULT_BOTTLENECK: usize = 5;
pub const DEFAULT_RANK: usize = 4;
/// Prior precision of the head, used both for the UBM fit and for adaptation.
pub const DEFAULT_LAMBDA0: f64 = 3000.0;

/// `dim-64-64-5-64-64-dim` with the factor layer right after the bottleneck.
pub fn default_architecture(dim: usize, session_rank: usize, speaker_rank: usize) -> Architecture {
    Architecture::symmetric(
        dim,
        DEFAULT_HIDDEN,
        DEFAULT_DEPTH,
        DEFAULT_BOTTLENECK,
        session_rank,
        speaker_rank,
    )
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub synth: SynthConfig,
    /// Ranks in the architecture are replaced per grid point.
    pub train: TrainConfig,
    pub grid: Vec<(usize, usize)>,
    pub lambda0: f64,
    /// Replaces the UBM's prior precision for adaptation only.
    pub enrol_lambda0: Option<f64>,
    pub method: AdaptMethod,
    pub score: ScoreConfig,
    pub threads: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        let synth = SynthConfig::default();
        let train = TrainConfig::new(default_architecture(synth.dim, DEFAULT_RANK, DEFAULT_RANK));
        Self {
            synth,
            train,
            grid: vec![(DEFAULT_RANK, DEFAULT_RANK)],
            lambda0: DEFAULT_LAMBDA0,
            enrol_lambda0: None,
            method: AdaptMethod::MapPrior,
            score: ScoreConfig::default(),
            threads: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub system: &'static str,
    pub session_rank: usize,
    pub speaker_rank: usize,
    pub eer: f64,
    pub min_dcf08: f64,
    pub min_dcf10: f64,
    pub target_mean: f64,
    pub nontarget_mean: f64,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn evaluate(
    cfg: &BenchConfig,
    ubm: &mut UbmModel,
    enrol: &Dataset,
    test: &Dataset,
    refs: &[TrialRef],
) -> IoResult<ScoreSet> {
    if let Some(l) = cfg.enrol_lambda0 {
        ubm.head = ubm.head.with_lambda0(l)?;
    }
    let models = enrol_speakers(ubm, enrol, cfg.method, cfg.threads)?;
    let results = score_refs(&models, ubm, refs, test, &cfg.score, cfg.threads)?;
    let mut set = ScoreSet::default();
    for r in &results {
        let v = r.value(&cfg.score).ok_or_else(|| {
            IoError::Format(format!("trial {} {} failed", r.model_id, r.utterance_id))
        })?;
        match r.label {
            Label::Target => set.target.push(v),
            Label::Nontarget => set.nontarget.push(v),
            Label::Unknown => {}
        }
    }
    Ok(set)
}

fn row(system: &'static str, (r1, r2): (usize, usize), set: &ScoreSet) -> IoResult<BenchRow> {
    Ok(BenchRow {
        system,
        session_rank: r1,
        speaker_rank: r2,
        eer: eer(set)?,
        min_dcf08: min_dcf(set, &CostParams::DET08)?,
        min_dcf10: min_dcf(set, &CostParams::DET10)?,
        target_mean: mean(&set.target),
        nontarget_mean: mean(&set.nontarget),
    })
}

/// Trains the baseline once and one tied-factor system per grid point, then
/// enrolls, scores and evaluates each. Progress lines go to `progress`.
pub fn run_bench<P: FnMut(&str)>(cfg: &BenchConfig, mut progress: P) -> IoResult<Vec<BenchRow>> {
    if cfg.grid.is_empty() {
        return Err(IoError::Format("bench grid is empty".into()));
    }
    let corpus = generate(&cfg.synth)?;
    let s = cfg.synth.speakers;
    let enrol = utterance_archive(&corpus.enrol, cfg.synth.dim, s)?;
    let test = utterance_archive(&corpus.test, cfg.synth.dim, s)?;
    let refs = trial_list(&test, s);

    let mut system = |name: &str, tc: &TrainConfig, baseline: bool| -> IoResult<ScoreSet> {
        let t = Instant::now();
        let (mut ubm, _) = train_ubm(
            tc,
            &corpus.train,
            baseline,
            cfg.lambda0,
            StatsFactors::Trained,
            |_, _| {},
        )?;
        progress(&format!(
            "{name}: trained in {:.1}s",
            t.elapsed().as_secs_f64()
        ));
        let t = Instant::now();
        let set = evaluate(cfg, &mut ubm, &enrol, &test, &refs)?;
        progress(&format!(
            "{name}: scored {} trials in {:.1}s",
            refs.len(),
            t.elapsed().as_secs_f64()
        ));
        Ok(set)
    };

    let dnn = system("DNN", &cfg.train, true)?;
    let mut rows = Vec::new();
    for &(r1, r2) in &cfg.grid {
        let mut tc = cfg.train.clone();
        tc.architecture.session_rank = r1;
        tc.architecture.speaker_rank = r2;
        let set = system(&format!("TF2-DNN R1={r1} R2={r2}"), &tc, false)?;
        rows.push(row("DNN", (r1, r2), &dnn)?);
        rows.push(row("TF2-DNN", (r1, r2), &set)?);
    }
    Ok(rows)
}

pub fn format_bench(rows: &[BenchRow]) -> String {
    let mut s = String::from("system\tR1\tR2\tEER%\tminDCF08\tminDCF10\ttgt_mean\tnon_mean\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{}\t{}\t{}\t{:.3}\t{:.4}\t{:.4}\t{:.4}\t{:.4}",
            r.system,
            r.session_rank,
            r.speaker_rank,
            100.0 * r.eer,
            r.min_dcf08,
            r.min_dcf10,
            r.target_mean,
            r.nontarget_mean
        );
    }
    s
}
