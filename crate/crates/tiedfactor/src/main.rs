#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use tiedfactor_core::adaptation::compute_enrol_stats;
use tiedfactor_core::metrics::{det_points, eer, min_dcf};
use tiedfactor_core::synth::generate;
use tiedfactor_core::{
    AdaptMethod, CostParams, ScoreConfig, StatsFactors, SynthConfig, TrainConfig,
};

use tiedfactor::archive::{import_tsv, read_archive, speaker_matrix, write_archive};
use tiedfactor::bench::{
    default_architecture, format_bench, run_bench, BenchConfig, DEFAULT_BOTTLENECK, DEFAULT_DEPTH,
    DEFAULT_HIDDEN, DEFAULT_LAMBDA0, DEFAULT_RANK,
};
use tiedfactor::fsutil::{write_atomic, Staged};
use tiedfactor::model::{load_speakers, load_ubm, save_model, Model};
use tiedfactor::pipeline::{
    enrol_speakers, model_id, score_refs, train_ubm, trial_list, utterance_archive,
};
use tiedfactor::scores::{
    format_det, format_loss_trace, format_score_table, format_trials, read_score_table,
    read_trials, score_set, ScoreLine,
};
use tiedfactor::{IoError, IoResult};

const DEFAULT_ALPHA: f64 = 0.01;
const DEFAULT_FACTOR_ITERATIONS: usize = 20;
const DEFAULT_FACTOR_RATE: f64 = 0.05;
const DEFAULT_MC_SAMPLES: usize = 16;

fn synth_default() -> SynthConfig {
    SynthConfig::default()
}

fn train_default() -> TrainConfig {
    TrainConfig::new(default_architecture(20, DEFAULT_RANK, DEFAULT_RANK))
}

/// Tied speaker/session factor autoencoder speaker verification.
#[derive(Parser)]
#[command(name = "tiedfactor", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate train/enrol/test archives and a trial list.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        synth: SynthArgs,
    },
    /// Convert `session<TAB>speaker<TAB>f1..fD` text into a feature archive.
    Import {
        #[arg(long)]
        tsv: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train the autoencoder and fit the UBM head.
    TrainUbm {
        /// Training archive.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Write the per-epoch loss as `epoch<TAB>loss`.
        #[arg(long)]
        loss_trace: Option<PathBuf>,
        /// Same architecture with every factor connection removed.
        #[arg(long)]
        baseline_dnn: bool,
        /// Factors injected while collecting UBM statistics.
        #[arg(long, value_enum, default_value_t = StatsFactorsArg::Trained)]
        stats_factors: StatsFactorsArg,
        /// Prior precision of the head, kept in the model for adaptation.
        #[arg(long, default_value_t = DEFAULT_LAMBDA0)]
        ubm_lambda0: f64,
        #[command(flatten)]
        train: TrainArgs,
    },
    /// Adapt one speaker model per speaker of an enrollment archive.
    Enrol {
        #[arg(long)]
        ubm: PathBuf,
        /// Enrollment archive; frames are grouped by speaker label.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Also save each speaker's enrollment statistics.
        #[arg(long)]
        stats_out: Option<PathBuf>,
        #[command(flatten)]
        enrol: EnrolArgs,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Score a trial list into a `model utterance score label` table.
    Score {
        #[arg(long)]
        ubm: PathBuf,
        #[arg(long)]
        models: PathBuf,
        /// Test archive; utterance `uttN` is session N.
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        trials: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        score: ScoreArgs,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// EER and minimum detection costs of a score table.
    Eval {
        #[arg(long)]
        scores: PathBuf,
        /// Write DET points as `p_fa<TAB>p_miss`.
        #[arg(long)]
        det: Option<PathBuf>,
    },
    /// Synthesize, train the baseline and the tied-factor system, score and compare.
    Bench {
        /// Factor ranks as `R1xR2`, comma separated.
        #[arg(long, default_value = "4x4", value_parser = parse_grid)]
        grid: Grid,
        #[arg(long, default_value_t = DEFAULT_LAMBDA0)]
        ubm_lambda0: f64,
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        train: TrainArgs,
        #[command(flatten)]
        enrol: EnrolArgs,
        #[command(flatten)]
        score: ScoreArgs,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum StatsFactorsArg {
    Trained,
    Zero,
}

#[derive(Clone, Copy, PartialEq, ValueEnum)]
enum MethodArg {
    Map,
    Interpolated,
    Factor,
    FactorInterpolated,
}

#[derive(Clone, Debug)]
struct Grid(Vec<(usize, usize)>);

fn parse_grid(s: &str) -> Result<Grid, String> {
    let mut out = Vec::new();
    for part in s.split(',') {
        let (a, b) = part
            .trim()
            .split_once('x')
            .ok_or_else(|| format!("grid point {part:?} is not R1xR2"))?;
        let r1 = a.parse().map_err(|e| format!("{part:?}: {e}"))?;
        let r2 = b.parse().map_err(|e| format!("{part:?}: {e}"))?;
        out.push((r1, r2));
    }
    Ok(Grid(out))
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = synth_default().seed)]
    seed: u64,
    #[arg(long, default_value_t = synth_default().dim)]
    dim: usize,
    #[arg(long, default_value_t = synth_default().speakers)]
    speakers: usize,
    #[arg(long, default_value_t = synth_default().sessions_per_speaker)]
    sessions_per_speaker: usize,
    #[arg(long, default_value_t = synth_default().frames_per_session)]
    frames_per_session: usize,
    #[arg(long, default_value_t = synth_default().speaker_rank)]
    true_speaker_rank: usize,
    #[arg(long, default_value_t = synth_default().speaker_scale)]
    speaker_scale: f64,
    #[arg(long, default_value_t = synth_default().session_rank)]
    true_session_rank: usize,
    #[arg(long, default_value_t = synth_default().session_scale)]
    session_scale: f64,
    #[arg(long, default_value_t = synth_default().noise)]
    noise: f64,
    /// Skip the softplus warp of frame means.
    #[arg(long)]
    no_warp: bool,
    #[arg(long, default_value_t = synth_default().enrol_sessions)]
    enrol_sessions: usize,
    #[arg(long, default_value_t = synth_default().enrol_utterances)]
    enrol_utterances: usize,
    #[arg(long, default_value_t = synth_default().test_sessions)]
    test_sessions: usize,
}

impl SynthArgs {
    fn config(&self) -> SynthConfig {
        SynthConfig {
            dim: self.dim,
            speakers: self.speakers,
            sessions_per_speaker: self.sessions_per_speaker,
            frames_per_session: self.frames_per_session,
            speaker_rank: self.true_speaker_rank,
            speaker_scale: self.speaker_scale,
            session_rank: self.true_session_rank,
            session_scale: self.session_scale,
            noise: self.noise,
            warp: !self.no_warp,
            enrol_sessions: self.enrol_sessions,
            enrol_utterances: self.enrol_utterances,
            test_sessions: self.test_sessions,
            seed: self.seed,
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long, default_value_t = DEFAULT_HIDDEN)]
    hidden: usize,
    /// Hidden layers on each side of the bottleneck.
    #[arg(long, default_value_t = DEFAULT_DEPTH)]
    depth: usize,
    #[arg(long, default_value_t = DEFAULT_BOTTLENECK)]
    bottleneck: usize,
    #[arg(long, default_value_t = DEFAULT_RANK)]
    session_rank: usize,
    #[arg(long, default_value_t = DEFAULT_RANK)]
    speaker_rank: usize,
    #[arg(long, default_value_t = train_default().epochs)]
    epochs: usize,
    #[arg(long, default_value_t = train_default().batch_size)]
    batch_size: usize,
    #[arg(long, default_value_t = train_default().lr_theta)]
    lr_theta: f64,
    #[arg(long, default_value_t = train_default().lr_session)]
    lr_session: f64,
    #[arg(long, default_value_t = train_default().lr_speaker)]
    lr_speaker: f64,
    #[arg(long, default_value_t = train_default().prior_theta)]
    prior_theta: f64,
    #[arg(long, default_value_t = train_default().prior_session)]
    prior_session: f64,
    #[arg(long, default_value_t = train_default().prior_speaker)]
    prior_speaker: f64,
    /// Training dropout probability.
    #[arg(long, default_value_t = train_default().dropout)]
    dropout: f64,
    /// Drop the prior's pull toward zero from the factor updates.
    #[arg(long)]
    no_factor_l2: bool,
    #[arg(long = "train-seed", default_value_t = train_default().seed)]
    train_seed: u64,
}

impl TrainArgs {
    fn config(&self, dim: usize) -> TrainConfig {
        let arch = tiedfactor_core::Architecture::symmetric(
            dim,
            self.hidden,
            self.depth,
            self.bottleneck,
            self.session_rank,
            self.speaker_rank,
        );
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr_theta: self.lr_theta,
            lr_session: self.lr_session,
            lr_speaker: self.lr_speaker,
            prior_theta: self.prior_theta,
            prior_session: self.prior_session,
            prior_speaker: self.prior_speaker,
            dropout: self.dropout,
            factor_l2: !self.no_factor_l2,
            seed: self.train_seed,
            ..TrainConfig::new(arch)
        }
    }
}

#[derive(Args)]
struct EnrolArgs {
    /// Adaptation method; defaults to interpolated when --alpha is given, map otherwise.
    #[arg(long, value_enum)]
    method: Option<MethodArg>,
    /// Weight of the UBM statistics in interpolated adaptation.
    #[arg(long)]
    alpha: Option<f64>,
    /// Interpolate per-frame statistics instead of raw sums.
    #[arg(long)]
    normalize_stats: bool,
    /// Prior precision for adaptation; defaults to the one stored in the UBM.
    #[arg(long)]
    lambda0: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_FACTOR_ITERATIONS)]
    factor_iterations: usize,
    #[arg(long, default_value_t = DEFAULT_FACTOR_RATE)]
    factor_rate: f64,
}

impl EnrolArgs {
    fn method(&self) -> Result<AdaptMethod, String> {
        let alpha = self.alpha.unwrap_or(DEFAULT_ALPHA);
        if !(0.0..=1.0).contains(&alpha) {
            return Err(format!("--alpha must be in [0, 1], got {alpha}"));
        }
        if let Some(l) = self.lambda0 {
            if !(l >= 0.0) || !l.is_finite() {
                return Err(format!("--lambda0 must be >= 0, got {l}"));
            }
        }
        let normalize = self.normalize_stats;
        let method = self.method.unwrap_or(if self.alpha.is_some() {
            MethodArg::Interpolated
        } else {
            MethodArg::Map
        });
        if matches!(method, MethodArg::Factor | MethodArg::FactorInterpolated) {
            if self.factor_iterations == 0 {
                return Err("--factor-iterations must be at least 1".into());
            }
            if !(self.factor_rate > 0.0) || !self.factor_rate.is_finite() {
                return Err(format!(
                    "--factor-rate must be positive, got {}",
                    self.factor_rate
                ));
            }
        }
        Ok(match method {
            MethodArg::Map => AdaptMethod::MapPrior,
            MethodArg::Interpolated => AdaptMethod::Interpolated { alpha, normalize },
            MethodArg::Factor => AdaptMethod::Factor {
                iterations: self.factor_iterations,
                rate: self.factor_rate,
            },
            MethodArg::FactorInterpolated => AdaptMethod::FactorInterpolated {
                iterations: self.factor_iterations,
                rate: self.factor_rate,
                alpha,
                normalize,
            },
        })
    }
}

#[derive(Args)]
struct ScoreArgs {
    /// Dropout probability for Monte Carlo scoring; absent means deterministic.
    #[arg(long)]
    mc_dropout: Option<f64>,
    #[arg(long, default_value_t = DEFAULT_MC_SAMPLES)]
    mc_samples: usize,
    /// One mask per sample shared by numerator and denominator.
    #[arg(long)]
    shared_masks: bool,
    /// Report summed instead of per-frame log-likelihood ratios.
    #[arg(long)]
    unnormalized: bool,
    #[arg(long = "score-seed", default_value_t = ScoreConfig::default().seed)]
    score_seed: u64,
}

impl ScoreArgs {
    fn config(&self) -> Result<ScoreConfig, String> {
        let mc = match self.mc_dropout {
            None => None,
            Some(p) if (0.0..1.0).contains(&p) => {
                if self.mc_samples == 0 {
                    return Err("--mc-samples must be at least 1".into());
                }
                Some((p, self.mc_samples))
            }
            Some(p) => return Err(format!("--mc-dropout must be in [0, 1), got {p}")),
        };
        Ok(ScoreConfig {
            mc,
            seed: self.score_seed,
            normalize: !self.unnormalized,
            shared_masks: self.shared_masks,
        })
    }
}

fn defaults_table() -> String {
    let s = synth_default();
    let t = train_default();
    let rows: Vec<(&str, String)> = vec![
        ("synth --seed", s.seed.to_string()),
        (
            "synth --dim / --speakers",
            format!("{} / {}", s.dim, s.speakers),
        ),
        (
            "synth sessions: total / enrol / test",
            format!(
                "{} / {} / {}",
                s.sessions_per_speaker, s.enrol_sessions, s.test_sessions
            ),
        ),
        (
            "synth --frames-per-session",
            s.frames_per_session.to_string(),
        ),
        ("synth --enrol-utterances", s.enrol_utterances.to_string()),
        (
            "synth true ranks: speaker / session",
            format!("{} / {}", s.speaker_rank, s.session_rank),
        ),
        (
            "synth scales: speaker / session / noise",
            format!("{} / {} / {}", s.speaker_scale, s.session_scale, s.noise),
        ),
        (
            "architecture",
            format!(
                "D-{h}x{d}-{DEFAULT_BOTTLENECK}-{h}x{d}-D, factors after bottleneck",
                h = DEFAULT_HIDDEN,
                d = DEFAULT_DEPTH
            ),
        ),
        (
            "--session-rank / --speaker-rank",
            format!("{DEFAULT_RANK} / {DEFAULT_RANK}"),
        ),
        (
            "--epochs / --batch-size",
            format!("{} / {}", t.epochs, t.batch_size),
        ),
        (
            "--lr-theta / --lr-session / --lr-speaker",
            format!("{} / {} / {}", t.lr_theta, t.lr_session, t.lr_speaker),
        ),
        (
            "--prior-theta / --prior-session / --prior-speaker",
            format!(
                "{} / {} / {}",
                t.prior_theta, t.prior_session, t.prior_speaker
            ),
        ),
        ("--dropout", t.dropout.to_string()),
        (
            "factor L2 pull",
            if t.factor_l2 {
                "on".into()
            } else {
                "off".into()
            },
        ),
        ("--train-seed", t.seed.to_string()),
        ("--ubm-lambda0", DEFAULT_LAMBDA0.to_string()),
        (
            "enrol --method",
            "map (interpolated if --alpha given)".into(),
        ),
        ("enrol --lambda0", "the UBM's".into()),
        ("enrol --alpha", DEFAULT_ALPHA.to_string()),
        (
            "enrol --factor-iterations / --factor-rate",
            format!("{DEFAULT_FACTOR_ITERATIONS} / {DEFAULT_FACTOR_RATE}"),
        ),
        ("score --mc-samples", DEFAULT_MC_SAMPLES.to_string()),
        (
            "score --score-seed",
            ScoreConfig::default().seed.to_string(),
        ),
        ("bench --grid", format!("{DEFAULT_RANK}x{DEFAULT_RANK}")),
        ("--threads", "0 (all cores)".into()),
    ];
    let w = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::from("Defaults:\n");
    for (k, v) in rows {
        out.push_str(&format!("  {k:<w$}  {v}\n"));
    }
    out.push_str("\nExit status: 0 success, 1 runtime error, 2 usage error.");
    out
}

enum Failure {
    Usage(String),
    Runtime(IoError),
}

impl From<IoError> for Failure {
    fn from(e: IoError) -> Self {
        Failure::Runtime(e)
    }
}

impl From<tiedfactor_core::Error> for Failure {
    fn from(e: tiedfactor_core::Error) -> Self {
        Failure::Runtime(e.into())
    }
}

fn write_text(path: &Path, text: &str) -> IoResult<()> {
    write_atomic(path, text.as_bytes())
}

fn run(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Synth { out, synth } => {
            let cfg = synth.config();
            cfg.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let corpus = generate(&cfg)?;
            let enrol = utterance_archive(&corpus.enrol, cfg.dim, cfg.speakers)?;
            let test = utterance_archive(&corpus.test, cfg.dim, cfg.speakers)?;
            let trials = trial_list(&test, cfg.speakers);
            std::fs::create_dir_all(&out).map_err(|e| IoError::at(&out, e))?;
            let mut staged = Staged::default();
            staged.add(
                &out.join("train.tfda"),
                &tiedfactor::archive::encode_archive(&corpus.train),
            )?;
            staged.add(
                &out.join("enrol.tfda"),
                &tiedfactor::archive::encode_archive(&enrol),
            )?;
            staged.add(
                &out.join("test.tfda"),
                &tiedfactor::archive::encode_archive(&test),
            )?;
            staged.add(&out.join("trials.tsv"), format_trials(&trials).as_bytes())?;
            staged.commit()?;
            eprintln!(
                "wrote {} training frames, {} enrollment and {} test utterances, {} trials to {}",
                corpus.train.len(),
                corpus.enrol.len(),
                corpus.test.len(),
                trials.len(),
                out.display()
            );
        }
        Command::Import { tsv, out } => {
            let data = import_tsv(&tsv)?;
            write_archive(&out, &data)?;
            eprintln!("imported {} frames of dimension {}", data.len(), data.dim());
        }
        Command::TrainUbm {
            data,
            out,
            loss_trace,
            baseline_dnn,
            stats_factors,
            ubm_lambda0,
            train,
        } => {
            if !(ubm_lambda0 >= 0.0) || !ubm_lambda0.is_finite() {
                return Err(Failure::Usage(format!(
                    "--ubm-lambda0 must be >= 0, got {ubm_lambda0}"
                )));
            }
            train
                .config(1)
                .validate()
                .map_err(|e| Failure::Usage(e.to_string()))?;
            let data = read_archive(&data)?;
            let cfg = train.config(data.dim());
            let sf = match stats_factors {
                StatsFactorsArg::Trained => StatsFactors::Trained,
                StatsFactorsArg::Zero => StatsFactors::Zero,
            };
            let (ubm, trace) = train_ubm(&cfg, &data, baseline_dnn, ubm_lambda0, sf, |e, l| {
                eprintln!("epoch {}\tloss {l:.6}", e + 1)
            })?;
            if let Some(p) = loss_trace {
                let mut staged = Staged::default();
                staged.add(
                    &out,
                    &tiedfactor::model::encode_model(&Model::Ubm(Box::new(ubm))),
                )?;
                staged.add(&p, format_loss_trace(&trace).as_bytes())?;
                staged.commit()?;
            } else {
                save_model(&out, &Model::Ubm(Box::new(ubm)))?;
            }
        }
        Command::Enrol {
            ubm,
            data,
            out,
            stats_out,
            enrol,
            threads,
        } => {
            let method = enrol.method().map_err(Failure::Usage)?;
            let mut ubm = load_ubm(&ubm)?;
            if let Some(l) = enrol.lambda0 {
                ubm.head = ubm.head.with_lambda0(l)?;
            }
            let data = read_archive(&data).map_err(|e| e.in_file(&data))?;
            let models = enrol_speakers(&ubm, &data, method, threads)?;
            let mut staged = Staged::default();
            staged.add(
                &out,
                &tiedfactor::model::encode_model(&Model::Speakers(models.clone())),
            )?;
            if let Some(p) = stats_out {
                let mut stats = Vec::new();
                for s in 0..data.num_speakers() {
                    if !data.speaker_frames(s).is_empty() {
                        stats.push((
                            model_id(s),
                            compute_enrol_stats(&ubm, &speaker_matrix(&data, s))?,
                        ));
                    }
                }
                staged.add(&p, &tiedfactor::model::encode_model(&Model::Stats(stats)))?;
            }
            staged.commit()?;
            eprintln!("enrolled {} speakers", models.len());
        }
        Command::Score {
            ubm,
            models,
            data,
            trials,
            out,
            score,
            threads,
        } => {
            let cfg = score.config().map_err(Failure::Usage)?;
            let ubm = load_ubm(&ubm)?;
            let models = load_speakers(&models)?;
            let test = read_archive(&data)?;
            let refs = read_trials(&trials)?;
            let results = score_refs(&models, &ubm, &refs, &test, &cfg, threads)?;
            let mut lines = Vec::with_capacity(results.len());
            let mut failed = 0;
            for r in &results {
                match (&r.score, r.value(&cfg)) {
                    (Ok(_), Some(v)) => lines.push(ScoreLine {
                        model_id: r.model_id.clone(),
                        utterance_id: r.utterance_id.clone(),
                        score: v,
                        label: r.label,
                    }),
                    (Err(e), _) => {
                        failed += 1;
                        eprintln!("trial {} {}: {e}", r.model_id, r.utterance_id);
                    }
                    _ => unreachable!(),
                }
            }
            if failed > 0 {
                return Err(Failure::Runtime(IoError::Format(format!(
                    "{failed} of {} trials failed; no score table written",
                    results.len()
                ))));
            }
            write_text(&out, &format_score_table(&lines))?;
            eprintln!("scored {} trials", lines.len());
        }
        Command::Eval { scores, det } => {
            let lines = read_score_table(&scores)?;
            let set = score_set(&lines);
            let e = eer(&set)?;
            let d08 = min_dcf(&set, &CostParams::DET08)?;
            let d10 = min_dcf(&set, &CostParams::DET10)?;
            if let Some(p) = det {
                write_text(&p, &format_det(&det_points(&set)?))?;
            }
            println!("EER% {}  minDCF08 {d08}  minDCF10 {d10}", 100.0 * e);
        }
        Command::Bench {
            grid,
            ubm_lambda0,
            out,
            synth,
            train,
            enrol,
            score,
            threads,
        } => {
            let s = synth.config();
            s.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let t = train.config(s.dim);
            t.validate().map_err(|e| Failure::Usage(e.to_string()))?;
            let cfg = BenchConfig {
                synth: s,
                train: t,
                grid: grid.0,
                lambda0: ubm_lambda0,
                enrol_lambda0: enrol.lambda0,
                method: enrol.method().map_err(Failure::Usage)?,
                score: score.config().map_err(Failure::Usage)?,
                threads,
            };
            let rows = run_bench(&cfg, |m| eprintln!("{m}"))?;
            let table = format_bench(&rows);
            if let Some(p) = out {
                write_text(&p, &table)?;
            }
            print!("{table}");
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cmd = Cli::command().after_long_help(defaults_table());
    let cli = match cmd
        .try_get_matches()
        .and_then(|m| Cli::from_arg_matches(&m))
    {
        Ok(c) => c,
        Err(e) => e.exit(),
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
