//! Background model construction and speaker enrollment.
//!
//! A trained network becomes a universal background model (UBM) by collecting
//! regression-head statistics over its training data. Speakers are then enrolled
//! either by re-estimating the head weights from enrollment statistics (with the
//! UBM weights as prior mean, or by interpolating UBM and speaker statistics),
//! or by fitting a speaker factor with the network frozen.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::head::{augment, posterior, RegressionHead, ResidualAccumulator, SufficientStats};
use crate::linalg::{axpy, Matrix};
use crate::network::{factor_gradients, forward, mse_cost, NetworkParams};
use crate::trainer::{Dataset, LatentFactors};

/// Factors used when forwarding UBM training data to collect statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsFactors {
    /// The factors estimated during training.
    #[default]
    Trained,
    /// Zero factors, matching how test data is forwarded.
    Zero,
}

#[derive(Debug, Clone, PartialEq)]
pub struct UbmModel {
    pub params: NetworkParams,
    pub head: RegressionHead,
    pub stats: SufficientStats,
    pub factors: LatentFactors,
}

impl UbmModel {
    pub fn feature_dim(&self) -> usize {
        self.params.input_dim()
    }
}

/// Collects UBM statistics and fits the head: `Ψ` from the residuals of the
/// network's own output layer, `β = 1 / mean(Ψ)`, and `B_ubm` as the posterior
/// mean of the statistics under a zero-mean prior with precision `lambda0`.
pub fn build_ubm(
    params: NetworkParams,
    factors: LatentFactors,
    data: &Dataset,
    lambda0: f64,
    stats_factors: StatsFactors,
) -> Result<UbmModel> {
    check_dim("ubm feature dim", params.input_dim(), data.dim())?;
    if data.is_empty() {
        return Err(Error::Empty("UBM data"));
    }
    let m = params.penultimate_dim() + 1;
    let d = params.output_dim();
    let zero1 = vec![0.0; params.session_rank()];
    let zero2 = vec![0.0; params.speaker_rank()];
    let mut stats = SufficientStats::zeros(m, d);
    let mut residuals = ResidualAccumulator::new(d);
    for t in 0..data.len() {
        let x = data.frame(t);
        let (z1, z2) = match stats_factors {
            StatsFactors::Trained => (
                factors.session.row(data.session_labels()[t] as usize),
                factors.speaker.row(data.speaker_labels()[t] as usize),
            ),
            StatsFactors::Zero => (&zero1[..], &zero2[..]),
        };
        let acts = forward(&params, x, z1, z2, None)?;
        stats.add_frame(&augment(acts.penultimate()), x)?;
        residuals.add(x, acts.output())?;
    }
    let psi = residuals.finish()?;
    let zero_prior = Matrix::zeros(m, d);
    let provisional = RegressionHead::new(zero_prior.clone(), psi, lambda0, zero_prior.clone())?;
    let b = posterior(&stats, lambda0, provisional.beta, &zero_prior)?.mean;
    let head = provisional.with_weights(b)?;
    Ok(UbmModel {
        params,
        head,
        stats,
        factors,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AdaptMethod {
    /// MAP with the UBM weights as prior mean.
    MapPrior,
    /// Posterior given interpolated UBM and speaker statistics.
    Interpolated { alpha: f64, normalize: bool },
    /// Speaker factor fitted by tied gradient steps, head left at the UBM.
    Factor { iterations: usize, rate: f64 },
    /// Speaker factor first, then interpolated head re-estimation from stats
    /// collected with that factor injected.
    FactorInterpolated {
        iterations: usize,
        rate: f64,
        alpha: f64,
        normalize: bool,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpeakerModel {
    pub id: String,
    /// Adapted head weights, same shape as the UBM's.
    pub b: Matrix,
    pub z_speaker: Option<Vec<f64>>,
    pub method: AdaptMethod,
}

impl SpeakerModel {
    /// The UBM itself posing as a speaker; scores exactly zero.
    pub fn from_ubm(id: impl Into<String>, ubm: &UbmModel) -> Self {
        Self {
            id: id.into(),
            b: ubm.head.b.clone(),
            z_speaker: None,
            method: AdaptMethod::MapPrior,
        }
    }

    pub fn validate_against(&self, ubm: &UbmModel) -> Result<()> {
        check_dim("speaker head rows", ubm.head.b.rows(), self.b.rows())?;
        check_dim("speaker head cols", ubm.head.b.cols(), self.b.cols())?;
        let has_factor = matches!(
            self.method,
            AdaptMethod::Factor { .. } | AdaptMethod::FactorInterpolated { .. }
        );
        match (&self.z_speaker, has_factor) {
            (Some(z), true) => check_dim("speaker factor", ubm.params.speaker_rank(), z.len()),
            (None, false) => Ok(()),
            _ => Err(Error::InvalidInput(
                "speaker factor must be present exactly for factor adaptation".into(),
            )),
        }
    }
}

/// Enrollment statistics with zero session and speaker factors.
pub fn compute_enrol_stats(ubm: &UbmModel, frames: &Matrix) -> Result<SufficientStats> {
    let z2 = vec![0.0; ubm.params.speaker_rank()];
    compute_enrol_stats_with(ubm, frames, &z2)
}

/// Enrollment statistics with a given speaker factor and zero session factor.
pub fn compute_enrol_stats_with(
    ubm: &UbmModel,
    frames: &Matrix,
    z_speaker: &[f64],
) -> Result<SufficientStats> {
    check_dim("enrollment feature dim", ubm.feature_dim(), frames.cols())?;
    let z1 = vec![0.0; ubm.params.session_rank()];
    let mut stats = SufficientStats::zeros(ubm.head.b.rows(), ubm.head.b.cols());
    for t in 0..frames.rows() {
        let x = frames.row(t);
        let acts = forward(&ubm.params, x, &z1, z_speaker, None)?;
        stats.add_frame(&augment(acts.penultimate()), x)?;
    }
    Ok(stats)
}

/// `B_spk = (β S_yy + λ₀ I)⁻¹ (β S_yx + λ₀ B_ubm)`.
pub fn enrol_map_prior(
    ubm: &UbmModel,
    id: impl Into<String>,
    enrol: &SufficientStats,
) -> Result<SpeakerModel> {
    let b = posterior(enrol, ubm.head.lambda0, ubm.head.beta, &ubm.head.b)?.mean;
    Ok(SpeakerModel {
        id: id.into(),
        b,
        z_speaker: None,
        method: AdaptMethod::MapPrior,
    })
}

fn interpolated_weights(
    ubm: &UbmModel,
    enrol: &SufficientStats,
    alpha: f64,
    normalize: bool,
) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::InvalidInput(alloc::format!(
            "interpolation factor must lie in [0, 1], got {alpha}"
        )));
    }
    let combined = if normalize {
        ubm.stats
            .per_frame()
            .interpolate(alpha, &enrol.per_frame(), 1.0 - alpha)?
    } else {
        ubm.stats.interpolate(alpha, enrol, 1.0 - alpha)?
    };
    let zero = Matrix::zeros(ubm.head.b.rows(), ubm.head.b.cols());
    Ok(posterior(&combined, ubm.head.lambda0, ubm.head.beta, &zero)?.mean)
}

/// `B_spk = (α S_ubm + (1 − α) S_spk + (λ₀/β) I)⁻¹ (α S_yx,ubm + (1 − α) S_yx,spk)`,
/// solved in the scaled form shared with the UBM head so that `α = 1`
/// reproduces `B_ubm` exactly. With `normalize`, both sides are divided by
/// their frame counts first.
pub fn enrol_interpolated(
    ubm: &UbmModel,
    id: impl Into<String>,
    enrol: &SufficientStats,
    alpha: f64,
    normalize: bool,
) -> Result<SpeakerModel> {
    Ok(SpeakerModel {
        id: id.into(),
        b: interpolated_weights(ubm, enrol, alpha, normalize)?,
        z_speaker: None,
        method: AdaptMethod::Interpolated { alpha, normalize },
    })
}

/// Speaker factor from `iterations` tied gradient steps over the enrollment
/// frames, starting at zero, with the network and head frozen.
pub fn fit_speaker_factor(
    ubm: &UbmModel,
    frames: &Matrix,
    iterations: usize,
    rate: f64,
) -> Result<Vec<f64>> {
    check_dim("enrollment feature dim", ubm.feature_dim(), frames.cols())?;
    if iterations == 0 {
        return Err(Error::InvalidInput(
            "factor adaptation needs at least one iteration".into(),
        ));
    }
    let z1 = vec![0.0; ubm.params.session_rank()];
    let mut z2 = vec![0.0; ubm.params.speaker_rank()];
    for _ in 0..iterations {
        let mut grad = vec![0.0; z2.len()];
        for t in 0..frames.rows() {
            let x = frames.row(t);
            let acts = forward(&ubm.params, x, &z1, &z2, None)?;
            let (_, d) = mse_cost(acts.output(), x)?;
            let (_, dz2) = factor_gradients(&ubm.params, &acts, &d)?;
            axpy(1.0, &dz2, &mut grad);
        }
        axpy(-rate, &grad, &mut z2);
    }
    Ok(z2)
}

pub fn enrol_factor(
    ubm: &UbmModel,
    id: impl Into<String>,
    frames: &Matrix,
    iterations: usize,
    rate: f64,
) -> Result<SpeakerModel> {
    let z = fit_speaker_factor(ubm, frames, iterations, rate)?;
    Ok(SpeakerModel {
        id: id.into(),
        b: ubm.head.b.clone(),
        z_speaker: Some(z),
        method: AdaptMethod::Factor { iterations, rate },
    })
}

pub fn enrol_factor_interpolated(
    ubm: &UbmModel,
    id: impl Into<String>,
    frames: &Matrix,
    iterations: usize,
    rate: f64,
    alpha: f64,
    normalize: bool,
) -> Result<SpeakerModel> {
    let z = fit_speaker_factor(ubm, frames, iterations, rate)?;
    let stats = compute_enrol_stats_with(ubm, frames, &z)?;
    Ok(SpeakerModel {
        id: id.into(),
        b: interpolated_weights(ubm, &stats, alpha, normalize)?,
        z_speaker: Some(z),
        method: AdaptMethod::FactorInterpolated {
            iterations,
            rate,
            alpha,
            normalize,
        },
    })
}

/// Enrolls one speaker from its frames with the given method.
pub fn enrol(
    ubm: &UbmModel,
    id: impl Into<String>,
    frames: &Matrix,
    method: AdaptMethod,
) -> Result<SpeakerModel> {
    match method {
        AdaptMethod::MapPrior => enrol_map_prior(ubm, id, &compute_enrol_stats(ubm, frames)?),
        AdaptMethod::Interpolated { alpha, normalize } => enrol_interpolated(
            ubm,
            id,
            &compute_enrol_stats(ubm, frames)?,
            alpha,
            normalize,
        ),
        AdaptMethod::Factor { iterations, rate } => enrol_factor(ubm, id, frames, iterations, rate),
        AdaptMethod::FactorInterpolated {
            iterations,
            rate,
            alpha,
            normalize,
        } => enrol_factor_interpolated(ubm, id, frames, iterations, rate, alpha, normalize),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::head::estimate_map;
    use crate::linalg::ridge_solve;
    use crate::network::Architecture;
    use crate::rng::Rng;
    use crate::trainer::{init, TrainConfig};

    fn ubm_fixture() -> (UbmModel, Dataset) {
        let mut rng = Rng::new(31);
        let frames = 60;
        let dim = 4;
        let data: Vec<f64> = rng.gaussian(frames * dim, 1.0);
        let session: Vec<u32> = (0..frames as u32).map(|t| t % 6).collect();
        let speaker: Vec<u32> = session.iter().map(|f| f % 3).collect();
        let ds = Dataset::new(
            Matrix::from_vec(frames, dim, data).unwrap(),
            session,
            speaker,
            6,
            3,
        )
        .unwrap();
        let mut cfg = TrainConfig::new(Architecture::symmetric(dim, 5, 1, 2, 2, 2));
        cfg.prior_theta = 0.4;
        let (p, z) = init(&cfg, 6, 3).unwrap();
        (
            build_ubm(p, z, &ds, 1.0, StatsFactors::Trained).unwrap(),
            ds,
        )
    }

    fn frames(seed: u64, n: usize) -> Matrix {
        Matrix::from_vec(n, 4, Rng::new(seed).gaussian(n * 4, 1.0)).unwrap()
    }

    #[test]
    fn ubm_head_is_posterior_of_its_stats() {
        let (ubm, _) = ubm_fixture();
        let zero = Matrix::zeros(ubm.head.b.rows(), ubm.head.b.cols());
        let b = posterior(&ubm.stats, ubm.head.lambda0, ubm.head.beta, &zero)
            .unwrap()
            .mean;
        assert_eq!(b, ubm.head.b);
        assert_eq!(ubm.stats.n, 60);
    }

    #[test]
    fn map_prior_corner_cases() {
        let (ubm, _) = ubm_fixture();
        let empty = SufficientStats::zeros(ubm.head.b.rows(), ubm.head.b.cols());
        assert_eq!(enrol_map_prior(&ubm, "a", &empty).unwrap().b, ubm.head.b);

        let stats = compute_enrol_stats(&ubm, &frames(1, 40)).unwrap();
        let mut weak = ubm.clone();
        weak.head.beta = 1e-12;
        let spk = enrol_map_prior(&weak, "a", &stats).unwrap();
        assert!(spk.b.max_abs_diff(&ubm.head.b) < 1e-6);
        let moved = enrol_map_prior(&ubm, "a", &stats).unwrap();
        assert!(moved.b.max_abs_diff(&ubm.head.b) > 0.0);
    }

    #[test]
    fn interpolation_corners() {
        let (ubm, _) = ubm_fixture();
        let stats = compute_enrol_stats(&ubm, &frames(2, 30)).unwrap();
        assert_eq!(
            enrol_interpolated(&ubm, "a", &stats, 1.0, false).unwrap().b,
            ubm.head.b
        );
        let ridge = ridge_solve(
            &ubm.stats.syy,
            ubm.head.lambda0 / ubm.head.beta,
            &ubm.stats.syx,
        )
        .unwrap();
        assert!(ridge.max_abs_diff(&ubm.head.b) < 1e-10);

        let zero = Matrix::zeros(ubm.head.b.rows(), ubm.head.b.cols());
        let map = estimate_map(&stats, ubm.head.lambda0, ubm.head.beta, &zero).unwrap();
        assert_eq!(
            enrol_interpolated(&ubm, "a", &stats, 0.0, false).unwrap().b,
            map
        );
        assert!(enrol_interpolated(&ubm, "a", &stats, 1.5, false).is_err());
        assert!(enrol_interpolated(&ubm, "a", &stats, -0.1, true).is_err());
    }

    #[test]
    fn normalized_interpolation_uses_per_frame_stats() {
        let (ubm, _) = ubm_fixture();
        let stats = compute_enrol_stats(&ubm, &frames(3, 30)).unwrap();
        let doubled = stats.merge(&stats).unwrap();
        let a = enrol_interpolated(&ubm, "a", &stats, 0.5, true).unwrap();
        let b = enrol_interpolated(&ubm, "a", &doubled, 0.5, true).unwrap();
        assert!(a.b.max_abs_diff(&b.b) < 1e-10);
        let raw = enrol_interpolated(&ubm, "a", &doubled, 0.5, false).unwrap();
        assert!(raw.b.max_abs_diff(&a.b) > 1e-6);
    }

    #[test]
    fn enrol_stats_are_additive_and_deterministic() {
        let (ubm, _) = ubm_fixture();
        let a = frames(4, 10);
        let b = frames(5, 7);
        let mut joined = a.as_slice().to_vec();
        joined.extend_from_slice(b.as_slice());
        let joined = Matrix::from_vec(17, 4, joined).unwrap();
        let sa = compute_enrol_stats(&ubm, &a).unwrap();
        let sb = compute_enrol_stats(&ubm, &b).unwrap();
        let sj = compute_enrol_stats(&ubm, &joined).unwrap();
        let merged = sa.merge(&sb).unwrap();
        assert!(merged.syy.max_abs_diff(&sj.syy) < 1e-10);
        assert!(merged.syx.max_abs_diff(&sj.syx) < 1e-10);
        assert_eq!(merged.n, sj.n);
        assert_eq!(compute_enrol_stats(&ubm, &joined).unwrap(), sj);
        let empty = compute_enrol_stats(&ubm, &Matrix::zeros(0, 4)).unwrap();
        assert_eq!(
            empty,
            SufficientStats::zeros(ubm.head.b.rows(), ubm.head.b.cols())
        );
    }

    #[test]
    fn factor_enrollment_examples() {
        let (ubm, _) = ubm_fixture();
        let before = ubm.clone();
        let f = frames(6, 12);
        let spk = enrol_factor(&ubm, "a", &f, 5, 0.0).unwrap();
        assert_eq!(spk.z_speaker, Some(vec![0.0, 0.0]));
        assert_eq!(spk.b, ubm.head.b);
        assert_eq!(ubm, before);

        let one = frames(7, 1);
        let spk = enrol_factor(&ubm, "a", &one, 1, 0.3).unwrap();
        let x = one.row(0);
        let acts = forward(&ubm.params, x, &[0.0, 0.0], &[0.0, 0.0], None).unwrap();
        let (_, d) = mse_cost(acts.output(), x).unwrap();
        let (_, dz2) = factor_gradients(&ubm.params, &acts, &d).unwrap();
        let expected: Vec<f64> = dz2.iter().map(|g| -0.3 * g).collect();
        assert_eq!(spk.z_speaker.unwrap(), expected);
        assert!(enrol_factor(&ubm, "a", &one, 0, 0.3).is_err());
    }

    #[test]
    fn more_data_moves_the_map_estimate_further() {
        // one-dimensional regressor without bias: B = (β c s + λ)⁻¹ (β c r + λ b0)
        let prior = Matrix::from_rows(&[&[0.5]]).unwrap();
        let mut last = 0.0;
        for c in [1.0, 2.0, 4.0, 8.0, 100.0] {
            let st = SufficientStats {
                syy: Matrix::from_rows(&[&[2.0 * c]]).unwrap(),
                syx: Matrix::from_rows(&[&[6.0 * c]]).unwrap(),
                n: 0,
            };
            let b = posterior(&st, 1.0, 0.5, &prior).unwrap().mean;
            let moved = (b.get(0, 0) - 0.5).abs();
            assert!(moved >= last);
            last = moved;
        }
    }

    #[test]
    fn speaker_model_validation() {
        let (ubm, _) = ubm_fixture();
        let mut m = SpeakerModel::from_ubm("x", &ubm);
        assert!(m.validate_against(&ubm).is_ok());
        m.z_speaker = Some(vec![0.0; 2]);
        assert!(m.validate_against(&ubm).is_err());
        m.b = Matrix::zeros(2, 2);
        assert!(m.validate_against(&ubm).is_err());
    }
}
