//! Probabilistic output layer.
//!
//! The last network layer is linear, so its output can be read as the mean of a
//! Gaussian linear-regression model `x ~ N(Bᵀ y, Ψ)` whose regressor `y` is the
//! penultimate activation augmented with a trailing constant 1 (the bias row of
//! `B`). All estimators work from the sufficient statistics `S_yy = Σ y yᵀ` and
//! `S_yx = Σ y xᵀ`. The MAP and posterior algebra use an isotropic precision
//! `β`, likelihood evaluation uses the per-dimension variances `Ψ`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{axpy, cholesky, cholesky_solve, logpdf_diag_gaussian, Matrix};

/// Lower bound applied to every output variance.
pub const PSI_FLOOR: f64 = 1e-6;

/// `[y, 1]`.
pub fn augment(y: &[f64]) -> Vec<f64> {
    let mut v = Vec::with_capacity(y.len() + 1);
    v.extend_from_slice(y);
    v.push(1.0);
    v
}

/// Accumulated `S_yy` (`M × M`), `S_yx` (`M × D`) and frame count.
#[derive(Debug, Clone, PartialEq)]
pub struct SufficientStats {
    pub syy: Matrix,
    pub syx: Matrix,
    pub n: u64,
}

impl SufficientStats {
    pub fn zeros(regressor_dim: usize, output_dim: usize) -> Self {
        Self {
            syy: Matrix::zeros(regressor_dim, regressor_dim),
            syx: Matrix::zeros(regressor_dim, output_dim),
            n: 0,
        }
    }

    pub fn regressor_dim(&self) -> usize {
        self.syy.rows()
    }

    pub fn output_dim(&self) -> usize {
        self.syx.cols()
    }

    /// Adds one frame; `y` must already be augmented.
    pub fn add_frame(&mut self, y: &[f64], x: &[f64]) -> Result<()> {
        check_dim("stats regressor", self.regressor_dim(), y.len())?;
        check_dim("stats target", self.output_dim(), x.len())?;
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, y, self.syy.row_mut(i));
            axpy(yi, x, self.syx.row_mut(i));
        }
        self.n += 1;
        Ok(())
    }

    /// Componentwise sum.
    pub fn merge(&self, other: &SufficientStats) -> Result<SufficientStats> {
        Ok(SufficientStats {
            syy: self.syy.add_scaled(1.0, &other.syy)?,
            syx: self.syx.add_scaled(1.0, &other.syx)?,
            n: self.n + other.n,
        })
    }

    /// `a · self + b · other`, the frame count is kept from the raw sums.
    pub fn interpolate(&self, a: f64, other: &SufficientStats, b: f64) -> Result<SufficientStats> {
        Ok(SufficientStats {
            syy: self.syy.scaled(a).add_scaled(b, &other.syy)?,
            syx: self.syx.scaled(a).add_scaled(b, &other.syx)?,
            n: self.n + other.n,
        })
    }

    /// Stats divided by their frame count (zero stats stay zero).
    pub fn per_frame(&self) -> SufficientStats {
        let s = if self.n == 0 {
            0.0
        } else {
            1.0 / self.n as f64
        };
        SufficientStats {
            syy: self.syy.scaled(s),
            syx: self.syx.scaled(s),
            n: self.n,
        }
    }
}

/// Stats of paired rows: `ys` holds augmented regressors, `xs` targets.
pub fn accumulate_stats(ys: &Matrix, xs: &Matrix) -> Result<SufficientStats> {
    check_dim("accumulate_stats frame count", ys.rows(), xs.rows())?;
    let mut st = SufficientStats::zeros(ys.cols(), xs.cols());
    for t in 0..ys.rows() {
        st.add_frame(ys.row(t), xs.row(t))?;
    }
    Ok(st)
}

/// Least-squares solution of `S_yy B = S_yx`.
pub fn estimate_ml(stats: &SufficientStats) -> Result<Matrix> {
    let l = cholesky(&stats.syy).map_err(|_| {
        Error::Singular(format!(
            "S_yy ({0}x{0}) is not invertible; use the MAP estimator with a positive prior precision",
            stats.regressor_dim()
        ))
    })?;
    cholesky_solve(&l, &stats.syx)
}

/// Gaussian posterior over the regression weights.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorParams {
    /// `B_N`.
    pub mean: Matrix,
    /// `Σ_N⁻¹ = β S_yy + λ₀ I`.
    pub precision: Matrix,
}

fn check_prior(
    stats: &SufficientStats,
    lambda0: f64,
    beta: f64,
    prior_mean: &Matrix,
) -> Result<()> {
    if !(lambda0 >= 0.0) || !lambda0.is_finite() {
        return Err(Error::InvalidInput(format!(
            "prior precision must be >= 0, got {lambda0}"
        )));
    }
    if !(beta > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidInput(format!(
            "noise precision must be > 0, got {beta}"
        )));
    }
    check_dim("prior mean rows", stats.regressor_dim(), prior_mean.rows())?;
    check_dim("prior mean cols", stats.output_dim(), prior_mean.cols())
}

/// Posterior `N(B_N, Σ_N)` under the prior `B ~ N(B₀, λ₀⁻¹ I)`.
///
/// The mean is computed as `B₀ + Σ_N β (S_yx − S_yy B₀)`, which is algebraically
/// `Σ_N (β S_yx + λ₀ B₀)` and returns `B₀` exactly when the stats are empty.
pub fn posterior(
    stats: &SufficientStats,
    lambda0: f64,
    beta: f64,
    prior_mean: &Matrix,
) -> Result<PosteriorParams> {
    check_prior(stats, lambda0, beta, prior_mean)?;
    let m = stats.regressor_dim();
    let mut precision = stats.syy.scaled(beta);
    for i in 0..m {
        let v = precision.get(i, i) + lambda0;
        precision.set(i, i, v);
    }
    let residual = stats
        .syx
        .add_scaled(-1.0, &stats.syy.matmul(prior_mean)?)?
        .scaled(beta);
    let l = cholesky(&precision)?;
    let correction = cholesky_solve(&l, &residual)?;
    let mean = prior_mean.add_scaled(1.0, &correction)?;
    Ok(PosteriorParams { mean, precision })
}

/// MAP weights; identical to the posterior mean.
pub fn estimate_map(
    stats: &SufficientStats,
    lambda0: f64,
    beta: f64,
    prior_mean: &Matrix,
) -> Result<Matrix> {
    posterior(stats, lambda0, beta, prior_mean).map(|p| p.mean)
}

/// Running per-dimension sums of squared residuals.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualAccumulator {
    pub sum_sq: Vec<f64>,
    pub n: u64,
}

impl ResidualAccumulator {
    pub fn new(dim: usize) -> Self {
        Self {
            sum_sq: vec![0.0; dim],
            n: 0,
        }
    }

    pub fn add(&mut self, x: &[f64], mean: &[f64]) -> Result<()> {
        check_dim("residual target", self.sum_sq.len(), x.len())?;
        check_dim("residual mean", self.sum_sq.len(), mean.len())?;
        for ((s, a), b) in self.sum_sq.iter_mut().zip(x).zip(mean) {
            let r = a - b;
            *s += r * r;
        }
        self.n += 1;
        Ok(())
    }

    pub fn finish(&self) -> Result<Vec<f64>> {
        estimate_psi(&self.sum_sq, self.n)
    }
}

/// Floored mean squared residual per dimension.
pub fn estimate_psi(sum_sq: &[f64], n: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(Error::Empty("residuals for variance estimation"));
    }
    Ok(sum_sq
        .iter()
        .map(|s| (s / n as f64).max(PSI_FLOOR))
        .collect())
}

/// Regression head: weights, diagonal output variances and the prior used
/// when it is re-estimated.
#[derive(Debug, Clone, PartialEq)]
pub struct RegressionHead {
    /// `M × D`, last row is the bias.
    pub b: Matrix,
    pub psi: Vec<f64>,
    pub beta: f64,
    pub lambda0: f64,
    pub prior_mean: Matrix,
}

impl RegressionHead {
    /// `β` is set to the reciprocal mean variance.
    pub fn new(b: Matrix, psi: Vec<f64>, lambda0: f64, prior_mean: Matrix) -> Result<Self> {
        check_dim("head variances", b.cols(), psi.len())?;
        check_dim("head prior rows", b.rows(), prior_mean.rows())?;
        check_dim("head prior cols", b.cols(), prior_mean.cols())?;
        if psi.iter().any(|p| !(*p >= PSI_FLOOR) || !p.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "output variances must be finite and >= {PSI_FLOOR}"
            )));
        }
        if !(lambda0 >= 0.0) || !lambda0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "prior precision must be >= 0, got {lambda0}"
            )));
        }
        let beta = psi.len() as f64 / psi.iter().sum::<f64>();
        Ok(Self {
            b,
            psi,
            beta,
            lambda0,
            prior_mean,
        })
    }

    /// Same variances and prior, different weights.
    pub fn with_weights(&self, b: Matrix) -> Result<Self> {
        check_dim("head weight rows", self.b.rows(), b.rows())?;
        check_dim("head weight cols", self.b.cols(), b.cols())?;
        Ok(Self { b, ..self.clone() })
    }

    /// Same weights, different prior precision for later adaptation.
    pub fn with_lambda0(&self, lambda0: f64) -> Result<Self> {
        if !(lambda0 >= 0.0) || !lambda0.is_finite() {
            return Err(Error::InvalidInput(format!(
                "prior precision must be >= 0, got {lambda0}"
            )));
        }
        Ok(Self {
            lambda0,
            ..self.clone()
        })
    }

    pub fn regressor_dim(&self) -> usize {
        self.b.rows() - 1
    }

    pub fn output_dim(&self) -> usize {
        self.b.cols()
    }

    /// `Bᵀ [y, 1]` for an unaugmented regressor.
    pub fn mean(&self, y: &[f64]) -> Result<Vec<f64>> {
        check_dim("head regressor", self.regressor_dim(), y.len())?;
        let mut out = self.b.row(self.b.rows() - 1).to_vec();
        for (i, &yi) in y.iter().enumerate() {
            axpy(yi, self.b.row(i), &mut out);
        }
        Ok(out)
    }
}

/// `log N(x; Bᵀ[y, 1], Ψ)`.
pub fn head_loglik(head: &RegressionHead, y: &[f64], x: &[f64]) -> Result<f64> {
    check_dim("head target", head.output_dim(), x.len())?;
    let mean = head.mean(y)?;
    logpdf_diag_gaussian(x, &mean, &head.psi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::Rng;

    fn random_stats(seed: u64, frames: usize, m: usize, d: usize) -> SufficientStats {
        let mut rng = Rng::new(seed);
        let mut st = SufficientStats::zeros(m + 1, d);
        for _ in 0..frames {
            let y = augment(&rng.gaussian(m, 1.0));
            let x = rng.gaussian(d, 1.0);
            st.add_frame(&y, &x).unwrap();
        }
        st
    }

    #[test]
    fn single_frame_outer_products() {
        let ys = Matrix::from_rows(&[&augment(&[1.0, 2.0])]).unwrap();
        let xs = Matrix::from_rows(&[&[3.0]]).unwrap();
        let st = accumulate_stats(&ys, &xs).unwrap();
        assert_eq!(
            st.syy,
            Matrix::from_rows(&[&[1.0, 2.0, 1.0], &[2.0, 4.0, 2.0], &[1.0, 2.0, 1.0]]).unwrap()
        );
        assert_eq!(
            st.syx,
            Matrix::from_rows(&[&[3.0], &[6.0], &[3.0]]).unwrap()
        );
        assert_eq!(st.n, 1);
    }

    #[test]
    fn empty_input_gives_zero_stats() {
        let st = accumulate_stats(&Matrix::zeros(0, 3), &Matrix::zeros(0, 2)).unwrap();
        assert_eq!(st, SufficientStats::zeros(3, 2));
        assert!(accumulate_stats(&Matrix::zeros(2, 3), &Matrix::zeros(1, 2)).is_err());
    }

    #[test]
    fn additivity_on_exactly_representable_data() {
        let mut rng = Rng::new(3);
        let ys: Vec<f64> = (0..100 * 4)
            .map(|_| (rng.below(17) as f64 - 8.0) / 4.0)
            .collect();
        let xs: Vec<f64> = (0..100 * 2)
            .map(|_| (rng.below(9) as f64 - 4.0) / 2.0)
            .collect();
        let ys = Matrix::from_vec(100, 4, ys).unwrap();
        let xs = Matrix::from_vec(100, 2, xs).unwrap();
        let full = accumulate_stats(&ys, &xs).unwrap();
        let head = |m: &Matrix, r: core::ops::Range<usize>| {
            let v: Vec<f64> = r.clone().flat_map(|i| m.row(i).to_vec()).collect();
            Matrix::from_vec(r.len(), m.cols(), v).unwrap()
        };
        let a = accumulate_stats(&head(&ys, 0..60), &head(&xs, 0..60)).unwrap();
        let b = accumulate_stats(&head(&ys, 60..100), &head(&xs, 60..100)).unwrap();
        assert_eq!(a.merge(&b).unwrap(), full);
    }

    #[test]
    fn ml_examples() {
        let st = accumulate_stats(
            &Matrix::from_rows(&[&[1.0], &[2.0]]).unwrap(),
            &Matrix::from_rows(&[&[2.0], &[4.0]]).unwrap(),
        )
        .unwrap();
        assert!((estimate_ml(&st).unwrap().get(0, 0) - 2.0).abs() < 1e-15);

        let st = accumulate_stats(
            &Matrix::from_rows(&[&[1.0], &[1.0]]).unwrap(),
            &Matrix::from_rows(&[&[1.0], &[3.0]]).unwrap(),
        )
        .unwrap();
        assert!((estimate_ml(&st).unwrap().get(0, 0) - 2.0).abs() < 1e-15);

        let st = accumulate_stats(
            &Matrix::from_rows(&[&augment(&[1.0]), &augment(&[1.0])]).unwrap(),
            &Matrix::from_rows(&[&[1.0], &[3.0]]).unwrap(),
        )
        .unwrap();
        assert!(matches!(estimate_ml(&st), Err(Error::Singular(_))));
    }

    #[test]
    fn map_corner_cases() {
        let st = random_stats(4, 50, 3, 2);
        let zero = Matrix::zeros(4, 2);
        let ml = estimate_ml(&st).unwrap();
        assert!(
            estimate_map(&st, 0.0, 2.0, &zero)
                .unwrap()
                .max_abs_diff(&ml)
                < 1e-10
        );

        let prior = Matrix::from_vec(4, 2, Rng::new(9).gaussian(8, 1.0)).unwrap();
        let strong = estimate_map(&st, 1e12, 1.0, &prior).unwrap();
        assert!(strong.max_abs_diff(&prior) < 1e-6);
    }

    #[test]
    fn posterior_mean_is_map_and_prior_without_data() {
        let st = random_stats(5, 30, 3, 2);
        let prior = Matrix::from_vec(4, 2, Rng::new(1).gaussian(8, 1.0)).unwrap();
        let post = posterior(&st, 0.7, 1.3, &prior).unwrap();
        assert_eq!(post.mean, estimate_map(&st, 0.7, 1.3, &prior).unwrap());

        let empty = SufficientStats::zeros(4, 2);
        let post = posterior(&empty, 0.5, 2.0, &prior).unwrap();
        assert_eq!(post.mean, prior);
        assert_eq!(post.precision, Matrix::identity(4).scaled(0.5));
    }

    #[test]
    fn posterior_mean_is_homogeneous_in_the_precisions() {
        let st = random_stats(6, 40, 2, 3);
        let prior = Matrix::from_vec(3, 3, Rng::new(2).gaussian(9, 1.0)).unwrap();
        let a = estimate_map(&st, 0.4, 1.5, &prior).unwrap();
        for c in [0.25, 3.0, 100.0] {
            let b = estimate_map(&st, 0.4 * c, 1.5 * c, &prior).unwrap();
            assert!(a.max_abs_diff(&b) < 1e-10);
        }
    }

    #[test]
    fn map_rejects_bad_precisions() {
        let st = random_stats(7, 5, 1, 1);
        let z = Matrix::zeros(2, 1);
        assert!(estimate_map(&st, -1.0, 1.0, &z).is_err());
        assert!(estimate_map(&st, 1.0, 0.0, &z).is_err());
        assert!(estimate_map(&st, 1.0, 1.0, &Matrix::zeros(3, 1)).is_err());
    }

    #[test]
    fn psi_examples() {
        assert_eq!(
            estimate_psi(&[0.0, 0.0], 10).unwrap(),
            vec![PSI_FLOOR, PSI_FLOOR]
        );
        let mut acc = ResidualAccumulator::new(2);
        for s in [1.0, -1.0, 1.0, -1.0] {
            acc.add(&[s, 0.0], &[0.0, 0.0]).unwrap();
        }
        assert_eq!(acc.finish().unwrap(), vec![1.0, PSI_FLOOR]);
        assert!(estimate_psi(&[1.0], 0).is_err());
    }

    #[test]
    fn psi_matches_two_pass_residual_oracle() {
        let mut rng = Rng::new(8);
        let b = Matrix::from_vec(3, 2, rng.gaussian(6, 1.0)).unwrap();
        let head =
            RegressionHead::new(b.clone(), vec![1.0, 1.0], 1.0, Matrix::zeros(3, 2)).unwrap();
        let frames: Vec<(Vec<f64>, Vec<f64>)> = (0..25)
            .map(|_| (rng.gaussian(2, 1.0), rng.gaussian(2, 2.0)))
            .collect();
        let mut acc = ResidualAccumulator::new(2);
        for (y, x) in &frames {
            acc.add(x, &head.mean(y).unwrap()).unwrap();
        }
        let psi = acc.finish().unwrap();
        // oracle: explicit residual matrix, then column means of squares
        let residuals: Vec<[f64; 2]> = frames
            .iter()
            .map(|(y, x)| {
                let m0 = b.get(0, 0) * y[0] + b.get(1, 0) * y[1] + b.get(2, 0);
                let m1 = b.get(0, 1) * y[0] + b.get(1, 1) * y[1] + b.get(2, 1);
                [x[0] - m0, x[1] - m1]
            })
            .collect();
        for d in 0..2 {
            let v = residuals.iter().map(|r| r[d] * r[d]).sum::<f64>() / 25.0;
            assert!((psi[d] - v).abs() < 1e-12);
        }
    }

    #[test]
    fn head_loglik_identities() {
        let b =
            Matrix::from_rows(&[&[1.0, 0.0, 2.0], &[0.5, -1.0, 0.0], &[0.1, 0.2, 0.3]]).unwrap();
        let psi = vec![0.5, 1.0, 2.0];
        let head = RegressionHead::new(b.clone(), psi.clone(), 1.0, Matrix::zeros(3, 3)).unwrap();
        let y = [2.0, -1.0];
        let at = head.mean(&y).unwrap();
        let expected: f64 = psi
            .iter()
            .map(|p| -0.5 * libm::log(2.0 * core::f64::consts::PI * p))
            .sum();
        assert!((head_loglik(&head, &y, &at).unwrap() - expected).abs() < 1e-12);

        let doubled = RegressionHead::new(
            b,
            psi.iter().map(|p| 2.0 * p).collect(),
            1.0,
            Matrix::zeros(3, 3),
        )
        .unwrap();
        let drop = head_loglik(&head, &y, &at).unwrap() - head_loglik(&doubled, &y, &at).unwrap();
        assert!((drop - 1.5 * core::f64::consts::LN_2).abs() < 1e-12);

        // composition with a hand-computed mean
        let x = [1.0, 2.0, 3.0];
        let hand = [2.0 * 1.0 - 0.5 + 0.1, 0.0 + 1.0 + 0.2, 4.0 + 0.0 + 0.3];
        let direct = logpdf_diag_gaussian(&x, &hand, &psi).unwrap();
        assert!((head_loglik(&head, &y, &x).unwrap() - direct).abs() < 1e-12);
        assert!(head_loglik(&head, &[1.0], &x).is_err());
    }

    #[test]
    fn head_beta_is_reciprocal_mean_variance() {
        let head = RegressionHead::new(
            Matrix::zeros(2, 2),
            vec![0.5, 1.5],
            1.0,
            Matrix::zeros(2, 2),
        )
        .unwrap();
        assert_eq!(head.beta, 1.0);
        assert!(RegressionHead::new(
            Matrix::zeros(2, 2),
            vec![0.0, 1.0],
            1.0,
            Matrix::zeros(2, 2)
        )
        .is_err());
    }
}
