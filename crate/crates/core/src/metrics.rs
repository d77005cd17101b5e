//! Detection metrics: equal error rate, minimum detection cost and DET points.
//!
//! A trial is accepted when its score is at least the threshold. Operating
//! points are taken at every distinct score and at `+∞` (reject all).

use alloc::format;
use alloc::vec::Vec;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScoreSet {
    pub target: Vec<f64>,
    pub nontarget: Vec<f64>,
}

impl ScoreSet {
    pub fn new(target: Vec<f64>, nontarget: Vec<f64>) -> Self {
        Self { target, nontarget }
    }

    fn validate(&self) -> Result<()> {
        if self.target.is_empty() {
            return Err(Error::Empty("target scores"));
        }
        if self.nontarget.is_empty() {
            return Err(Error::Empty("nontarget scores"));
        }
        if !self
            .target
            .iter()
            .chain(&self.nontarget)
            .all(|s| s.is_finite())
        {
            return Err(Error::NonFinite("scores"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostParams {
    pub c_miss: f64,
    pub c_fa: f64,
    pub p_target: f64,
}

impl CostParams {
    pub const DET08: CostParams = CostParams {
        c_miss: 10.0,
        c_fa: 1.0,
        p_target: 0.01,
    };
    pub const DET10: CostParams = CostParams {
        c_miss: 1.0,
        c_fa: 1.0,
        p_target: 0.001,
    };

    fn validate(&self) -> Result<()> {
        let ok = self.c_miss > 0.0
            && self.c_fa > 0.0
            && self.c_miss.is_finite()
            && self.c_fa.is_finite()
            && self.p_target > 0.0
            && self.p_target < 1.0;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid cost parameters {self:?}"
            )))
        }
    }

    /// Cost of the better trivial system (accept all or reject all).
    pub fn default_cost(&self) -> f64 {
        (self.c_miss * self.p_target).min(self.c_fa * (1.0 - self.p_target))
    }
}

/// One operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetPoint {
    pub threshold: f64,
    pub p_fa: f64,
    pub p_miss: f64,
}

fn sorted(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Operating points by increasing threshold: `P_fa` falls from 1 to 0 while
/// `P_miss` rises from 0 to 1.
pub fn det_points(scores: &ScoreSet) -> Result<Vec<DetPoint>> {
    scores.validate()?;
    let tgt = sorted(&scores.target);
    let non = sorted(&scores.nontarget);
    let mut thresholds: Vec<f64> = tgt.iter().chain(&non).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();
    thresholds.push(f64::INFINITY);
    let (nt, nn) = (tgt.len() as f64, non.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut out = Vec::with_capacity(thresholds.len());
    for th in thresholds {
        while i < tgt.len() && tgt[i] < th {
            i += 1;
        }
        while j < non.len() && non[j] < th {
            j += 1;
        }
        out.push(DetPoint {
            threshold: th,
            p_fa: (non.len() - j) as f64 / nn,
            p_miss: i as f64 / nt,
        });
    }
    Ok(out)
}

/// Crossing of `P_miss` and `P_fa` along a threshold-ordered staircase,
/// interpolated linearly between the bracketing points.
pub fn eer_from_points(points: &[DetPoint]) -> Result<f64> {
    let first = points.first().ok_or(Error::Empty("operating points"))?;
    let diff = |p: &DetPoint| p.p_miss - p.p_fa;
    if diff(first) >= 0.0 {
        return Ok(first.p_miss);
    }
    for w in points.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        let (da, db) = (diff(a), diff(b));
        if db >= 0.0 {
            if db == 0.0 {
                return Ok(b.p_miss);
            }
            let t = -da / (db - da);
            return Ok(a.p_miss + t * (b.p_miss - a.p_miss));
        }
    }
    Err(Error::InvalidInput("operating points never cross".into()))
}

pub fn eer(scores: &ScoreSet) -> Result<f64> {
    eer_from_points(&det_points(scores)?)
}

/// Minimum normalized detection cost over all operating points.
pub fn min_dcf(scores: &ScoreSet, cost: &CostParams) -> Result<f64> {
    cost.validate()?;
    let norm = cost.default_cost();
    let best = det_points(scores)?
        .iter()
        .map(|p| {
            cost.c_miss * cost.p_target * p.p_miss + cost.c_fa * (1.0 - cost.p_target) * p.p_fa
        })
        .fold(f64::INFINITY, f64::min);
    Ok(best / norm)
}
