//! Rank-based pseudo-observations and integrals against the empirical copula.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum RankScaling {
    /// `R / (n + 1)`: every point stays strictly inside the square.
    #[default]
    #[serde(rename = "n-plus-1")]
    NPlusOne,
    /// `R / n`: the largest rank maps onto the boundary.
    #[serde(rename = "n")]
    N,
}

impl std::str::FromStr for RankScaling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "n-plus-1" | "n+1" => Ok(RankScaling::NPlusOne),
            "n" => Ok(RankScaling::N),
            other => Err(Error::InvalidArgument(format!(
                "unknown pseudo-observation mode '{other}' (expected n-plus-1 or n)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TiePolicy {
    #[default]
    Midrank,
}

/// Pseudo-observations `(û1k, û2k)`; immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoSample {
    points: Vec<(f64, f64)>,
    mode: RankScaling,
    tie_policy: TiePolicy,
    ties: bool,
}

/// Midranks (1-based) of `x`.
fn midranks(x: &[f64]) -> (Vec<f64>, bool) {
    let n = x.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; n];
    let mut ties = false;
    let mut i = 0;
    while i < n {
        let mut j = i + 1;
        while j < n && x[order[j]] == x[order[i]] {
            j += 1;
        }
        if j - i > 1 {
            ties = true;
        }
        // positions i..j share the average of ranks i+1..=j
        let r = 0.5 * ((i + 1) + j) as f64;
        for &k in &order[i..j] {
            ranks[k] = r;
        }
        i = j;
    }
    (ranks, ties)
}

pub fn pseudo_observations(
    data: &[(f64, f64)],
    mode: RankScaling,
    tie_policy: TiePolicy,
) -> Result<PseudoSample> {
    let n = data.len();
    if n < 2 {
        return Err(Error::InsufficientData(n));
    }
    if let Some(index) = data
        .iter()
        .position(|(a, b)| !a.is_finite() || !b.is_finite())
    {
        return Err(Error::NonFiniteData { index });
    }
    let xs: Vec<f64> = data.iter().map(|p| p.0).collect();
    let ys: Vec<f64> = data.iter().map(|p| p.1).collect();
    let (r1, t1) = midranks(&xs);
    let (r2, t2) = midranks(&ys);
    let denom = match mode {
        RankScaling::NPlusOne => (n + 1) as f64,
        RankScaling::N => n as f64,
    };
    let points = r1
        .iter()
        .zip(&r2)
        .map(|(&a, &b)| (a / denom, b / denom))
        .collect();
    Ok(PseudoSample {
        points,
        mode,
        tie_policy,
        ties: t1 || t2,
    })
}

impl PseudoSample {
    pub fn n(&self) -> usize {
        self.points.len()
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn mode(&self) -> RankScaling {
        self.mode
    }

    pub fn tie_policy(&self) -> TiePolicy {
        self.tie_policy
    }

    pub fn has_ties(&self) -> bool {
        self.ties
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut out = Vec::new();
        if self.ties {
            out.push("ties detected in the data; midranks were used".to_string());
        }
        if self.mode == RankScaling::N {
            out.push(
                "pseudo-observations scaled by n: the largest rank sits on the boundary".to_string(),
            );
        }
        out
    }

    /// `C_n(u1, u2)`.
    pub fn empirical_copula(&self, u1: f64, u2: f64) -> f64 {
        let count = self
            .points
            .iter()
            .filter(|&&(a, b)| a <= u1 && b <= u2)
            .count();
        count as f64 / self.n() as f64
    }

    /// `∫ ψ dC_n = (1/n) Σ ψ(ûk)`, failing on the first non-finite value.
    pub fn rank_integral<F: FnMut(f64, f64) -> f64>(&self, mut psi: F) -> Result<f64> {
        let mut acc = 0.0;
        for &(a, b) in &self.points {
            let v = psi(a, b);
            if !v.is_finite() {
                return Err(Error::NonFiniteEvaluation {
                    u1: a,
                    u2: b,
                    value: v,
                });
            }
            acc += v;
        }
        Ok(acc / self.n() as f64)
    }
}
