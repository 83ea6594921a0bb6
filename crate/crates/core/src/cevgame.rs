//! Continuous symmetric charging game.
//!
//! Each of `n` players splits a daily demand `M` into a peak quantity `q` and
//! an off-peak remainder `M - q`. With `Q` the total peak quantity and
//! `W = nM` the total demand, player costs are
//!
//! ```text
//! cD = bD·q·(1 - Q/M_D) + aD·q·Q/M_D + rD
//! cN = bN·(M - q)·(1 - (W - Q)/M_N) + aN·(M - q)·(W - Q)/M_N + rN
//! ```
//!
//! Equilibrium analysis works with the reduced quadratic
//! `A·q + B·q·Q - R·Q + η`. Expanding the two-part cost gives the same
//! `q` and `Q` terms except for a `2k·q·Q` correction and a constant
//! `M·(bN + k·W)`, where `k = (aN - bN)/M_N`; see [`ContinuousGame::form_gap`].

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{ConvexPolygon, HalfPlane};
use crate::model::{Severity, Violation};
use crate::{Error, Result};

pub const CCE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContinuousGame {
    pub n: usize,
    #[serde(rename = "M")]
    pub m: f64,
    #[serde(rename = "M_D")]
    pub m_d: f64,
    #[serde(rename = "M_N")]
    pub m_n: f64,
    #[serde(rename = "bD")]
    pub b_d: f64,
    #[serde(rename = "bN")]
    pub b_n: f64,
    #[serde(rename = "aD")]
    pub a_d: f64,
    #[serde(rename = "aN")]
    pub a_n: f64,
    #[serde(rename = "rD", default)]
    pub r_d: f64,
    #[serde(rename = "rN", default)]
    pub r_n: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Coefficients {
    #[serde(rename = "A")]
    pub a: f64,
    #[serde(rename = "B")]
    pub b: f64,
    #[serde(rename = "R")]
    pub r: f64,
    pub eta: f64,
    #[serde(rename = "W")]
    pub w: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CostForms {
    pub raw: f64,
    pub reduced: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InnerMin {
    pub z: f64,
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentTriple {
    pub g1: f64,
    pub g2: f64,
    pub g3: f64,
}

impl ContinuousGame {
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let err =
            |field: &str, rule: &str| Violation { field: field.into(), rule: rule.into(), severity: Severity::Error };
        if self.n < 1 {
            out.push(err("n", "need n >= 1"));
        }
        for (name, v) in [("M", self.m), ("M_D", self.m_d), ("M_N", self.m_n)] {
            if !(v.is_finite() && v > 0.0) {
                out.push(err(name, "must be finite and > 0"));
            }
        }
        for (name, v) in
            [("bD", self.b_d), ("bN", self.b_n), ("aD", self.a_d), ("aN", self.a_n), ("rD", self.r_d), ("rN", self.r_n)]
        {
            if !v.is_finite() {
                out.push(err(name, "must be finite"));
            }
        }
        if self.a_d <= self.b_d {
            out.push(err("aD", "convexity needs aD > bD"));
        }
        if self.a_n <= self.b_n {
            out.push(err("aN", "convexity needs aN > bN"));
        }
        out
    }

    pub fn ensure_valid(&self) -> Result<()> {
        let v = self.validate();
        if v.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGame(v))
        }
    }

    pub fn w(&self) -> f64 {
        self.n as f64 * self.m
    }

    fn k(&self) -> f64 {
        (self.a_n - self.b_n) / self.m_n
    }

    pub fn coefficients(&self) -> Coefficients {
        let w = self.w();
        Coefficients {
            a: self.b_d - self.a_n * w / self.m_n - self.b_n * (self.m_n - w) / self.m_n,
            b: (self.a_d - self.b_d) / self.m_d - (self.a_n - self.b_n) / self.m_n,
            r: (self.a_n - self.b_n) * self.m / self.m_n,
            eta: self.r_d + self.r_n,
            w,
        }
    }

    /// Two-part cost of a player choosing `q` when the total peak quantity is `total`.
    pub fn raw_cost(&self, q: f64, total: f64) -> f64 {
        let peak = self.b_d * q * (1.0 - total / self.m_d) + self.a_d * q * total / self.m_d + self.r_d;
        let spill = (self.w() - total) / self.m_n;
        let offpeak = self.b_n * (self.m - q) * (1.0 - spill) + self.a_n * (self.m - q) * spill + self.r_n;
        peak + offpeak
    }

    pub fn reduced_cost(&self, q: f64, total: f64) -> f64 {
        let c = self.coefficients();
        c.a * q + c.b * q * total - c.r * total + c.eta
    }

    /// `raw_cost - reduced_cost`, in closed form.
    pub fn form_gap(&self, q: f64, total: f64) -> f64 {
        let k = self.k();
        2.0 * k * q * total + self.m * (self.b_n + k * self.w())
    }

    fn b_nonzero(&self) -> Result<Coefficients> {
        self.ensure_valid()?;
        let c = self.coefficients();
        if c.b.abs() <= 1e-12 {
            return Err(Error::Degenerate(format!("B = {} vanishes", c.b)));
        }
        Ok(c)
    }

    fn b_positive(&self) -> Result<Coefficients> {
        let c = self.b_nonzero()?;
        if c.b <= 0.0 {
            return Err(Error::Degenerate(format!("B = {} is not positive", c.b)));
        }
        Ok(c)
    }

    /// Unclamped symmetric equilibrium quantity `(R - A)/(B(n + 1))`.
    pub fn nash_vertex(&self) -> Result<f64> {
        let c = self.b_nonzero()?;
        Ok((c.r - c.a) / (c.b * (self.n as f64 + 1.0)))
    }
}

fn check_quantities(game: &ContinuousGame, q: &[f64]) -> Result<()> {
    game.ensure_valid()?;
    if q.len() != game.n {
        return Err(Error::Usage(format!("expected {} quantities, got {}", game.n, q.len())));
    }
    if let Some(bad) = q.iter().find(|&&v| !(0.0..=game.m).contains(&v)) {
        return Err(Error::Usage(format!("quantity {bad} outside [0, M = {}]", game.m)));
    }
    Ok(())
}

/// Both cost forms for every player.
pub fn total_cost(game: &ContinuousGame, q: &[f64]) -> Result<Vec<CostForms>> {
    check_quantities(game, q)?;
    let total: f64 = q.iter().sum();
    Ok(q.iter().map(|&qi| CostForms { raw: game.raw_cost(qi, total), reduced: game.reduced_cost(qi, total) }).collect())
}

/// Symmetric equilibrium peak quantity, clamped to `[0, M]`.
pub fn nash_quantity(game: &ContinuousGame) -> Result<f64> {
    Ok(game.nash_vertex()?.clamp(0.0, game.m))
}

/// Player `i`'s cheapest quantity on the grid `k·M/resolution` (reduced
/// form), the others fixed. Returns the first minimiser and its cost.
pub fn grid_best_response(game: &ContinuousGame, q: &[f64], i: usize, resolution: usize) -> Result<(f64, f64)> {
    check_quantities(game, q)?;
    if i >= game.n || resolution == 0 {
        return Err(Error::Usage("bad player index or resolution".into()));
    }
    let others: f64 = q.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, v)| v).sum();
    let mut best = (0.0, f64::INFINITY);
    for k in 0..=resolution {
        let z = game.m * k as f64 / resolution as f64;
        let c = game.reduced_cost(z, z + others);
        if c < best.1 {
            best = (z, c);
        }
    }
    Ok(best)
}

/// `min over z in [0, M]` of `(A - R + B(n - 1)g1)·z + B·z²`.
pub fn cce_lhs_min(game: &ContinuousGame, g1: f64) -> Result<InnerMin> {
    let c = game.b_positive()?;
    let slope = c.a - c.r + c.b * (game.n as f64 - 1.0) * g1;
    let z = (-slope / (2.0 * c.b)).clamp(0.0, game.m);
    Ok(InnerMin { z, value: slope * z + c.b * z * z })
}

fn no_deviation_bound(c: &Coefficients, n: usize, g1: f64) -> f64 {
    let d = c.r - c.a;
    let s = d - c.b * (n as f64 - 1.0) * g1;
    (d * g1 - s * s / (4.0 * c.b)) / c.b
}

/// Upper bound on `g2 + (n-1)·g3` minus its lower bound `n·g1²`.
pub fn cce_gap(game: &ContinuousGame, g1: f64) -> Result<f64> {
    let c = game.b_positive()?;
    Ok(no_deviation_bound(&c, game.n, g1) - game.n as f64 * g1 * g1)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConstraintCheck {
    pub name: &'static str,
    /// Nonnegative when satisfied.
    pub slack: f64,
    pub satisfied: bool,
    pub binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CceReport {
    pub is_cce: bool,
    pub constraints: Vec<ConstraintCheck>,
}

fn slacks(game: &ContinuousGame, c: &Coefficients, m: &MomentTriple) -> [(&'static str, f64); 6] {
    let n = game.n as f64;
    let s = m.g2 + (n - 1.0) * m.g3;
    [
        ("g2_ge_g3", m.g2 - m.g3),
        ("g2_le_m_g1", game.m * m.g1 - m.g2),
        ("covariance_psd", s - n * m.g1 * m.g1),
        ("no_profitable_deviation", no_deviation_bound(c, game.n, m.g1) - s),
        ("g1_nonnegative", m.g1),
        ("g3_nonnegative", m.g3),
    ]
}

/// Checks the moment system of a symmetric coarse correlated equilibrium.
pub fn is_cce(game: &ContinuousGame, m: &MomentTriple, tol: f64) -> Result<CceReport> {
    let c = game.b_positive()?;
    let constraints: Vec<ConstraintCheck> = slacks(game, &c, m)
        .into_iter()
        .map(|(name, slack)| ConstraintCheck { name, slack, satisfied: slack >= -tol, binding: slack.abs() <= tol })
        .collect();
    Ok(CceReport { is_cce: constraints.iter().all(|k| k.satisfied), constraints })
}

/// Necessary conditions any symmetric distribution's moments satisfy,
/// independent of the cost structure.
pub fn moments_realizable(game: &ContinuousGame, m: &MomentTriple, tol: f64) -> bool {
    let n = game.n as f64;
    m.g1 >= -tol
        && m.g3 >= -tol
        && m.g2 - m.g3 >= -tol
        && game.m * m.g1 - m.g2 >= -tol
        && m.g2 + (n - 1.0) * m.g3 - n * m.g1 * m.g1 >= -tol
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanResult {
    pub resolution: usize,
    pub q_star: f64,
    pub interior: bool,
    pub step: f64,
    /// One representative triple per feasible cell, in grid order.
    pub feasible: Vec<MomentTriple>,
    pub max_g1_offset: f64,
    pub max_manifold_offset: f64,
    /// Coincidence with the equilibrium; only asserted at interior equilibria.
    pub verdict: Option<bool>,
}

/// Grid scan of `[0, M] × [0, M²] × [0, M²]` for feasible moment triples.
///
/// Within each `g1` cell the gap is largest at the point closest to the
/// equilibrium quantity, so cells whose best gap is below `-tol` are pruned.
/// Surviving cells are split into `resolution²` `(g2, g3)` cells, each
/// intersected exactly with the linear constraints at that `g1`.
pub fn cce_scan(game: &ContinuousGame, resolution: usize, tol: f64) -> Result<ScanResult> {
    let c = game.b_positive()?;
    if resolution == 0 {
        return Err(Error::Usage("resolution must be >= 1".into()));
    }
    let vertex = game.nash_vertex()?;
    let q_star = vertex.clamp(0.0, game.m);
    let n = game.n as f64;
    let step = game.m / resolution as f64;
    let sq = game.m * game.m;
    let step2 = sq / resolution as f64;

    let feasible: Vec<MomentTriple> = (0..resolution)
        .into_par_iter()
        .flat_map_iter(|k| {
            let lo = k as f64 * step;
            let hi = if k + 1 == resolution { game.m } else { (k + 1) as f64 * step };
            let g1 = vertex.clamp(lo, hi);
            let gap = no_deviation_bound(&c, game.n, g1) - n * g1 * g1;
            let mut found = Vec::new();
            if gap < -tol {
                return found.into_iter();
            }
            // constraints over (g2, g3)
            let hs = [
                HalfPlane::new(-1.0, 1.0, 0.0),
                HalfPlane::new(1.0, 0.0, game.m * g1),
                HalfPlane::new(-1.0, -(n - 1.0), -n * g1 * g1),
                HalfPlane::new(1.0, n - 1.0, no_deviation_bound(&c, game.n, g1)),
            ];
            for a in 0..resolution {
                for b in 0..resolution {
                    let cell = ConvexPolygon::rect(
                        [a as f64 * step2, (a + 1) as f64 * step2],
                        [b as f64 * step2, (b + 1) as f64 * step2],
                    );
                    if let Some(p) = cell.clip_all(&hs, tol).centroid() {
                        found.push(MomentTriple { g1, g2: p[0], g3: p[1] });
                    }
                }
            }
            found.into_iter()
        })
        .collect();

    let max_g1_offset = feasible.iter().map(|m| (m.g1 - q_star).abs()).fold(0.0, f64::max);
    let max_manifold_offset =
        feasible.iter().map(|m| (m.g2 + (n - 1.0) * m.g3 - n * m.g1 * m.g1).abs()).fold(0.0, f64::max);
    let interior = vertex > 0.0 && vertex < game.m;
    let manifold_tol = (10.0 * tol * n).max(1e-8);
    let verdict =
        interior.then_some(!feasible.is_empty() && max_g1_offset <= step && max_manifold_offset <= manifold_tol);
    Ok(ScanResult { resolution, q_star, interior, step, feasible, max_g1_offset, max_manifold_offset, verdict })
}
