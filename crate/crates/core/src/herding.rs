//! Stability of the herding profile, where every player charges only off-peak.
//!
//! Under herding each off-peak period carries all `n` players, so a player
//! receives `x = P/n` and pays `x·bN + f(x)` per period. Moving one period to an
//! empty peak slot costs `bD` instead, so herding is deviated exactly when
//! `f(x) > bD - bN·x`.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{binomial, is_nash};
use crate::model::{Dissatisfaction, GameInstance, Player, StrategyProfile};
use crate::roots::{bisect, positive_regions, MAX_ITER, ROOT_TOL};
use crate::{Error, Result};

/// Sample count of the scan used when no single bracket is available.
pub const SCAN_SAMPLES: usize = 10_000;

/// Congestion indicator under herding, capped at 1 (no congestion).
pub fn herding_x(n: usize, capacity: f64) -> f64 {
    if n == 0 {
        return 1.0;
    }
    (capacity / n as f64).min(1.0)
}

/// Strict profitability of leaving herding at congestion `x`.
pub fn deviation_test(f: &Dissatisfaction, x: f64, bd: f64, bn: f64) -> bool {
    f.eval(x) > bd - bn * x
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ThresholdKind {
    /// No congestion level in `(0, 1)` makes deviation profitable.
    AlwaysStable,
    /// Deviation is profitable at every congestion level in `(0, 1)`.
    AlwaysDeviated,
    /// Deviated for `x <= x_hat`, stable above.
    Threshold { x_hat: f64 },
    /// Deviated exactly on these subintervals of `(0, 1)`.
    Regions { intervals: Vec<(f64, f64)> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThresholdResult {
    #[serde(flatten)]
    pub kind: ThresholdKind,
    pub f0: f64,
    pub f1: f64,
    /// `bD`, the right-hand side at `x = 0`.
    pub rhs0: f64,
    /// `bD - bN`, the right-hand side at `x = 1`.
    pub rhs1: f64,
}

impl ThresholdResult {
    fn new(kind: ThresholdKind, f: &Dissatisfaction, bd: f64, bn: f64) -> Self {
        ThresholdResult { kind, f0: f.eval(0.0), f1: f.eval(1.0), rhs0: bd, rhs1: bd - bn }
    }

    pub fn x_hat(&self) -> Option<f64> {
        match self.kind {
            ThresholdKind::Threshold { x_hat } => Some(x_hat),
            _ => None,
        }
    }

    /// Whether herding is predicted to be deviated at congestion `x`.
    pub fn predicts_deviation(&self, x: f64) -> bool {
        if x >= 1.0 {
            return false;
        }
        match &self.kind {
            ThresholdKind::AlwaysStable => false,
            ThresholdKind::AlwaysDeviated => true,
            ThresholdKind::Threshold { x_hat } => x <= *x_hat,
            ThresholdKind::Regions { intervals } => intervals.iter().any(|&(lo, hi)| lo <= x && x <= hi),
        }
    }
}

fn check_prices(bd: f64, bn: f64) -> Result<()> {
    if !(bd.is_finite() && bn.is_finite() && bn >= 0.0 && bd > bn) {
        return Err(Error::Usage(format!("threshold analysis needs bD > bN >= 0, got bD = {bd}, bN = {bn}")));
    }
    Ok(())
}

fn check_curve(alpha: f64, beta: f64) -> Result<()> {
    if !(alpha.is_finite() && alpha >= 0.0 && beta.is_finite() && beta > 0.0) {
        return Err(Error::Usage(format!("need alpha >= 0 and beta > 0, got alpha = {alpha}, beta = {beta}")));
    }
    Ok(())
}

/// Threshold for `f(x) = max(0, alpha - beta·x)`.
pub fn linear_threshold(alpha: f64, beta: f64, bd: f64, bn: f64) -> Result<ThresholdResult> {
    check_curve(alpha, beta)?;
    check_prices(bd, bn)?;
    let f = Dissatisfaction::linear(alpha, beta);
    let kind = if alpha <= bd {
        ThresholdKind::AlwaysStable
    } else if beta <= bn {
        ThresholdKind::AlwaysDeviated
    } else {
        let x_hat = (alpha - bd) / (beta - bn);
        if x_hat >= 1.0 {
            ThresholdKind::AlwaysDeviated
        } else {
            ThresholdKind::Threshold { x_hat }
        }
    };
    Ok(ThresholdResult::new(kind, &f, bd, bn))
}

/// Threshold for `f(x) = alpha / (1 + exp(beta·(2x - 1)))`, by bisection.
pub fn logistic_threshold(alpha: f64, beta: f64, bd: f64, bn: f64) -> Result<ThresholdResult> {
    logistic_threshold_tol(alpha, beta, bd, bn, ROOT_TOL)
}

pub fn logistic_threshold_tol(alpha: f64, beta: f64, bd: f64, bn: f64, tol: f64) -> Result<ThresholdResult> {
    check_curve(alpha, beta)?;
    check_prices(bd, bn)?;
    let f = Dissatisfaction::logistic(alpha, beta);
    if bd >= alpha {
        return Ok(ThresholdResult::new(ThresholdKind::AlwaysStable, &f, bd, bn));
    }
    let g = |x: f64| f.eval(x) - (bd - bn * x);
    if g(0.0) > 0.0 && g(1.0) < 0.0 {
        let x_hat = bisect(g, 0.0, 1.0, tol, MAX_ITER)?;
        return Ok(ThresholdResult::new(ThresholdKind::Threshold { x_hat }, &f, bd, bn));
    }
    scan_threshold_tol(&f, bd, bn, tol)
}

/// Generic deviation regions for any curve, by scanning `(0, 1)`.
pub fn scan_threshold(f: &Dissatisfaction, bd: f64, bn: f64) -> Result<ThresholdResult> {
    scan_threshold_tol(f, bd, bn, ROOT_TOL)
}

pub fn scan_threshold_tol(f: &Dissatisfaction, bd: f64, bn: f64, tol: f64) -> Result<ThresholdResult> {
    if !(bd.is_finite() && bn.is_finite()) {
        return Err(Error::Usage("prices must be finite".into()));
    }
    let g = |x: f64| f.eval(x) - (bd - bn * x);
    let intervals = positive_regions(g, 0.0, 1.0, SCAN_SAMPLES, tol);
    let kind = match intervals.as_slice() {
        [] => ThresholdKind::AlwaysStable,
        [(lo, hi)] if *lo == 0.0 && *hi == 1.0 => ThresholdKind::AlwaysDeviated,
        [(lo, hi)] if *lo == 0.0 => ThresholdKind::Threshold { x_hat: *hi },
        _ => ThresholdKind::Regions { intervals },
    };
    Ok(ThresholdResult::new(kind, f, bd, bn))
}

/// Dispatches on the curve kind.
pub fn threshold_for(f: &Dissatisfaction, bd: f64, bn: f64) -> Result<ThresholdResult> {
    threshold_for_tol(f, bd, bn, ROOT_TOL)
}

/// As [`threshold_for`] with root tolerance `tol`; the linear case is exact.
pub fn threshold_for_tol(f: &Dissatisfaction, bd: f64, bn: f64, tol: f64) -> Result<ThresholdResult> {
    if tol.is_nan() || tol <= 0.0 {
        return Err(Error::Usage("tolerance must be positive".into()));
    }
    match *f {
        Dissatisfaction::Linear { alpha, beta } => linear_threshold(alpha, beta, bd, bn),
        Dissatisfaction::Logistic { alpha, beta } => logistic_threshold_tol(alpha, beta, bd, bn, tol),
        _ => scan_threshold_tol(f, bd, bn, tol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CurvePoint {
    pub x: f64,
    pub f: f64,
    pub rhs: f64,
}

/// `samples + 1` equally spaced points of `f` and `bD - bN·x` on `[0, 1]`.
pub fn curve_samples(f: &Dissatisfaction, bd: f64, bn: f64, samples: usize) -> Vec<CurvePoint> {
    let samples = samples.max(1);
    (0..=samples)
        .map(|k| {
            let x = k as f64 / samples as f64;
            CurvePoint { x, f: f.eval(x), rhs: bd - bn * x }
        })
        .collect()
}

/// Homogeneous instance family indexed by the number of players.
///
/// `demand` off-peak periods are followed by `periods - demand` peak
/// periods, all with the same capacity, and every player is `player`.
#[derive(Debug, Clone, PartialEq)]
pub struct HerdingTemplate {
    pub periods: usize,
    pub capacity: f64,
    pub player: Player,
}

impl HerdingTemplate {
    pub fn new(periods: usize, capacity: f64, player: Player) -> Result<Self> {
        let t = HerdingTemplate { periods, capacity, player };
        t.game(1).ensure_valid()?;
        if t.player.demand >= periods {
            return Err(Error::Usage("herding needs at least one peak period (d < T)".into()));
        }
        Ok(t)
    }

    /// Recovers the template from a homogeneous game with `T_offpeak = d`.
    pub fn from_game(game: &GameInstance) -> Result<Self> {
        game.ensure_valid()?;
        let first = game.players.first().ok_or_else(|| Error::Usage("scenario has no players".into()))?;
        if game.players.iter().any(|p| p != first) {
            return Err(Error::Usage("herding analysis needs identical players".into()));
        }
        let capacity = game.capacities[0];
        if game.capacities.iter().any(|&c| c != capacity) {
            return Err(Error::Usage("herding analysis needs equal capacities".into()));
        }
        if game.offpeak_periods != first.demand {
            return Err(Error::Usage(format!(
                "herding analysis needs T_offpeak = d, got T_offpeak = {} and d = {}",
                game.offpeak_periods, first.demand
            )));
        }
        Self::new(game.periods, capacity, first.clone())
    }

    pub fn game(&self, n: usize) -> GameInstance {
        GameInstance {
            periods: self.periods,
            offpeak_periods: self.player.demand,
            capacities: vec![self.capacity; self.periods],
            players: vec![self.player.clone(); n],
        }
    }

    pub fn herding_profile(&self, n: usize) -> StrategyProfile {
        let row: Vec<bool> = (0..self.periods).map(|t| t < self.player.demand).collect();
        StrategyProfile::new(vec![row; n]).expect("rows share one length")
    }

    pub fn threshold(&self) -> Result<ThresholdResult> {
        threshold_for(&self.player.f_offpeak, self.player.price_peak, self.player.price_offpeak)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub n: usize,
    pub x: f64,
    pub herding_is_nash: bool,
    /// Herding predicted to be an equilibrium by the threshold analysis.
    pub threshold_prediction: bool,
}

/// Runs the full equilibrium check on the herding profile for every `n`.
/// Each check scans `n·C(T, d)` rows; sizes above `cap` are refused.
pub fn herding_sweep(
    template: &HerdingTemplate,
    ns: impl IntoIterator<Item = usize>,
    cap: u128,
) -> Result<Vec<SweepRow>> {
    let threshold = template.threshold()?;
    let ns: Vec<usize> = ns.into_iter().filter(|&n| n >= 1).collect();
    let per_player = binomial(template.periods, template.player.demand);
    if let Some(&n_max) = ns.iter().max() {
        let count = per_player.saturating_mul(n_max as u128);
        if count > cap {
            return Err(Error::CapExceeded { count, cap });
        }
    }
    ns.par_iter()
        .map(|&n| {
            let game = template.game(n);
            let profile = template.herding_profile(n);
            let x = herding_x(n, template.capacity);
            Ok(SweepRow {
                n,
                x,
                herding_is_nash: is_nash(&game, &profile)?.is_nash,
                threshold_prediction: !threshold.predicts_deviation(x),
            })
        })
        .collect()
}
