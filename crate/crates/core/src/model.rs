//! Discrete EV charging game: players, periods, capacities and per-period
//! energy allocation.
//!
//! Periods `0..offpeak_periods` are off-peak, the rest are peak. When the
//! total plugged rating in a period exceeds its capacity every plugged player
//! receives the same fraction `x = P_t / load` of its rating and pays a
//! dissatisfaction cost `f(x)`; otherwise it receives its full rating and no
//! dissatisfaction is charged.

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::ser::{self, SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Curves supplied as closures for analysis. They are never serialized.
pub type CustomCurve = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Dissatisfaction as a function of the allocation ratio `x`.
#[derive(Clone, Default)]
pub enum Dissatisfaction {
    #[default]
    None,
    /// `max(0, alpha - beta * x)` for `x < 1`, zero from `x = 1` on.
    Linear {
        alpha: f64,
        beta: f64,
    },
    /// `alpha / (1 + exp(beta * (2x - 1)))`.
    Logistic {
        alpha: f64,
        beta: f64,
    },
    Custom(CustomCurve),
}

impl Dissatisfaction {
    pub fn linear(alpha: f64, beta: f64) -> Self {
        Dissatisfaction::Linear { alpha, beta }
    }

    pub fn logistic(alpha: f64, beta: f64) -> Self {
        Dissatisfaction::Logistic { alpha, beta }
    }

    pub fn custom(f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Dissatisfaction::Custom(Arc::new(f))
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Dissatisfaction::None => 0.0,
            Dissatisfaction::Linear { alpha, beta } => {
                if x >= 1.0 {
                    0.0
                } else {
                    (alpha - beta * x).max(0.0)
                }
            }
            Dissatisfaction::Logistic { alpha, beta } => alpha / (1.0 + (beta * (2.0 * x - 1.0)).exp()),
            Dissatisfaction::Custom(f) => f(x),
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            Dissatisfaction::None => "none",
            Dissatisfaction::Linear { .. } => "linear",
            Dissatisfaction::Logistic { .. } => "logistic",
            Dissatisfaction::Custom(_) => "custom",
        }
    }

    /// `(alpha, beta)` for the parametric kinds.
    pub fn params(&self) -> Option<(f64, f64)> {
        match *self {
            Dissatisfaction::Linear { alpha, beta } | Dissatisfaction::Logistic { alpha, beta } => Some((alpha, beta)),
            _ => None,
        }
    }
}

impl fmt::Debug for Dissatisfaction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Dissatisfaction::None => write!(f, "None"),
            Dissatisfaction::Linear { alpha, beta } => {
                write!(f, "Linear {{ alpha: {alpha}, beta: {beta} }}")
            }
            Dissatisfaction::Logistic { alpha, beta } => {
                write!(f, "Logistic {{ alpha: {alpha}, beta: {beta} }}")
            }
            Dissatisfaction::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

impl PartialEq for Dissatisfaction {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (Dissatisfaction::None, Dissatisfaction::None) => true,
            (Dissatisfaction::Linear { alpha: a1, beta: b1 }, Dissatisfaction::Linear { alpha: a2, beta: b2 })
            | (Dissatisfaction::Logistic { alpha: a1, beta: b1 }, Dissatisfaction::Logistic { alpha: a2, beta: b2 }) => {
                a1 == a2 && b1 == b2
            }
            (Dissatisfaction::Custom(a), Dissatisfaction::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl Serialize for Dissatisfaction {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let (alpha, beta) = match self {
            Dissatisfaction::None => (0.0, 0.0),
            Dissatisfaction::Linear { alpha, beta } | Dissatisfaction::Logistic { alpha, beta } => (*alpha, *beta),
            Dissatisfaction::Custom(_) => {
                return Err(ser::Error::custom("custom dissatisfaction curves are not serializable"))
            }
        };
        let mut s = serializer.serialize_struct("Dissatisfaction", 3)?;
        s.serialize_field("kind", self.kind_name())?;
        s.serialize_field("alpha", &alpha)?;
        s.serialize_field("beta", &beta)?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Dissatisfaction {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(rename_all = "lowercase")]
        enum Kind {
            None,
            Linear,
            Logistic,
        }

        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Spec {
            kind: Kind,
            #[serde(default)]
            alpha: Option<f64>,
            #[serde(default)]
            beta: Option<f64>,
        }

        let spec = Spec::deserialize(deserializer)?;
        let need = |v: Option<f64>, name: &str| {
            v.ok_or_else(|| de::Error::custom(format!("dissatisfaction `{name}` is required")))
        };
        Ok(match spec.kind {
            Kind::None => Dissatisfaction::None,
            Kind::Linear => {
                Dissatisfaction::Linear { alpha: need(spec.alpha, "alpha")?, beta: need(spec.beta, "beta")? }
            }
            Kind::Logistic => {
                Dissatisfaction::Logistic { alpha: need(spec.alpha, "alpha")?, beta: need(spec.beta, "beta")? }
            }
        })
    }
}

fn unit_rating() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Player {
    /// Number of periods the player must charge in.
    #[serde(rename = "d")]
    pub demand: usize,
    /// Power rating in kW.
    #[serde(rename = "r", default = "unit_rating")]
    pub rating: f64,
    #[serde(rename = "bD")]
    pub price_peak: f64,
    #[serde(rename = "bN")]
    pub price_offpeak: f64,
    pub f_peak: Dissatisfaction,
    pub f_offpeak: Dissatisfaction,
}

impl Player {
    /// Unit-rated player with the same dissatisfaction in both period classes.
    pub fn new(demand: usize, price_peak: f64, price_offpeak: f64, f: Dissatisfaction) -> Self {
        Player { demand, rating: 1.0, price_peak, price_offpeak, f_peak: f.clone(), f_offpeak: f }
    }

    pub fn price(&self, class: PeriodClass) -> f64 {
        match class {
            PeriodClass::Offpeak => self.price_offpeak,
            PeriodClass::Peak => self.price_peak,
        }
    }

    pub fn dissatisfaction(&self, class: PeriodClass) -> &Dissatisfaction {
        match class {
            PeriodClass::Offpeak => &self.f_offpeak,
            PeriodClass::Peak => &self.f_peak,
        }
    }

    pub fn with_prices(mut self, price_peak: f64, price_offpeak: f64) -> Self {
        self.price_peak = price_peak;
        self.price_offpeak = price_offpeak;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PeriodClass {
    Offpeak,
    Peak,
}

/// Largest supported period count; strategies are enumerated as bit masks.
pub const MAX_PERIODS: usize = 128;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameInstance {
    #[serde(rename = "T")]
    pub periods: usize,
    #[serde(rename = "T_offpeak")]
    pub offpeak_periods: usize,
    pub capacities: Vec<f64>,
    pub players: Vec<Player>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    /// Allowed, but outside the usual modelling assumptions.
    Warning,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub field: String,
    pub rule: String,
    pub severity: Severity,
}

impl Violation {
    fn error(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into(), severity: Severity::Error }
    }

    fn warning(field: impl Into<String>, rule: impl Into<String>) -> Self {
        Violation { field: field.into(), rule: rule.into(), severity: Severity::Warning }
    }
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let tag = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{tag}: {}: {}", self.field, self.rule)
    }
}

fn check_curve(field: String, curve: &Dissatisfaction, out: &mut Vec<Violation>) {
    if let Some((alpha, beta)) = curve.params() {
        if !(alpha.is_finite() && alpha >= 0.0) {
            out.push(Violation::error(format!("{field}.alpha"), "alpha must be finite and >= 0"));
        }
        if !(beta.is_finite() && beta > 0.0) {
            out.push(Violation::error(format!("{field}.beta"), "beta must be finite and > 0"));
        }
    }
}

impl GameInstance {
    pub fn n_players(&self) -> usize {
        self.players.len()
    }

    pub fn class_of(&self, t: usize) -> PeriodClass {
        if t < self.offpeak_periods {
            PeriodClass::Offpeak
        } else {
            PeriodClass::Peak
        }
    }

    /// Checks every structural invariant. Never fails; an empty list means
    /// the instance is well formed.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let t = self.periods;
        if t == 0 || t > MAX_PERIODS {
            out.push(Violation::error("T", format!("need 1 <= T <= {MAX_PERIODS}")));
        }
        if self.offpeak_periods < 1 || self.offpeak_periods > t {
            out.push(Violation::error("T_offpeak", "need 1 <= T_offpeak <= T"));
        }
        if self.capacities.len() != t {
            out.push(Violation::error(
                "capacities",
                format!("expected {t} capacities, found {}", self.capacities.len()),
            ));
        }
        for (k, &p) in self.capacities.iter().enumerate() {
            if !(p.is_finite() && p >= 1.0) {
                out.push(Violation::error(
                    format!("capacities[{k}]"),
                    format!("capacity must be >= 1 (P_t >= 1), got {p}"),
                ));
            }
        }
        for (i, player) in self.players.iter().enumerate() {
            if player.demand < 1 {
                out.push(Violation::error(format!("players[{i}].d"), "demand must be >= 1"));
            }
            if player.demand > t {
                out.push(Violation::error(
                    format!("players[{i}].d"),
                    format!("demand must satisfy d <= T ({} > {t})", player.demand),
                ));
            }
            if !(player.rating.is_finite() && player.rating > 0.0) {
                out.push(Violation::error(format!("players[{i}].r"), "rating must be > 0"));
            }
            if !(player.price_peak.is_finite() && player.price_offpeak.is_finite()) {
                out.push(Violation::error(format!("players[{i}]"), "prices must be finite"));
            } else if player.price_peak <= player.price_offpeak {
                out.push(Violation::warning(
                    format!("players[{i}].bD"),
                    "peak price is expected to exceed the off-peak price",
                ));
            }
            check_curve(format!("players[{i}].f_peak"), &player.f_peak, &mut out);
            check_curve(format!("players[{i}].f_offpeak"), &player.f_offpeak, &mut out);
        }
        out
    }

    /// Fails when [`validate`](Self::validate) reports any error-severity
    /// violation; warnings are tolerated.
    pub fn ensure_valid(&self) -> Result<()> {
        let errors: Vec<_> = self.validate().into_iter().filter(|v| v.severity == Severity::Error).collect();
        if errors.is_empty() {
            Ok(())
        } else {
            Err(Error::InvalidGame(errors))
        }
    }

    pub fn check_profile(&self, profile: &StrategyProfile) -> Result<()> {
        if profile.n_players() != self.n_players() {
            return Err(Error::InvalidProfile(format!(
                "profile has {} rows but the game has {} players",
                profile.n_players(),
                self.n_players()
            )));
        }
        for (i, (row, player)) in profile.rows().iter().zip(&self.players).enumerate() {
            if row.len() != self.periods {
                return Err(Error::InvalidProfile(format!(
                    "row {i} has {} entries, expected T = {}",
                    row.len(),
                    self.periods
                )));
            }
            let sum = row.iter().filter(|&&s| s).count();
            if sum != player.demand {
                return Err(Error::InvalidProfile(format!(
                    "row {i} charges in {sum} periods but its demand is d = {} (row sums must equal demand)",
                    player.demand
                )));
            }
        }
        Ok(())
    }

    fn check_indices(&self, profile: &StrategyProfile, i: usize, t: usize) -> Result<()> {
        if i >= self.n_players() || i >= profile.n_players() {
            return Err(Error::Usage(format!("player index {i} out of range")));
        }
        if t >= self.periods || t >= profile.periods() {
            return Err(Error::Usage(format!("period index {t} out of range")));
        }
        Ok(())
    }

    /// Total plugged rating in period `t`.
    pub fn period_load(&self, profile: &StrategyProfile, t: usize) -> f64 {
        profile.rows().iter().zip(&self.players).filter(|(row, _)| row[t]).map(|(_, p)| p.rating).sum()
    }

    fn period_terms(&self, profile: &StrategyProfile, i: usize, t: usize) -> PeriodCost {
        let load = self.period_load(profile, t);
        let class = self.class_of(t);
        let player = &self.players[i];
        let capacity = self.capacities[t];
        let allocation = if load > capacity { Allocation::Ratio(capacity / load) } else { Allocation::Uncongested };
        let (energy, dissat) = if !profile.is_plugged(i, t) {
            (0.0, 0.0)
        } else {
            match allocation {
                Allocation::Uncongested => (player.rating, 0.0),
                Allocation::Ratio(x) => (capacity * player.rating / load, player.dissatisfaction(class).eval(x)),
            }
        };
        PeriodCost { period: t, class, load, allocation, energy, direct: player.price(class) * energy, dissat }
    }

    /// Energy (kWh) player `i` receives in period `t`.
    pub fn period_energy(&self, profile: &StrategyProfile, i: usize, t: usize) -> Result<f64> {
        self.check_indices(profile, i, t)?;
        Ok(self.period_terms(profile, i, t).energy)
    }

    /// Dissatisfaction cost player `i` incurs in period `t`.
    pub fn period_dissatisfaction(&self, profile: &StrategyProfile, i: usize, t: usize) -> Result<f64> {
        self.check_indices(profile, i, t)?;
        Ok(self.period_terms(profile, i, t).dissat)
    }

    pub fn player_cost(&self, profile: &StrategyProfile, i: usize) -> Result<CostBreakdown> {
        self.check_indices(profile, i, 0)?;
        Ok(self.player_cost_unchecked(profile, i))
    }

    /// Cost breakdown without index checks; `profile` must fit the game.
    pub(crate) fn player_cost_unchecked(&self, profile: &StrategyProfile, i: usize) -> CostBreakdown {
        let per_period: Vec<_> = (0..self.periods).map(|t| self.period_terms(profile, i, t)).collect();
        let total_direct = per_period.iter().map(|p| p.direct).sum::<f64>();
        let total_dissat = per_period.iter().map(|p| p.dissat).sum::<f64>();
        CostBreakdown { per_period, total_direct, total_dissat, total: total_direct + total_dissat }
    }

    /// Total cost of player `i`, computed exactly as [`CostBreakdown::total`].
    pub(crate) fn total_cost_unchecked(&self, profile: &StrategyProfile, i: usize) -> f64 {
        let mut direct = 0.0;
        let mut dissat = 0.0;
        for t in 0..self.periods {
            let terms = self.period_terms(profile, i, t);
            direct += terms.direct;
            dissat += terms.dissat;
        }
        direct + dissat
    }

    /// Same game with every player's prices replaced.
    pub fn with_uniform_prices(&self, price_peak: f64, price_offpeak: f64) -> GameInstance {
        let mut game = self.clone();
        for p in &mut game.players {
            p.price_peak = price_peak;
            p.price_offpeak = price_offpeak;
        }
        game
    }

    /// Same game with per-player `(peak, offpeak)` prices.
    pub fn with_player_prices(&self, prices: &[(f64, f64)]) -> Result<GameInstance> {
        if prices.len() != self.n_players() {
            return Err(Error::Usage(format!("expected {} price pairs, got {}", self.n_players(), prices.len())));
        }
        let mut game = self.clone();
        for (p, &(bd, bn)) in game.players.iter_mut().zip(prices) {
            p.price_peak = bd;
            p.price_offpeak = bn;
        }
        Ok(game)
    }
}

/// One binary row per player; `rows[i][t]` is true when player `i` charges in
/// period `t`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct StrategyProfile {
    rows: Vec<Vec<bool>>,
}

impl StrategyProfile {
    pub fn new(rows: Vec<Vec<bool>>) -> Result<Self> {
        if let Some(first) = rows.first() {
            if rows.iter().any(|r| r.len() != first.len()) {
                return Err(Error::InvalidProfile("rows have different lengths".into()));
            }
        }
        Ok(StrategyProfile { rows })
    }

    /// Builds a profile from 0/1 rows.
    pub fn from_bits(rows: &[&[u8]]) -> Result<Self> {
        let rows = rows
            .iter()
            .map(|r| {
                r.iter()
                    .map(|&b| match b {
                        0 => Ok(false),
                        1 => Ok(true),
                        other => Err(Error::InvalidProfile(format!("entry {other} is not 0 or 1"))),
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(rows)
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.rows
    }

    pub fn row(&self, i: usize) -> &[bool] {
        &self.rows[i]
    }

    pub fn n_players(&self) -> usize {
        self.rows.len()
    }

    pub fn periods(&self) -> usize {
        self.rows.first().map_or(0, Vec::len)
    }

    pub fn is_plugged(&self, i: usize, t: usize) -> bool {
        self.rows[i][t]
    }

    /// Copy of the profile with player `i`'s row replaced.
    pub fn with_row(&self, i: usize, row: Vec<bool>) -> StrategyProfile {
        let mut rows = self.rows.clone();
        rows[i] = row;
        StrategyProfile { rows }
    }

    pub(crate) fn set_row(&mut self, i: usize, row: &[bool]) {
        self.rows[i].copy_from_slice(row);
    }
}

impl Serialize for StrategyProfile {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        let bits: Vec<Vec<u8>> = self.rows.iter().map(|r| bits_of(r)).collect();
        bits.serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for StrategyProfile {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = Vec::<Vec<u8>>::deserialize(deserializer)?;
        let refs: Vec<&[u8]> = raw.iter().map(Vec::as_slice).collect();
        StrategyProfile::from_bits(&refs).map_err(de::Error::custom)
    }
}

pub(crate) fn bits_of(row: &[bool]) -> Vec<u8> {
    row.iter().map(|&b| u8::from(b)).collect()
}

/// Allocation ratio of a period: only defined when the period is congested.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Allocation {
    Uncongested,
    Ratio(f64),
}

impl Allocation {
    pub fn ratio(self) -> Option<f64> {
        match self {
            Allocation::Uncongested => None,
            Allocation::Ratio(x) => Some(x),
        }
    }
}

impl Serialize for Allocation {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        match self {
            Allocation::Uncongested => serializer.serialize_str("uncongested"),
            Allocation::Ratio(x) => serializer.serialize_f64(*x),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PeriodCost {
    pub period: usize,
    pub class: PeriodClass,
    pub load: f64,
    #[serde(rename = "x")]
    pub allocation: Allocation,
    pub energy: f64,
    pub direct: f64,
    pub dissat: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CostBreakdown {
    pub per_period: Vec<PeriodCost>,
    pub total_direct: f64,
    pub total_dissat: f64,
    pub total: f64,
}
