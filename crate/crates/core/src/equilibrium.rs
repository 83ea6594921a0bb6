//! Best responses and pure Nash equilibria of the discrete game.
//!
//! A profile is an equilibrium when no player can lower its own cost by more
//! than [`TIE_EPS`] by switching to another row with the same demand, the
//! others held fixed. Indifferent alternatives do not break an equilibrium.

use rayon::prelude::*;
use serde::Serialize;

use crate::model::{bits_of, GameInstance, PeriodClass, StrategyProfile, MAX_PERIODS};
use crate::{Error, Result};

pub const TIE_EPS: f64 = 1e-12;
pub const DEFAULT_CAP: u128 = 10_000_000;

/// All binary rows of length `periods` with exactly `demand` ones, in
/// lexicographic order (`0 < 1`, first period most significant).
#[derive(Debug, Clone)]
pub struct Strategies {
    periods: usize,
    next: Option<u128>,
}

impl Iterator for Strategies {
    type Item = Vec<bool>;

    fn next(&mut self) -> Option<Vec<bool>> {
        let current = self.next?;
        self.next = next_same_popcount(current, self.periods);
        let t = self.periods;
        Some((0..t).map(|p| current >> (t - 1 - p) & 1 == 1).collect())
    }
}

// Gosper's hack: the next larger integer with the same number of set bits.
fn next_same_popcount(v: u128, periods: usize) -> Option<u128> {
    if v == 0 {
        return None;
    }
    let c = v & v.wrapping_neg();
    let r = v.checked_add(c)?;
    let next = (((r ^ v) >> 2) / c) | r;
    if periods < 128 && next >> periods != 0 {
        None
    } else {
        Some(next)
    }
}

pub fn strategies(periods: usize, demand: usize) -> Strategies {
    let first = if demand > periods || periods > MAX_PERIODS {
        None
    } else if demand == 128 {
        Some(u128::MAX)
    } else {
        Some((1u128 << demand) - 1)
    };
    Strategies { periods, next: first }
}

/// Rows available to player `i` of `game`.
pub fn enumerate_strategies(game: &GameInstance, i: usize) -> Strategies {
    strategies(game.periods, game.players[i].demand)
}

/// Binomial coefficient, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for j in 0..k {
        // acc * (n - j) / (j + 1) stays integral at every step
        acc = match acc.checked_mul((n - j) as u128) {
            Some(v) => v / (j as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// Number of joint pure profiles, saturating.
pub fn joint_profile_count(game: &GameInstance) -> u128 {
    game.players.iter().map(|p| binomial(game.periods, p.demand)).fold(1u128, |acc, c| acc.saturating_mul(c))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationReport {
    pub player: usize,
    pub current_cost: f64,
    #[serde(serialize_with = "serialize_row")]
    pub best_alternative: Vec<bool>,
    pub best_cost: f64,
    pub improving: bool,
}

fn serialize_row<S: serde::Serializer>(row: &[bool], s: S) -> Result<S::Ok, S::Error> {
    bits_of(row).serialize(s)
}

/// Player `i`'s cheapest row against the others' fixed rows.
pub fn best_response(game: &GameInstance, profile: &StrategyProfile, i: usize) -> Result<DeviationReport> {
    game.check_profile(profile)?;
    if i >= game.n_players() {
        return Err(Error::Usage(format!("player index {i} out of range")));
    }
    Ok(best_response_unchecked(game, profile, i))
}

fn best_response_unchecked(game: &GameInstance, profile: &StrategyProfile, i: usize) -> DeviationReport {
    let current_cost = game.total_cost_unchecked(profile, i);
    let mut scratch = profile.clone();
    let mut best: Option<(Vec<bool>, f64)> = None;
    for row in enumerate_strategies(game, i) {
        scratch.set_row(i, &row);
        let cost = game.total_cost_unchecked(&scratch, i);
        // strict improvement keeps the lexicographically first minimiser
        if best.as_ref().is_none_or(|(_, b)| cost < b - TIE_EPS) {
            best = Some((row, cost));
        }
    }
    let (best_alternative, best_cost) = best.expect("demand <= periods admits at least one row");
    DeviationReport {
        player: i,
        current_cost,
        improving: best_cost < current_cost - TIE_EPS,
        best_alternative,
        best_cost,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NashCheck {
    pub is_nash: bool,
    /// First player (by index) with an improving deviation.
    pub witness: Option<DeviationReport>,
}

pub fn is_nash(game: &GameInstance, profile: &StrategyProfile) -> Result<NashCheck> {
    game.check_profile(profile)?;
    Ok(is_nash_unchecked(game, profile))
}

fn is_nash_unchecked(game: &GameInstance, profile: &StrategyProfile) -> NashCheck {
    let witness = (0..game.n_players()).map(|i| best_response_unchecked(game, profile, i)).find(|r| r.improving);
    NashCheck { is_nash: witness.is_none(), witness }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum ProfileClass {
    Distributed,
    NonDistributed,
}

/// Distributed when some player charges in both an off-peak and a peak period.
pub fn classify(game: &GameInstance, profile: &StrategyProfile) -> ProfileClass {
    let mixed = profile.rows().iter().any(|row| {
        let mut off = false;
        let mut peak = false;
        for (t, &s) in row.iter().enumerate() {
            if s {
                match game.class_of(t) {
                    PeriodClass::Offpeak => off = true,
                    PeriodClass::Peak => peak = true,
                }
            }
        }
        off && peak
    });
    if mixed {
        ProfileClass::Distributed
    } else {
        ProfileClass::NonDistributed
    }
}

/// Every player charges only in off-peak periods.
pub fn is_herding(game: &GameInstance, profile: &StrategyProfile) -> bool {
    profile
        .rows()
        .iter()
        .all(|row| row.iter().enumerate().all(|(t, &s)| !s || game.class_of(t) == PeriodClass::Offpeak))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    pub profile: StrategyProfile,
    pub classification: ProfileClass,
    pub herding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub joint_profiles: u128,
    pub equilibria: Vec<Equilibrium>,
}

/// Exhaustive pure-Nash search. Refuses when the joint profile count exceeds
/// `cap`. Results come in mixed-radix order of the players' strategy lists
/// (last player varying fastest).
pub fn enumerate_nash(game: &GameInstance, cap: u128) -> Result<EquilibriumSet> {
    game.ensure_valid()?;
    let count = joint_profile_count(game);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let lists: Vec<Vec<Vec<bool>>> = (0..game.n_players()).map(|i| enumerate_strategies(game, i).collect()).collect();
    let radices: Vec<u128> = lists.iter().map(|l| l.len() as u128).collect();

    let equilibria: Vec<Equilibrium> = (0..count as u64)
        .into_par_iter()
        .filter_map(|index| {
            let mut rest = index as u128;
            let mut rows = vec![Vec::new(); lists.len()];
            for (i, list) in lists.iter().enumerate().rev() {
                rows[i] = list[(rest % radices[i]) as usize].clone();
                rest /= radices[i];
            }
            let profile = StrategyProfile::new(rows).expect("rows share the game's period count");
            is_nash_unchecked(game, &profile).is_nash.then(|| Equilibrium {
                classification: classify(game, &profile),
                herding: is_herding(game, &profile),
                profile,
            })
        })
        .collect();
    Ok(EquilibriumSet { joint_profiles: count, equilibria })
}
