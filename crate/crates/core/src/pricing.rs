//! Two-slab prices that make a target profile an equilibrium.
//!
//! For player `i` at target `X` and alternative row `Y`, write `Δ^Q = x^Q - y^Q`
//! for the energy it loses in class `Q` by deviating and `Γ = f(Y) - f(X)` for
//! the dissatisfaction it gains. `X` is a best response under prices
//! `(bD, bN)` exactly when `bD·Δ^D + bN·Δ^N <= Γ` for every `Y`. Each deviation
//! is thus a half-plane in price space and the feasible prices are their
//! intersection, cut by `bD > 0`.

use serde::Serialize;

use crate::equilibrium::{binomial, enumerate_strategies, is_nash, TIE_EPS};
use crate::geometry::{line_intersection, ConvexPolygon, HalfPlane};
use crate::model::{bits_of, Dissatisfaction, GameInstance, PeriodClass, StrategyProfile};
use crate::{Error, Result};

/// Peak prices below this are not feasible.
pub const FEAS_EPS: f64 = 1e-9;
/// Boundary tolerance of the half-plane intersection.
pub const GEOM_TOL: f64 = 1e-9;
/// Regions no wider than this are reported as points or lines.
pub const DIM_TOL: f64 = 1e-6;
/// Half-width of the bounding box standing in for the unbounded plane.
pub const PRICE_BOX: f64 = 1e6;
const ZERO_DELTA: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AggregateOutcome {
    pub x_peak: f64,
    pub x_offpeak: f64,
    pub f_peak: f64,
    pub f_offpeak: f64,
}

impl AggregateOutcome {
    pub fn dissatisfaction(&self) -> f64 {
        self.f_peak + self.f_offpeak
    }

    pub fn cost(&self, bd: f64, bn: f64) -> f64 {
        bd * self.x_peak + bn * self.x_offpeak + self.f_peak + self.f_offpeak
    }
}

/// Energy and dissatisfaction of player `i`, summed per period class.
pub fn aggregate_outcome(game: &GameInstance, profile: &StrategyProfile, i: usize) -> Result<AggregateOutcome> {
    game.check_profile(profile)?;
    if i >= game.n_players() {
        return Err(Error::Usage(format!("player index {i} out of range")));
    }
    Ok(aggregate_unchecked(game, profile, i))
}

fn aggregate_unchecked(game: &GameInstance, profile: &StrategyProfile, i: usize) -> AggregateOutcome {
    let mut out = AggregateOutcome { x_peak: 0.0, x_offpeak: 0.0, f_peak: 0.0, f_offpeak: 0.0 };
    for p in game.player_cost_unchecked(profile, i).per_period {
        match p.class {
            PeriodClass::Peak => {
                out.x_peak += p.energy;
                out.f_peak += p.dissat;
            }
            PeriodClass::Offpeak => {
                out.x_offpeak += p.energy;
                out.f_offpeak += p.dissat;
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DeviationPattern {
    /// Energy moves from peak to off-peak: `Δ^D > 0 > Δ^N`.
    PeakToOffpeak,
    /// `Δ^D < 0 < Δ^N`.
    OffpeakToPeak,
    /// Less energy in both classes.
    BothPositive,
    /// More energy in both classes.
    BothNegative,
    /// Only peak energy changes.
    WithinPeak,
    /// Only off-peak energy changes.
    WithinOffpeak,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationVector {
    pub player: usize,
    /// Alternative row; empty for deviations built from abstract outcomes.
    #[serde(serialize_with = "serialize_row")]
    pub deviation: Vec<bool>,
    pub delta_peak: f64,
    pub delta_offpeak: f64,
    pub gamma_peak: f64,
    pub gamma_offpeak: f64,
    pub gamma: f64,
}

fn serialize_row<S: serde::Serializer>(row: &[bool], s: S) -> Result<S::Ok, S::Error> {
    bits_of(row).serialize(s)
}

impl DeviationVector {
    pub fn between(player: usize, deviation: Vec<bool>, x: &AggregateOutcome, y: &AggregateOutcome) -> Self {
        let gamma_peak = y.f_peak - x.f_peak;
        let gamma_offpeak = y.f_offpeak - x.f_offpeak;
        DeviationVector {
            player,
            deviation,
            delta_peak: x.x_peak - y.x_peak,
            delta_offpeak: x.x_offpeak - y.x_offpeak,
            gamma_peak,
            gamma_offpeak,
            gamma: y.dissatisfaction() - x.dissatisfaction(),
        }
    }

    /// Deviation between two abstract outcomes, given as per-class energy
    /// fractions `[peak, offpeak]`, each priced through its class curve.
    pub fn from_fractions(x: [f64; 2], y: [f64; 2], f_peak: &Dissatisfaction, f_offpeak: &Dissatisfaction) -> Self {
        let outcome = |p: [f64; 2]| AggregateOutcome {
            x_peak: p[0],
            x_offpeak: p[1],
            f_peak: f_peak.eval(p[0]),
            f_offpeak: f_offpeak.eval(p[1]),
        };
        Self::between(0, Vec::new(), &outcome(x), &outcome(y))
    }

    pub fn is_zero(&self) -> bool {
        self.delta_peak.abs() <= ZERO_DELTA && self.delta_offpeak.abs() <= ZERO_DELTA
    }

    /// The constraint `bD·Δ^D + bN·Δ^N <= Γ` over `(bD, bN)`.
    pub fn half_plane(&self) -> HalfPlane {
        HalfPlane::new(self.delta_peak, self.delta_offpeak, self.gamma)
    }

    pub fn pattern(&self) -> Option<DeviationPattern> {
        let sign = |v: f64| {
            if v > ZERO_DELTA {
                1
            } else if v < -ZERO_DELTA {
                -1
            } else {
                0
            }
        };
        Some(match (sign(self.delta_peak), sign(self.delta_offpeak)) {
            (1, -1) => DeviationPattern::PeakToOffpeak,
            (-1, 1) => DeviationPattern::OffpeakToPeak,
            (1, 1) => DeviationPattern::BothPositive,
            (-1, -1) => DeviationPattern::BothNegative,
            (0, 0) => return None,
            (_, 0) => DeviationPattern::WithinPeak,
            _ => DeviationPattern::WithinOffpeak,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DeviationSet {
    /// Deviations with a nonzero energy change, in row order.
    pub vectors: Vec<DeviationVector>,
    /// Zero-energy deviations that lower dissatisfaction; any one of them
    /// rules out every price.
    pub certificates: Vec<DeviationVector>,
}

/// One vector per alternative row of player `i`. Refuses more than `cap` rows.
pub fn deviation_vectors(game: &GameInstance, profile: &StrategyProfile, i: usize, cap: u128) -> Result<DeviationSet> {
    game.ensure_valid()?;
    let x = aggregate_outcome(game, profile, i)?;
    let count = binomial(game.periods, game.players[i].demand);
    if count > cap {
        return Err(Error::CapExceeded { count, cap });
    }
    let own = profile.row(i);
    let mut scratch = profile.clone();
    let mut set = DeviationSet { vectors: Vec::new(), certificates: Vec::new() };
    for row in enumerate_strategies(game, i) {
        if row.as_slice() == own {
            continue;
        }
        scratch.set_row(i, &row);
        let y = aggregate_unchecked(game, &scratch, i);
        let v = DeviationVector::between(i, row, &x, &y);
        if !v.is_zero() {
            set.vectors.push(v);
        } else if v.gamma < -GEOM_TOL {
            set.certificates.push(v);
        }
    }
    Ok(set)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RegionClass {
    Empty,
    Point { b_peak: f64, b_offpeak: f64 },
    Line,
    Polyhedron,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceRegion {
    pub classification: RegionClass,
    /// A feasible `(bD, bN)`, when the region is nonempty.
    pub representative: Option<[f64; 2]>,
    /// False when the region reaches the bounding box.
    pub bounded: bool,
    pub halfplanes: Vec<HalfPlane>,
    /// Vertices of the region clipped to the bounding box.
    pub vertices: Vec<[f64; 2]>,
    pub certificate: Option<DeviationVector>,
}

impl PriceRegion {
    pub fn is_empty(&self) -> bool {
        self.classification == RegionClass::Empty
    }

    /// Membership within `tol` of every half-plane and of `bD >= FEAS_EPS`.
    pub fn contains(&self, p: [f64; 2], tol: f64) -> bool {
        self.certificate.is_none() && p[0] >= FEAS_EPS - tol && self.halfplanes.iter().all(|h| h.contains(p, tol))
    }
}

fn feasible_box() -> ConvexPolygon {
    ConvexPolygon::rect([FEAS_EPS, PRICE_BOX], [-PRICE_BOX, PRICE_BOX])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PricingOptions {
    /// Largest strategy count scanned per player.
    pub cap: u128,
    /// Boundary tolerance of the intersection.
    pub geom_tol: f64,
}

impl Default for PricingOptions {
    fn default() -> Self {
        PricingOptions { cap: crate::equilibrium::DEFAULT_CAP, geom_tol: GEOM_TOL }
    }
}

/// Intersects the half-planes of `set` with `bD >= FEAS_EPS`.
pub fn region_from_vectors(set: &DeviationSet) -> PriceRegion {
    region_with_tol(set, GEOM_TOL)
}

pub fn region_with_tol(set: &DeviationSet, geom_tol: f64) -> PriceRegion {
    let halfplanes: Vec<HalfPlane> = set.vectors.iter().map(DeviationVector::half_plane).collect();
    let empty = |certificate| PriceRegion {
        classification: RegionClass::Empty,
        representative: None,
        bounded: true,
        halfplanes: halfplanes.clone(),
        vertices: Vec::new(),
        certificate,
    };
    if let Some(c) = set.certificates.first() {
        return empty(Some(c.clone()));
    }
    let poly = feasible_box().clip_all(&halfplanes, geom_tol);
    if poly.is_empty() {
        return empty(None);
    }
    let edge = PRICE_BOX * (1.0 - 1e-9);
    let bounded = poly.vertices().iter().all(|v| v[0] < edge && v[1].abs() < edge);

    let (classification, representative) = if poly.diameter() <= DIM_TOL {
        let p = point_representative(&halfplanes, &poly, geom_tol);
        (RegionClass::Point { b_peak: p[0], b_offpeak: p[1] }, p)
    } else if poly.width() <= DIM_TOL {
        (RegionClass::Line, inner_centroid(&poly, &halfplanes, geom_tol))
    } else {
        (RegionClass::Polyhedron, inner_centroid(&poly, &halfplanes, geom_tol))
    };
    PriceRegion {
        classification,
        representative: Some(representative),
        bounded,
        halfplanes,
        vertices: poly.vertices().to_vec(),
        certificate: None,
    }
}

// Intersection of the two most transversal constraints through the region.
fn point_representative(halfplanes: &[HalfPlane], poly: &ConvexPolygon, tol: f64) -> [f64; 2] {
    let c = poly.centroid().expect("nonempty polygon");
    let tight: Vec<&HalfPlane> = halfplanes.iter().filter(|h| h.distance(c).abs() <= DIM_TOL).collect();
    let mut best: Option<(f64, [f64; 2])> = None;
    for (k, h) in tight.iter().enumerate() {
        for g in &tight[k + 1..] {
            let det = (h.a * g.b - h.b * g.a).abs() / (h.norm() * g.norm());
            if best.is_none_or(|(d, _)| det > d) {
                if let Some(p) = line_intersection(h, g) {
                    best = Some((det, p));
                }
            }
        }
    }
    match best {
        Some((_, p)) if p[0] >= FEAS_EPS && halfplanes.iter().all(|h| h.contains(p, tol)) => p,
        _ => c,
    }
}

// Centroid of the region restricted to the smallest origin-centred box that
// meets it, so unbounded regions yield moderate prices.
fn inner_centroid(poly: &ConvexPolygon, halfplanes: &[HalfPlane], tol: f64) -> [f64; 2] {
    let mut half = 2.0;
    while half < PRICE_BOX {
        let boxed = ConvexPolygon::rect([FEAS_EPS, half], [-half, half]).clip_all(halfplanes, tol);
        if let Some(c) = boxed.centroid() {
            if boxed.area() > 0.0 || half * 10.0 >= PRICE_BOX {
                return c;
            }
        }
        half *= 10.0;
    }
    poly.centroid().expect("nonempty polygon")
}

/// Feasible prices for player `i` at target `profile`. The game's own prices
/// are ignored.
pub fn price_region(
    game: &GameInstance,
    profile: &StrategyProfile,
    i: usize,
    opts: &PricingOptions,
) -> Result<PriceRegion> {
    Ok(region_with_tol(&deviation_vectors(game, profile, i, opts.cap)?, opts.geom_tol))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TaggedDeviation {
    pub pattern: DeviationPattern,
    pub vector: DeviationVector,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PatternReport {
    pub deviations: Vec<TaggedDeviation>,
    /// Realizable patterns, in declaration order.
    pub present: Vec<DeviationPattern>,
}

impl PatternReport {
    pub fn has(&self, p: DeviationPattern) -> bool {
        self.present.contains(&p)
    }

    /// The two opposing swaps and both same-sign patterns are all present.
    pub fn has_all_four(&self) -> bool {
        [
            DeviationPattern::PeakToOffpeak,
            DeviationPattern::OffpeakToPeak,
            DeviationPattern::BothPositive,
            DeviationPattern::BothNegative,
        ]
        .iter()
        .all(|&p| self.has(p))
    }
}

/// Tags every deviation of player `i` with its sign pattern.
pub fn representative_deviations(
    game: &GameInstance,
    profile: &StrategyProfile,
    i: usize,
    cap: u128,
) -> Result<PatternReport> {
    let set = deviation_vectors(game, profile, i, cap)?;
    let deviations: Vec<TaggedDeviation> = set
        .vectors
        .into_iter()
        .filter_map(|v| v.pattern().map(|pattern| TaggedDeviation { pattern, vector: v }))
        .collect();
    let present = [
        DeviationPattern::PeakToOffpeak,
        DeviationPattern::OffpeakToPeak,
        DeviationPattern::BothPositive,
        DeviationPattern::BothNegative,
        DeviationPattern::WithinPeak,
        DeviationPattern::WithinOffpeak,
    ]
    .into_iter()
    .filter(|p| deviations.iter().any(|d| d.pattern == *p))
    .collect();
    Ok(PatternReport { deviations, present })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateCheck {
    pub price: [f64; 2],
    pub in_region: bool,
}

/// Closed-form guess for a player charging only at peak: `bD` from the first
/// within-peak deviation `Z`, `bN` from the first peak-to-off-peak deviation
/// `Y`. Returned unchecked; callers validate it.
pub fn closed_form_candidate(report: &PatternReport) -> Option<[f64; 2]> {
    let first = |p| report.deviations.iter().find(|d| d.pattern == p).map(|d| &d.vector);
    let z = first(DeviationPattern::WithinPeak)?;
    let y = first(DeviationPattern::PeakToOffpeak)?;
    let bd = z.gamma_peak / z.delta_peak;
    let bn = -((y.gamma_offpeak + y.gamma_peak) * y.delta_peak + z.delta_peak * z.gamma_peak)
        / (y.delta_peak * z.delta_peak);
    (bd.is_finite() && bn.is_finite()).then_some([bd, bn])
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PlayerPrices {
    pub player: usize,
    pub region: PriceRegion,
    pub patterns: Vec<DeviationPattern>,
    pub candidate: Option<CandidateCheck>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InducedPrices {
    pub players: Vec<PlayerPrices>,
    /// Every player's region is nonempty.
    pub feasible: bool,
    /// Per-player representative prices, when feasible.
    pub prices: Option<Vec<[f64; 2]>>,
    /// Equilibrium check of the target under `prices`.
    pub verified: Option<bool>,
}

/// Per-player regions for making `profile` an equilibrium, with a joint check.
pub fn induce_prices(game: &GameInstance, profile: &StrategyProfile, opts: &PricingOptions) -> Result<InducedPrices> {
    game.ensure_valid()?;
    game.check_profile(profile)?;
    let mut players = Vec::with_capacity(game.n_players());
    for i in 0..game.n_players() {
        let report = representative_deviations(game, profile, i, opts.cap)?;
        let region = price_region(game, profile, i, opts)?;
        let candidate = closed_form_candidate(&report)
            .map(|price| CandidateCheck { in_region: region.contains(price, opts.geom_tol), price });
        players.push(PlayerPrices { player: i, region, patterns: report.present, candidate });
    }
    let feasible = players.iter().all(|p| !p.region.is_empty());
    let (prices, verified) = if feasible {
        let prices: Vec<[f64; 2]> =
            players.iter().map(|p| p.region.representative.expect("nonempty region has a representative")).collect();
        let pairs: Vec<(f64, f64)> = prices.iter().map(|p| (p[0], p[1])).collect();
        let priced = game.with_player_prices(&pairs)?;
        let ok = is_nash(&priced, profile)?.is_nash;
        (Some(prices), Some(ok))
    } else {
        (None, None)
    };
    Ok(InducedPrices { players, feasible, prices, verified })
}

/// Evaluates `b·Δ <= Γ` directly, with the equilibrium tie tolerance.
pub fn satisfies_all(set: &DeviationSet, price: [f64; 2]) -> bool {
    set.certificates.is_empty()
        && set.vectors.iter().all(|v| price[0] * v.delta_peak + price[1] * v.delta_offpeak <= v.gamma + TIE_EPS)
}
