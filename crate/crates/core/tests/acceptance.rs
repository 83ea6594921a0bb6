//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::time::{Duration, Instant};

use evcg_core::cevgame::{self, ContinuousGame, CCE_TOL};
use evcg_core::equilibrium::{self, ProfileClass, DEFAULT_CAP, TIE_EPS};
use evcg_core::herding::{self, HerdingTemplate};
use evcg_core::model::{Dissatisfaction, GameInstance, Player, StrategyProfile};
use evcg_core::pricing::{self, DeviationPattern, DeviationSet, DeviationVector, PricingOptions, RegionClass};
use evcg_core::roots;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome, Option<Duration>);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn example_game(f: Dissatisfaction) -> GameInstance {
    GameInstance {
        periods: 4,
        offpeak_periods: 2,
        capacities: vec![2.0; 4],
        players: vec![
            Player::new(2, 0.3, 0.2, f.clone()),
            Player::new(2, 0.4, 0.3, f.clone()),
            Player::new(2, 0.4, 0.3, f),
        ],
    }
}

fn example_profile() -> StrategyProfile {
    StrategyProfile::from_bits(&[&[0, 0, 1, 1], &[1, 1, 0, 0], &[1, 1, 0, 0]]).unwrap()
}

fn ac1() -> Outcome {
    let game = example_game(Dissatisfaction::linear(1.0, 1.0));
    let p = example_profile();
    for i in 0..3 {
        let c = game.player_cost(&p, i).map_err(|e| e.to_string())?.total;
        ensure!((c - 0.6).abs() <= 1e-9, "player {i} cost {c}");
    }
    let dev = p.with_row(0, vec![true, false, true, false]);
    let c = game.player_cost(&dev, 0).unwrap().total;
    ensure!((c - 0.766_666_666_666_666_7).abs() <= 1e-9, "deviation cost {c}");
    for i in 1..3 {
        let up = game.player_cost(&p.with_row(i, vec![false, false, true, true]), i).unwrap().total;
        ensure!(up > 0.6, "player {i} moving to peak costs {up}");
    }
    ensure!(equilibrium::is_nash(&game, &p).unwrap().is_nash, "stated profile not Nash");
    let set = equilibrium::enumerate_nash(&game, DEFAULT_CAP).unwrap();
    ensure!(set.equilibria.iter().any(|e| e.profile == p), "profile not enumerated");
    Ok(format!("costs 0.6/0.6/0.6, deviation {c:.12}, {} equilibria", set.equilibria.len()))
}

fn ac2() -> Outcome {
    let game = example_game(Dissatisfaction::logistic(1.5, 5.0));
    let p = example_profile();
    ensure!(equilibrium::is_nash(&game, &p).unwrap().is_nash, "stated profile not Nash");
    let set = equilibrium::enumerate_nash(&game, DEFAULT_CAP).unwrap();
    ensure!(set.equilibria.iter().any(|e| e.profile == p), "stated profile not enumerated");
    let distributed: Vec<_> = set
        .equilibria
        .iter()
        .filter(|e| e.classification == ProfileClass::Distributed)
        .map(|e| serde_json::to_string(&e.profile).unwrap())
        .collect();
    ensure!(
        distributed.is_empty(),
        "{} of {} equilibria are distributed, first {}",
        distributed.len(),
        set.equilibria.len(),
        distributed[0]
    );
    Ok(format!("{} equilibria, all non-distributed", set.equilibria.len()))
}

// Root of the affine gap alpha - bD - (beta - bN)x by bracket doubling and bisection.
fn affine_root(alpha: f64, beta: f64, bd: f64, bn: f64) -> Result<f64, String> {
    let g = |x: f64| (alpha - beta * x) - (bd - bn * x);
    let mut hi = 1.0;
    while g(hi) > 0.0 {
        hi *= 2.0;
        ensure!(hi < 1e12, "no bracket");
    }
    roots::bisect(g, 0.0, hi, 1e-13, 400).map_err(|e| e.to_string())
}

fn ac3() -> Outcome {
    let mut r = rng(3);
    for k in 0..100 {
        let bn = r.gen_range(0.0..0.5);
        let bd = r.gen_range(bn + 0.01..1.0);
        let alpha = r.gen_range(bd + 0.01..3.0);
        let beta = r.gen_range(bn + 0.01..5.0);
        let closed = (alpha - bd) / (beta - bn);
        let root = affine_root(alpha, beta, bd, bn)?;
        ensure!((closed - root).abs() <= 1e-9 * closed.max(1.0), "draw {k}: {closed} vs {root}");
        let t = herding::linear_threshold(alpha, beta, bd, bn).map_err(|e| e.to_string())?;
        if let Some(x) = t.x_hat() {
            ensure!((x - root).abs() <= 1e-9, "draw {k}: threshold {x} vs {root}");
        }
    }
    // fixed sweep straddling 0.875
    let t = HerdingTemplate::new(4, 2.0, Player::new(2, 0.3, 0.2, Dissatisfaction::linear(1.0, 1.0)))
        .map_err(|e| e.to_string())?;
    let rows = herding::herding_sweep(&t, 1..=12, DEFAULT_CAP).map_err(|e| e.to_string())?;
    for row in &rows {
        ensure!(row.herding_is_nash == row.threshold_prediction, "sweep row {row:?}");
        ensure!(row.herding_is_nash == (row.x > 0.875), "sweep row {row:?}");
    }
    // random homogeneous instances
    let mut straddles = 0;
    for k in 0..30 {
        let bn = r.gen_range(0.0..0.3);
        let bd = r.gen_range(bn + 0.05..0.8);
        let alpha: f64 = r.gen_range(bd + 0.05..2.0);
        let beta = r.gen_range(alpha.max(bn + 0.05)..3.0);
        let d = r.gen_range(1..=2);
        let cap = r.gen_range(1..=3) as f64;
        let t = HerdingTemplate::new(d + 1 + d % 2, cap, Player::new(d, bd, bn, Dissatisfaction::linear(alpha, beta)))
            .map_err(|e| e.to_string())?;
        let rows = herding::herding_sweep(&t, 1..=10, DEFAULT_CAP).map_err(|e| e.to_string())?;
        for row in &rows {
            ensure!(row.herding_is_nash == row.threshold_prediction, "instance {k}: {row:?}");
        }
        if rows.iter().any(|r| r.herding_is_nash) && rows.iter().any(|r| !r.herding_is_nash) {
            straddles += 1;
        }
    }
    ensure!(straddles > 0, "no random instance straddled its threshold");
    Ok(format!("100 draws agree; sweep flips at n = 3; {straddles}/30 random sweeps straddle"))
}

fn ac4() -> Outcome {
    let mut r = rng(4);
    let mut worst = 0.0f64;
    for k in 0..100 {
        let bn = r.gen_range(0.0..0.5);
        let bd = r.gen_range(bn + 0.05..1.0);
        let alpha = r.gen_range(bd + 0.1..3.0);
        let beta = r.gen_range(5.0..10.0);
        let t = herding::logistic_threshold(alpha, beta, bd, bn).map_err(|e| e.to_string())?;
        let x = t.x_hat().ok_or_else(|| format!("draw {k}: {:?}", t.kind))?;
        let f = Dissatisfaction::logistic(alpha, beta);
        let g = |x: f64| f.eval(x) - (bd - bn * x);
        worst = worst.max(g(x).abs());
        ensure!(g(x).abs() <= 1e-9, "draw {k}: residual {}", g(x));
        ensure!(g(x - 1e-6) > 0.0 && g(x + 1e-6) < 0.0, "draw {k}: no sign flip at {x}");
    }
    Ok(format!("worst residual {worst:.3e}"))
}

fn ac5() -> Outcome {
    let f = Dissatisfaction::custom(|x| 4.0 - x * x);
    for k in 1..=1000 {
        let x = k as f64 / 1001.0;
        ensure!(herding::deviation_test(&f, x, 4.0, 2.0), "not deviated at x = {x}");
    }
    Ok("deviated at all 1000 grid points".into())
}

/// Player 0 charges in one off-peak and one peak period; six other players
/// load the periods with 1, 2, 3, 1, 2, 3 units. Every period is congested
/// once player 0 joins it, so all four sign patterns are realizable.
fn four_pattern_game() -> (GameInstance, StrategyProfile) {
    let f_peak = Dissatisfaction::linear(1.0, 0.5);
    let f_offpeak = Dissatisfaction::linear(1.0, 0.3);
    let player = Player { f_peak, f_offpeak, ..Player::new(2, 0.5, 0.3, Dissatisfaction::None) };
    let game = GameInstance { periods: 6, offpeak_periods: 3, capacities: vec![1.0; 6], players: vec![player; 7] };
    let rows: [&[u8]; 7] = [
        &[0, 1, 0, 0, 1, 0],
        &[0, 0, 1, 0, 0, 1],
        &[0, 0, 1, 0, 0, 1],
        &[0, 1, 1, 0, 0, 0],
        &[0, 1, 0, 0, 1, 0],
        &[1, 0, 0, 0, 0, 1],
        &[0, 0, 0, 1, 1, 0],
    ];
    (game, StrategyProfile::from_bits(&rows).unwrap())
}

fn ac6() -> Outcome {
    let (game, target) = four_pattern_game();
    ensure!(equilibrium::classify(&game, &target) == ProfileClass::Distributed, "target not distributed");
    let report = pricing::representative_deviations(&game, &target, 0, DEFAULT_CAP).map_err(|e| e.to_string())?;
    ensure!(report.has_all_four(), "patterns present: {:?}", report.present);
    let region = pricing::price_region(&game, &target, 0, &PricingOptions::default()).map_err(|e| e.to_string())?;
    let point = match region.classification {
        RegionClass::Point { b_peak, b_offpeak } => [b_peak, b_offpeak],
        ref other => return Err(format!("classification {other:?}")),
    };
    ensure!((point[0] - 0.5).abs() <= 1e-6 && (point[1] - 0.3).abs() <= 1e-6, "point {point:?}");
    ensure!(equilibrium::is_nash(&game, &target).unwrap().is_nash, "not Nash at beta");

    let res = 200;
    let mut nash_points = 0;
    for a in 0..res {
        for b in 0..res {
            let bd = -1.0 + 3.0 * a as f64 / (res - 1) as f64;
            let bn = -1.0 + 3.0 * b as f64 / (res - 1) as f64;
            let mut priced = game.clone();
            priced.players[0].price_peak = bd;
            priced.players[0].price_offpeak = bn;
            let nash = equilibrium::is_nash(&priced, &target).unwrap().is_nash;
            let near = (bd - 0.5).abs() <= 1e-6 && (bn - 0.3).abs() <= 1e-6;
            ensure!(nash == near, "grid ({bd}, {bn}): nash = {nash}");
            nash_points += usize::from(nash);
        }
    }
    Ok(format!("Point({:.9}, {:.9}); {nash_points} equilibrium grid points off the band", point[0], point[1]))
}

fn ac7() -> Outcome {
    let f_peak = Dissatisfaction::logistic(1.5, 2.0);
    let f_offpeak = Dissatisfaction::logistic(1.5, 5.0);
    let x = [0.5, 0.5];
    let y = DeviationVector::from_fractions(x, [0.2, 0.8], &f_peak, &f_offpeak);
    let z = DeviationVector::from_fractions(x, [0.9, 0.1], &f_peak, &f_offpeak);
    ensure!(y.pattern() == Some(DeviationPattern::PeakToOffpeak), "Y pattern {:?}", y.pattern());
    ensure!(z.pattern() == Some(DeviationPattern::OffpeakToPeak), "Z pattern {:?}", z.pattern());
    ensure!((y.delta_peak - 0.3).abs() < 1e-12 && (z.delta_peak + 0.4).abs() < 1e-12, "magnitudes");
    let region = pricing::region_from_vectors(&DeviationSet { vectors: vec![y, z], certificates: vec![] });
    ensure!(region.classification == RegionClass::Empty, "classification {:?}", region.classification);
    Ok("Empty".into())
}

/// Random non-distributed target: each player charges entirely in one class,
/// rows filled greedily into the least-loaded periods of that class, every
/// period used, unit capacities.
fn non_distributed_instance(r: &mut ChaCha8Rng, logistic: bool) -> (GameInstance, StrategyProfile) {
    loop {
        let periods = r.gen_range(3..=5);
        let offpeak = r.gen_range(1..periods);
        let n = r.gen_range(2..=4);
        let mut loads = vec![0usize; periods];
        let mut players = Vec::new();
        let mut rows = Vec::new();
        for _ in 0..n {
            let peak = r.gen_bool(0.5);
            let class: Vec<usize> = if peak { (offpeak..periods).collect() } else { (0..offpeak).collect() };
            let d = r.gen_range(1..=class.len());
            let mut order = class.clone();
            order.sort_by_key(|&t| (loads[t], t));
            let mut row = vec![false; periods];
            for &t in &order[..d] {
                row[t] = true;
                loads[t] += 1;
            }
            rows.push(row);
            let bn = r.gen_range(0.0..0.3);
            let bd = r.gen_range(bn + 0.05..0.8);
            let (f_peak, f_offpeak) = if logistic {
                (
                    Dissatisfaction::logistic(r.gen_range(0.5..2.0), r.gen_range(2.0..8.0)),
                    Dissatisfaction::logistic(r.gen_range(0.5..2.0), r.gen_range(2.0..8.0)),
                )
            } else {
                let beta_d: f64 = r.gen_range(0.1..1.0);
                let beta_n = r.gen_range(0.1..1.0);
                let alpha = r.gen_range(beta_d.max(beta_n)..2.0);
                (Dissatisfaction::linear(alpha, beta_d), Dissatisfaction::linear(alpha, beta_n))
            };
            players.push(Player { f_peak, f_offpeak, ..Player::new(d, bd, bn, Dissatisfaction::None) });
        }
        if loads.contains(&0) {
            continue;
        }
        let game = GameInstance { periods, offpeak_periods: offpeak, capacities: vec![1.0; periods], players };
        return (game, StrategyProfile::new(rows).unwrap());
    }
}

fn ac8() -> Outcome {
    let mut r = rng(8);
    for k in 0..20 {
        let logistic = k >= 10;
        let (game, target) = non_distributed_instance(&mut r, logistic);
        ensure!(equilibrium::classify(&game, &target) == ProfileClass::NonDistributed, "case {k} distributed");
        let induced = pricing::induce_prices(&game, &target, &PricingOptions::default()).map_err(|e| e.to_string())?;
        ensure!(induced.feasible, "case {k}: some region empty");
        ensure!(induced.verified == Some(true), "case {k}: representatives fail the equilibrium check");
        for pp in &induced.players {
            let rep = pp.region.representative.unwrap();
            let mut priced = game.clone();
            priced.players[pp.player].price_peak = rep[0];
            priced.players[pp.player].price_offpeak = rep[1];
            let br = equilibrium::best_response(&priced, &target, pp.player).unwrap();
            ensure!(!br.improving, "case {k} player {}: representative {rep:?} not stable", pp.player);
            if !logistic {
                let p = &game.players[pp.player];
                let beta = [p.f_peak.params().unwrap().1, p.f_offpeak.params().unwrap().1];
                ensure!(pp.region.contains(beta, 1e-9), "case {k} player {}: beta {beta:?} outside", pp.player);
            }
        }
    }
    Ok("20 targets priced and verified".into())
}

fn reference_cev() -> ContinuousGame {
    ContinuousGame { n: 2, m: 1.0, m_d: 1.0, m_n: 2.0, b_d: 1.0, b_n: 1.0, a_d: 5.0, a_n: 3.0, r_d: 0.0, r_n: 0.0 }
}

fn ac9() -> Outcome {
    let g = reference_cev();
    let c = g.coefficients();
    ensure!((c.a, c.b, c.r) == (-2.0, 3.0, 1.0), "coefficients {c:?}");
    let check = |g: &ContinuousGame, expected: f64| -> Result<(), String> {
        let q = cevgame::nash_quantity(g).map_err(|e| e.to_string())?;
        ensure!((q - expected).abs() <= 1e-12, "q* = {q}, expected {expected}");
        let profile = vec![q; g.n];
        let (z, _) = cevgame::grid_best_response(g, &profile, 0, 10_000).map_err(|e| e.to_string())?;
        ensure!((z - q).abs() <= g.m * 1e-4, "grid best response {z} vs {q}");
        Ok(())
    };
    check(&g, 1.0 / 3.0)?;
    // R < A clamps at zero, a small B pushes the vertex beyond M
    check(&ContinuousGame { b_d: 6.0, a_d: 10.0, ..g.clone() }, 0.0)?;
    check(&ContinuousGame { a_d: 2.5, ..g.clone() }, g.m)?;
    Ok("q* = 1/3 and both clamps confirmed on a 1e-4 grid".into())
}

fn golden_max(f: impl Fn(f64) -> f64, mut a: f64, mut b: f64) -> (f64, f64) {
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - phi * (b - a);
    let mut d = a + phi * (b - a);
    while b - a > 1e-12 {
        if f(c) > f(d) {
            b = d;
        } else {
            a = c;
        }
        c = b - phi * (b - a);
        d = a + phi * (b - a);
    }
    let x = 0.5 * (a + b);
    (x, f(x))
}

fn ac10() -> Outcome {
    let mut r = rng(10);
    let mut done = 0;
    let mut worst = 0.0f64;
    while done < 50 {
        let b_d = r.gen_range(0.1..2.0);
        let b_n = r.gen_range(0.0..1.0);
        let m_n = r.gen_range(0.5..5.0);
        let a_n = b_n + r.gen_range(0.1..5.0);
        let m_d = r.gen_range(0.5..5.0);
        let k = (a_n - b_n) / m_n;
        let g = ContinuousGame {
            n: r.gen_range(1..=6),
            m: r.gen_range(0.5..3.0),
            m_d,
            m_n,
            b_d,
            b_n,
            a_d: b_d + m_d * (k + r.gen_range(0.05..3.0)),
            a_n,
            r_d: 0.0,
            r_n: 0.0,
        };
        let vertex = g.nash_vertex().map_err(|e| e.to_string())?;
        if !(vertex > 0.0 && vertex < g.m) {
            continue;
        }
        done += 1;
        let gap = |x: f64| cevgame::cce_gap(&g, x).unwrap();
        let (arg, max) = golden_max(gap, 0.0, g.m);
        worst = worst.max(max.abs());
        ensure!(max.abs() <= 1e-9 && gap(vertex).abs() <= 1e-9, "instance {done}: max gap {max}");
        ensure!((arg - vertex).abs() <= 1e-5 * g.m.max(1.0), "instance {done}: argmax {arg} vs {vertex}");
        let scan = cevgame::cce_scan(&g, 200, CCE_TOL).map_err(|e| e.to_string())?;
        ensure!(!scan.feasible.is_empty(), "instance {done}: scan found nothing");
        ensure!(scan.max_g1_offset <= scan.step, "instance {done}: g1 offset {}", scan.max_g1_offset);
        ensure!(scan.verdict == Some(true), "instance {done}: verdict {:?}", scan.verdict);
    }
    Ok(format!("50 instances, worst |max gap| {worst:.3e}"))
}

// Brute-force equilibrium oracle built only on player costs.
fn brute_force_nash(game: &GameInstance) -> Vec<StrategyProfile> {
    let t = game.periods;
    let rows_for = |d: usize| -> Vec<Vec<bool>> {
        let mut rows: Vec<Vec<bool>> = (0u32..1 << t)
            .filter(|m| m.count_ones() as usize == d)
            .map(|m| (0..t).map(|p| m >> (t - 1 - p) & 1 == 1).collect())
            .collect();
        rows.sort();
        rows
    };
    let lists: Vec<Vec<Vec<bool>>> = game.players.iter().map(|p| rows_for(p.demand)).collect();
    let mut out = Vec::new();
    let mut idx = vec![0usize; lists.len()];
    loop {
        let rows: Vec<Vec<bool>> = idx.iter().zip(&lists).map(|(&k, l)| l[k].clone()).collect();
        let p = StrategyProfile::new(rows).unwrap();
        let stable = (0..game.n_players()).all(|i| {
            let here = game.player_cost(&p, i).unwrap().total;
            lists[i].iter().all(|alt| game.player_cost(&p.with_row(i, alt.clone()), i).unwrap().total >= here - TIE_EPS)
        });
        if stable {
            out.push(p);
        }
        let mut k = lists.len();
        loop {
            if k == 0 {
                return out;
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < lists[k].len() {
                break;
            }
            idx[k] = 0;
        }
    }
}

fn ac11() -> Outcome {
    let mut r = rng(11);
    let mut total = 0;
    for k in 0..50 {
        let periods = r.gen_range(2..=5);
        let n = r.gen_range(1..=3);
        let players = (0..n)
            .map(|_| {
                let f = |r: &mut ChaCha8Rng| match r.gen_range(0..3) {
                    0 => Dissatisfaction::None,
                    1 => Dissatisfaction::linear(r.gen_range(0.1..2.0), r.gen_range(0.1..2.0)),
                    _ => Dissatisfaction::logistic(r.gen_range(0.1..2.0), r.gen_range(0.5..8.0)),
                };
                let bn = r.gen_range(0.0..0.5);
                Player {
                    f_peak: f(&mut r),
                    f_offpeak: f(&mut r),
                    ..Player::new(r.gen_range(1..=periods), r.gen_range(bn..1.0), bn, Dissatisfaction::None)
                }
            })
            .collect();
        let game = GameInstance {
            periods,
            offpeak_periods: r.gen_range(1..=periods),
            capacities: (0..periods).map(|_| r.gen_range(1..=2) as f64).collect(),
            players,
        };
        let got: Vec<StrategyProfile> = equilibrium::enumerate_nash(&game, DEFAULT_CAP)
            .map_err(|e| e.to_string())?
            .equilibria
            .into_iter()
            .map(|e| e.profile)
            .collect();
        let expected = brute_force_nash(&game);
        ensure!(got == expected, "game {k}: {} vs {} equilibria", got.len(), expected.len());
        total += got.len();
    }
    Ok(format!("50 games, {total} equilibria, exact agreement"))
}

fn main() {
    let criteria: [Criterion; 11] = [
        ("AC1 three-player linear instance", ac1, Some(Duration::from_secs(1))),
        ("AC2 three-player logistic instance", ac2, Some(Duration::from_secs(1))),
        ("AC3 linear herding threshold", ac3, Some(Duration::from_secs(10))),
        ("AC4 logistic herding threshold", ac4, Some(Duration::from_secs(5))),
        ("AC5 always-deviated quadratic curve", ac5, None),
        ("AC6 linear distributed target prices", ac6, Some(Duration::from_secs(60))),
        ("AC7 opposing logistic swaps", ac7, None),
        ("AC8 non-distributed target prices", ac8, Some(Duration::from_secs(60))),
        ("AC9 continuous equilibrium quantity", ac9, None),
        ("AC10 correlated equilibria coincide", ac10, Some(Duration::from_secs(120))),
        ("AC11 enumeration oracle agreement", ac11, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(run).unwrap_or_else(|_| Err("panicked".into()));
        let elapsed = start.elapsed();
        let outcome = match (outcome, limit) {
            (Ok(_), Some(l)) if elapsed > l => Err(format!("took {elapsed:.2?}, limit {l:?}")),
            (o, _) => o,
        };
        match outcome {
            Ok(msg) => println!("PASS {name} ({elapsed:.2?}): {msg}"),
            Err(msg) => {
                failed += 1;
                println!("FAIL {name} ({elapsed:.2?}): {msg}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
