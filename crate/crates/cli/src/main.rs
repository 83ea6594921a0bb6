//! `evcg`: command-line front end for the EV charging game toolkit.

mod output;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;

use evcg_core::cevgame::{self, ContinuousGame, CCE_TOL};
use evcg_core::equilibrium::{self, DEFAULT_CAP};
use evcg_core::herding::{self, HerdingTemplate};
use evcg_core::model::{Dissatisfaction, GameInstance, Severity, StrategyProfile};
use evcg_core::pricing::{self, PricingOptions, GEOM_TOL};
use evcg_core::roots::ROOT_TOL;
use evcg_core::Error;

use output::{emit, fmt_float, to_csv, to_json};

const DEFAULT_GRID_RES: usize = 200;

#[derive(Parser)]
#[command(name = "evcg", version, about = "Equilibrium analysis for the EV charging game")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// Scenario JSON (discrete game, or continuous game for `cev`).
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Strategy profile JSON: one 0/1 row per player.
    #[arg(long, global = true)]
    profile: Option<PathBuf>,
    /// Write the result here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Numerical tolerance; each command documents its default.
    #[arg(long, global = true)]
    tol: Option<f64>,
    /// Enumeration cap.
    #[arg(long, global = true, default_value_t = DEFAULT_CAP)]
    cap: u128,
    /// Grid resolution for sampled outputs.
    #[arg(long, global = true, default_value_t = DEFAULT_GRID_RES)]
    grid_res: usize,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Per-player cost breakdown of a profile.
    Cost,
    /// Nash equilibrium checks and enumeration.
    Nash {
        #[command(subcommand)]
        action: NashAction,
    },
    /// Herding thresholds and sweeps.
    Herding {
        #[command(subcommand)]
        action: HerdingAction,
    },
    /// Price regions that make the target profile an equilibrium (scenario prices are ignored).
    PriceRegion(PriceRegionArgs),
    /// Continuous symmetric game.
    Cev {
        #[command(subcommand)]
        action: CevAction,
    },
}

#[derive(Subcommand)]
enum NashAction {
    Check,
    Enumerate,
    BestResponse {
        #[arg(long)]
        player: usize,
    },
}

#[derive(Args, Clone)]
struct CurveArgs {
    /// Curve kind; when absent the first player's off-peak curve and prices are used.
    #[arg(long, value_enum)]
    kind: Option<CurveKind>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    bd: Option<f64>,
    #[arg(long)]
    bn: Option<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CurveKind {
    Linear,
    Logistic,
}

#[derive(Subcommand)]
enum HerdingAction {
    Threshold(CurveArgs),
    Sweep {
        #[arg(long, default_value_t = 1)]
        n_min: usize,
        #[arg(long)]
        n_max: usize,
    },
    /// Samples of `f(x)` and `bD - bN·x` on [0, 1].
    Curve(CurveArgs),
}

#[derive(Args)]
struct PriceRegionArgs {
    /// Also write a CSV sample "bD,bN,feasible" of the price plane.
    #[arg(long)]
    grid: Option<PathBuf>,
    /// Restrict the grid sample to one player's region.
    #[arg(long)]
    player: Option<usize>,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    bd_min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    bd_max: f64,
    #[arg(long, default_value_t = -1.0, allow_negative_numbers = true)]
    bn_min: f64,
    #[arg(long, default_value_t = 2.0, allow_negative_numbers = true)]
    bn_max: f64,
}

#[derive(Subcommand)]
enum CevAction {
    Nash,
    /// Gap at one `g1`, or the curve over [0, M] when `--g1` is absent.
    Gap {
        #[arg(long)]
        g1: Option<f64>,
    },
    Scan,
}

/// Failure carrying its exit code.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::CapExceeded { .. } => 3,
            Error::Degenerate(_) => 4,
            _ => 2,
        };
        Failure { code, message: e.to_string() }
    }
}

fn input_error(message: impl Into<String>) -> Failure {
    Failure { code: 2, message: message.into() }
}

type CliResult<T> = Result<T, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn run(cli: &Cli) -> CliResult<()> {
    let g = &cli.global;
    if let Some(tol) = g.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(input_error("--tol must be positive and finite"));
        }
    }
    if g.grid_res == 0 {
        return Err(input_error("--grid-res must be at least 1"));
    }
    let text = match &cli.command {
        Command::Cost => cmd_cost(g)?,
        Command::Nash { action } => cmd_nash(g, action)?,
        Command::Herding { action } => cmd_herding(g, action)?,
        Command::PriceRegion(args) => cmd_price_region(g, args)?,
        Command::Cev { action } => cmd_cev(g, action)?,
    };
    emit(&text, g.out.as_deref()).map_err(|e| input_error(format!("cannot write output: {e}")))
}

fn read_json<T: DeserializeOwned>(path: Option<&Path>, flag: &str) -> CliResult<T> {
    let path = path.ok_or_else(|| input_error(format!("{flag} FILE is required")))?;
    let raw = fs::read_to_string(path).map_err(|e| input_error(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&raw).map_err(|e| input_error(format!("cannot parse {}: {e}", path.display())))
}

/// Loads and validates a discrete scenario; warnings go to stderr.
fn load_game(g: &Global) -> CliResult<GameInstance> {
    let game: GameInstance = read_json(g.scenario.as_deref(), "--scenario")?;
    for v in game.validate().iter().filter(|v| v.severity == Severity::Warning) {
        eprintln!("warning: {v}");
    }
    game.ensure_valid()?;
    Ok(game)
}

fn load_profile(g: &Global, game: &GameInstance) -> CliResult<StrategyProfile> {
    let profile: StrategyProfile = read_json(g.profile.as_deref(), "--profile")?;
    game.check_profile(&profile)?;
    Ok(profile)
}

fn load_cev(g: &Global) -> CliResult<ContinuousGame> {
    let game: ContinuousGame = read_json(g.scenario.as_deref(), "--scenario")?;
    for v in game.validate().iter().filter(|v| v.severity == Severity::Warning) {
        eprintln!("warning: {v}");
    }
    game.ensure_valid()?;
    Ok(game)
}

fn json<T: Serialize>(value: &T) -> CliResult<String> {
    to_json(value).map_err(|e| input_error(format!("serialization failed: {e}")))
}

fn csv(header: &[&str], rows: &[Vec<String>]) -> CliResult<String> {
    to_csv(header, rows).map_err(|e| input_error(format!("csv output failed: {e}")))
}

fn json_only(g: &Global, what: &str) -> CliResult<()> {
    if g.format == Some(Format::Csv) {
        return Err(input_error(format!("{what} has no CSV form")));
    }
    Ok(())
}

#[derive(Serialize)]
struct PlayerCost {
    player: usize,
    #[serde(flatten)]
    breakdown: evcg_core::model::CostBreakdown,
}

fn cmd_cost(g: &Global) -> CliResult<String> {
    let game = load_game(g)?;
    let profile = load_profile(g, &game)?;
    let costs = (0..game.n_players())
        .map(|i| Ok(PlayerCost { player: i, breakdown: game.player_cost(&profile, i)? }))
        .collect::<Result<Vec<_>, Error>>()?;
    match g.format.unwrap_or(Format::Json) {
        Format::Json => json(&costs),
        Format::Csv => {
            let rows: Vec<Vec<String>> = costs
                .iter()
                .map(|c| {
                    vec![
                        c.player.to_string(),
                        fmt_float(c.breakdown.total_direct),
                        fmt_float(c.breakdown.total_dissat),
                        fmt_float(c.breakdown.total),
                    ]
                })
                .collect();
            csv(&["player", "total_direct", "total_dissat", "total"], &rows)
        }
    }
}

fn cmd_nash(g: &Global, action: &NashAction) -> CliResult<String> {
    json_only(g, "nash")?;
    let game = load_game(g)?;
    match action {
        NashAction::Check => {
            let profile = load_profile(g, &game)?;
            json(&equilibrium::is_nash(&game, &profile)?)
        }
        NashAction::Enumerate => json(&equilibrium::enumerate_nash(&game, g.cap)?),
        NashAction::BestResponse { player } => {
            let profile = load_profile(g, &game)?;
            json(&equilibrium::best_response(&game, &profile, *player)?)
        }
    }
}

/// Curve and prices from flags, falling back to the scenario's first player.
fn resolve_curve(g: &Global, args: &CurveArgs) -> CliResult<(Dissatisfaction, f64, f64)> {
    match args.kind {
        Some(kind) => {
            let need =
                |v: Option<f64>, name: &str| v.ok_or_else(|| input_error(format!("--{name} is required with --kind")));
            let (alpha, beta) = (need(args.alpha, "alpha")?, need(args.beta, "beta")?);
            let (bd, bn) = (need(args.bd, "bd")?, need(args.bn, "bn")?);
            let f = match kind {
                CurveKind::Linear => Dissatisfaction::linear(alpha, beta),
                CurveKind::Logistic => Dissatisfaction::logistic(alpha, beta),
            };
            Ok((f, bd, bn))
        }
        None => {
            let game = load_game(g)?;
            let p = game.players.first().ok_or_else(|| input_error("scenario has no players"))?;
            Ok((p.f_offpeak.clone(), args.bd.unwrap_or(p.price_peak), args.bn.unwrap_or(p.price_offpeak)))
        }
    }
}

fn cmd_herding(g: &Global, action: &HerdingAction) -> CliResult<String> {
    match action {
        HerdingAction::Threshold(args) => {
            json_only(g, "herding threshold")?;
            let (f, bd, bn) = resolve_curve(g, args)?;
            json(&herding::threshold_for_tol(&f, bd, bn, g.tol.unwrap_or(ROOT_TOL))?)
        }
        HerdingAction::Sweep { n_min, n_max } => {
            if n_min > n_max {
                return Err(input_error("--n-min exceeds --n-max"));
            }
            let game = load_game(g)?;
            let template = HerdingTemplate::from_game(&game)?;
            let rows = herding::herding_sweep(&template, *n_min..=*n_max, g.cap)?;
            match g.format.unwrap_or(Format::Csv) {
                Format::Json => json(&rows),
                Format::Csv => {
                    let rows: Vec<Vec<String>> = rows
                        .iter()
                        .map(|r| {
                            vec![
                                r.n.to_string(),
                                fmt_float(r.x),
                                r.herding_is_nash.to_string(),
                                r.threshold_prediction.to_string(),
                            ]
                        })
                        .collect();
                    csv(&["n", "x", "herding_is_nash", "threshold_prediction"], &rows)
                }
            }
        }
        HerdingAction::Curve(args) => {
            let (f, bd, bn) = resolve_curve(g, args)?;
            let points = herding::curve_samples(&f, bd, bn, g.grid_res);
            match g.format.unwrap_or(Format::Csv) {
                Format::Json => json(&points),
                Format::Csv => {
                    let rows: Vec<Vec<String>> =
                        points.iter().map(|p| vec![fmt_float(p.x), fmt_float(p.f), fmt_float(p.rhs)]).collect();
                    csv(&["x", "f(x)", "bD-bN*x"], &rows)
                }
            }
        }
    }
}

fn cmd_price_region(g: &Global, args: &PriceRegionArgs) -> CliResult<String> {
    json_only(g, "price-region")?;
    let game = load_game(g)?;
    let profile = load_profile(g, &game)?;
    eprintln!("warning: scenario prices are ignored by price-region");
    if let Some(p) = args.player {
        if p >= game.n_players() {
            return Err(input_error(format!("player index {p} out of range")));
        }
    }
    let opts = PricingOptions { cap: g.cap, geom_tol: g.tol.unwrap_or(GEOM_TOL) };
    let induced = pricing::induce_prices(&game, &profile, &opts)?;
    if let Some(path) = &args.grid {
        let players: Vec<usize> = match args.player {
            Some(p) => vec![p],
            None => (0..game.n_players()).collect(),
        };
        let sets = players
            .iter()
            .map(|&i| pricing::deviation_vectors(&game, &profile, i, g.cap))
            .collect::<Result<Vec<_>, Error>>()?;
        let n = g.grid_res;
        let at = |lo: f64, hi: f64, k: usize| lo + (hi - lo) * k as f64 / n as f64;
        let mut rows = Vec::with_capacity((n + 1) * (n + 1));
        for a in 0..=n {
            let bd = at(args.bd_min, args.bd_max, a);
            for b in 0..=n {
                let bn = at(args.bn_min, args.bn_max, b);
                let feasible = bd >= pricing::FEAS_EPS && sets.iter().all(|s| pricing::satisfies_all(s, [bd, bn]));
                rows.push(vec![fmt_float(bd), fmt_float(bn), feasible.to_string()]);
            }
        }
        let text = csv(&["bD", "bN", "feasible"], &rows)?;
        emit(&text, Some(path)).map_err(|e| input_error(format!("cannot write {}: {e}", path.display())))?;
    }
    json(&induced)
}

#[derive(Serialize)]
struct CevNash {
    coefficients: cevgame::Coefficients,
    vertex: f64,
    q_star: f64,
    interior: bool,
}

#[derive(Serialize)]
struct GapPoint {
    g1: f64,
    gap: f64,
}

fn cmd_cev(g: &Global, action: &CevAction) -> CliResult<String> {
    let game = load_cev(g)?;
    let tol = g.tol.unwrap_or(CCE_TOL);
    match action {
        CevAction::Nash => {
            json_only(g, "cev nash")?;
            let vertex = game.nash_vertex()?;
            let q_star = cevgame::nash_quantity(&game)?;
            json(&CevNash {
                coefficients: game.coefficients(),
                vertex,
                q_star,
                interior: vertex > 0.0 && vertex < game.m,
            })
        }
        CevAction::Gap { g1: Some(g1) } => {
            json_only(g, "cev gap at a single g1")?;
            if !(0.0..=game.m).contains(g1) {
                return Err(input_error(format!("--g1 must lie in [0, M = {}]", game.m)));
            }
            json(&GapPoint { g1: *g1, gap: cevgame::cce_gap(&game, *g1)? })
        }
        CevAction::Gap { g1: None } => {
            let n = g.grid_res;
            let points = (0..=n)
                .map(|k| {
                    let g1 = game.m * k as f64 / n as f64;
                    Ok(GapPoint { g1, gap: cevgame::cce_gap(&game, g1)? })
                })
                .collect::<Result<Vec<_>, Error>>()?;
            match g.format.unwrap_or(Format::Csv) {
                Format::Json => json(&points),
                Format::Csv => {
                    let rows: Vec<Vec<String>> =
                        points.iter().map(|p| vec![fmt_float(p.g1), fmt_float(p.gap)]).collect();
                    csv(&["g1", "gap"], &rows)
                }
            }
        }
        CevAction::Scan => {
            json_only(g, "cev scan")?;
            json(&cevgame::cce_scan(&game, g.grid_res, tol)?)
        }
    }
}
