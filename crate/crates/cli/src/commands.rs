use std::path::Path;

use dynascore::equilibrium::{fpa_equilibrium_solve, BidFunction, SolverOptions, SolverReport};
use dynascore::oracle::{dp_solve, DpSpec};
use dynascore::revenue::{simulate_arms, Arm, Bidding};
use dynascore::stopping::{fpa_value, spa3_value, spa_reserve_value};
use dynascore::verify::{run_check, CheckResult, VerifyOptions, CHECK_NAMES};
use dynascore::{AuctionFormat, AuctionSpec, ExerciseRule, MarketParams, Tabulated, ValueDistribution};
use serde::Serialize;

use crate::config::{Config, ConfigError};
use crate::output::{real, OutDir};
use crate::CliError;

const MARKET_KEYS: [&str; 4] = ["market.p", "market.lambda", "market.r", "market.n"];
const DIST_KEYS: [&str; 5] = ["dist.family", "dist.hi", "dist.k", "dist.rate", "dist.table"];
const SOLVER_KEYS: [&str; 6] = [
    "solver.value_points",
    "solver.bid_points",
    "solver.damping",
    "solver.tolerance",
    "solver.max_iters",
    "solver.refine",
];

fn keys(groups: &[&[&'static str]]) -> Vec<&'static str> {
    groups.iter().flat_map(|g| g.iter().copied()).collect()
}

/// Attributes a core validation error to the config key it came from.
fn in_section<'a>(section: &str, cfg: &'a Config) -> impl Fn(dynascore::Error) -> CliError + 'a {
    let section = section.to_string();
    move |e| match e {
        dynascore::Error::InvalidParameter { field, reason } => {
            let key = format!("{section}.{field}");
            CliError::Config(cfg.error(&key, reason))
        }
        other => CliError::from(other),
    }
}

pub fn market(cfg: &Config) -> Result<MarketParams, CliError> {
    let p = cfg.f64("market.p")?;
    let lambda = cfg.f64_or("market.lambda", 1.0)?;
    let r = cfg.f64_or("market.r", 0.0)?;
    let n = cfg.usize_or("market.n", 2)?;
    MarketParams::new(p, lambda, r, n).map_err(in_section("market", cfg))
}

/// `dist.table` paths are relative to the config file's directory.
pub fn distribution(cfg: &Config, base: &Path) -> Result<ValueDistribution, CliError> {
    let family = cfg.str_or("dist.family", "uniform");
    let positive = |key: &str, default: f64| -> Result<f64, CliError> {
        let x = cfg.f64_or(key, default)?;
        if x > 0.0 {
            Ok(x)
        } else {
            Err(cfg.error(key, "must be positive").into())
        }
    };
    let dist = match family {
        "uniform" => ValueDistribution::Uniform {
            hi: positive("dist.hi", 1.0)?,
        },
        "power" => ValueDistribution::Power {
            k: positive("dist.k", 2.0)?,
            hi: positive("dist.hi", 1.0)?,
        },
        "truncated_exponential" => {
            ValueDistribution::truncated_exponential(positive("dist.rate", 1.0)?, positive("dist.hi", 10.0)?)
                .map_err(in_section("dist", cfg))?
        }
        "tabulated" => {
            let path = base.join(cfg.str("dist.table")?);
            let table = Tabulated::load(&path).map_err(|e| cfg.error("dist.table", e.to_string()))?;
            ValueDistribution::Tabulated(table)
        }
        other => {
            return Err(cfg
                .error(
                    "dist.family",
                    format!("unknown family `{other}` (uniform, power, truncated_exponential, tabulated)"),
                )
                .into())
        }
    };
    let report = dist.check_regularity(2000);
    if let Some(v) = report.violation {
        return Err(cfg
            .error(
                "dist.family",
                format!("virtual value decreases on [{}, {}]; only regular laws are supported", v.from, v.to),
            )
            .into());
    }
    Ok(dist)
}

fn solver_options(cfg: &Config, reserve: f64) -> Result<SolverOptions, ConfigError> {
    let d = SolverOptions::default();
    Ok(SolverOptions {
        value_points: cfg.usize_or("solver.value_points", d.value_points)?,
        bid_points: cfg.usize_or("solver.bid_points", d.bid_points)?,
        refine: cfg.bool_or("solver.refine", d.refine)?,
        damping: cfg.f64_or("solver.damping", d.damping)?,
        tolerance: cfg.f64_or("solver.tolerance", d.tolerance)?,
        max_iters: cfg.usize_or("solver.max_iters", d.max_iters)?,
        reserve,
    })
}

fn solve(
    cfg: &Config,
    dist: &ValueDistribution,
    params: &MarketParams,
    reserve: f64,
) -> Result<(BidFunction, SolverReport), CliError> {
    let opts = solver_options(cfg, reserve)?;
    fpa_equilibrium_solve(dist, params, &opts).map_err(in_section("solver", cfg))
}

fn seed(cfg: &Config) -> Result<u64, CliError> {
    Ok(cfg.u64_or("run.seed", 0)?)
}

#[derive(Debug)]
pub struct Finished {
    pub not_converged: Option<String>,
}

pub fn simulate(cfg: &Config, base: &Path, out: &Path) -> Result<Finished, CliError> {
    let mut known = keys(&[&MARKET_KEYS, &DIST_KEYS, &SOLVER_KEYS]);
    known.extend([
        "run.n_samples",
        "run.seed",
        "arm.*.format",
        "arm.*.reserve",
        "arm.*.bidding",
        "arm.*.bids",
        "arm.*.timing",
    ]);
    cfg.check_keys(&known)?;
    let params = market(cfg)?;
    let dist = distribution(cfg, base)?;
    let n_samples = cfg.u64_or("run.n_samples", 100_000)?;
    if n_samples == 0 {
        return Err(cfg.error("run.n_samples", "must be at least 1").into());
    }
    let seed = seed(cfg)?;
    let names = cfg.names("arm");
    if names.is_empty() {
        return Err(ConfigError {
            line: None,
            field: "arm.<name>.format".into(),
            reason: "no arms configured".into(),
        }
        .into());
    }

    let mut arms = Vec::new();
    let mut not_converged = None;
    for name in &names {
        let key = |k: &str| format!("arm.{name}.{k}");
        let format = match cfg.str(&key("format"))? {
            "first" => AuctionFormat::FirstPrice,
            "second" => AuctionFormat::SecondPrice,
            other => return Err(cfg.error(&key("format"), format!("expected first or second, got `{other}`")).into()),
        };
        let reserve = cfg.f64_or(&key("reserve"), 0.0)?;
        let rule = match cfg.str_or(&key("timing"), "optimal") {
            "optimal" => ExerciseRule::Optimal,
            "first_price" => ExerciseRule::FirstPriceTiming,
            other => {
                return Err(cfg
                    .error(&key("timing"), format!("expected optimal or first_price, got `{other}`"))
                    .into())
            }
        };
        let spec = AuctionSpec::new(format, reserve, params)
            .map_err(in_section(&format!("arm.{name}"), cfg))?
            .with_rule(rule);
        spec.check_supported()?;
        let bidding = match cfg.str(&key("bidding"))? {
            "truthful" => Bidding::Truthful,
            "closed_form" => Bidding::ClosedFormFpa,
            "fixed" => Bidding::FixedBids(
                cfg.f64_list(&key("bids"))?
                    .ok_or_else(|| cfg.error(&key("bids"), "missing required field for fixed bidding"))?,
            ),
            "equilibrium" => {
                if format != AuctionFormat::FirstPrice {
                    return Err(CliError::Unsupported(format!("arm {name}: equilibrium bids are first-price only")));
                }
                let (bids, report) = solve(cfg, &dist, &params, reserve)?;
                if !report.converged {
                    not_converged = Some(format!(
                        "arm {name}: equilibrium solver stopped after {} iterations with change {:e}",
                        report.iterations, report.sup_norm_delta
                    ));
                }
                Bidding::SolvedEquilibrium(bids)
            }
            other => {
                return Err(cfg
                    .error(
                        &key("bidding"),
                        format!("expected truthful, closed_form, equilibrium or fixed, got `{other}`"),
                    )
                    .into())
            }
        };
        bidding.check(&spec).map_err(in_section(&format!("arm.{name}"), cfg))?;
        arms.push(Arm { spec, bidding });
    }

    let moments = simulate_arms(&dist, &arms, n_samples, seed)?;
    let rows: Vec<Vec<String>> = arms
        .iter()
        .enumerate()
        .map(|(i, arm)| {
            let est = moments.estimate(i, seed);
            vec![
                arm.spec.format.name().to_string(),
                real(arm.spec.reserve),
                real(params.r),
                real(params.p),
                real(params.lambda),
                arm.bidding.name().to_string(),
                n_samples.to_string(),
                seed.to_string(),
                real(est.mean),
                real(est.std_error),
            ]
        })
        .collect();
    for (name, row) in names.iter().zip(&rows) {
        log::info!("{name}: mean {} (se {})", row[8], row[9]);
    }
    let mut dir = OutDir::create(out)?;
    dir.write_csv(
        "revenue.csv",
        &["format", "reserve", "r", "p", "lambda", "bidding", "n_samples", "seed", "mean", "std_error"],
        &rows,
    )?;
    dir.finish("simulate", cfg.digest(), seed)?;
    Ok(Finished { not_converged })
}

pub fn equilibrium(cfg: &Config, base: &Path, out: &Path) -> Result<Finished, CliError> {
    let mut known = keys(&[&MARKET_KEYS, &DIST_KEYS, &SOLVER_KEYS]);
    known.extend(["solver.reserve", "run.seed"]);
    cfg.check_keys(&known)?;
    let params = market(cfg)?;
    let dist = distribution(cfg, base)?;
    let reserve = cfg.f64_or("solver.reserve", 0.0)?;
    let (bids, report) = solve(cfg, &dist, &params, reserve)?;
    let rows: Vec<Vec<String>> = bids
        .grid_values
        .iter()
        .zip(&bids.grid_bids)
        .map(|(&v, &b)| vec![real(v), real(b)])
        .collect();
    let mut dir = OutDir::create(out)?;
    dir.write_csv("bids.csv", &["v", "bid"], &rows)?;
    dir.write_json("solver.json", &report)?;
    dir.finish("equilibrium", cfg.digest(), seed(cfg)?)?;
    let not_converged = (!report.converged).then(|| {
        format!(
            "equilibrium solver stopped after {} iterations with change {:e} (tolerance {:e})",
            report.iterations, report.sup_norm_delta, report.tolerance
        )
    });
    Ok(Finished { not_converged })
}

pub const VALUE_KEYS: [&str; 10] = [
    "value.format",
    "value.b1",
    "value.b2",
    "value.b3",
    "value.reserve",
    "value.r",
    "value.lambda",
    "value.p",
    "value.grid_step",
    "run.seed",
];

pub fn value_function(cfg: &Config, out: &Path) -> Result<Finished, CliError> {
    cfg.check_keys(&VALUE_KEYS)?;
    let b1 = cfg.f64("value.b1")?;
    let b2 = cfg.f64("value.b2")?;
    let b3 = cfg.f64_opt("value.b3")?;
    let reserve = cfg.f64_or("value.reserve", 0.0)?;
    let r = cfg.f64_or("value.r", 0.0)?;
    let lambda = cfg.f64_or("value.lambda", 1.0)?;
    let p = cfg.f64_or("value.p", 0.5)?;
    let step = cfg.f64_or("value.grid_step", 1e-3)?;
    for (key, x) in [("value.b1", b1), ("value.b2", b2), ("value.reserve", reserve), ("value.r", r)] {
        if x < 0.0 {
            return Err(cfg.error(key, "must be nonnegative").into());
        }
    }
    if !(lambda > 0.0) {
        return Err(cfg.error("value.lambda", "must be positive").into());
    }
    if !(0.0..=1.0).contains(&p) {
        return Err(cfg.error("value.p", "must lie in [0, 1]").into());
    }
    if !(step > 0.0 && step <= 0.1) {
        return Err(cfg.error("value.grid_step", "must lie in (0, 0.1]").into());
    }
    if b1 < b2 || b3.is_some_and(|b3| b2 < b3 || b3 < 0.0) {
        return Err(cfg.error("value.b2", "bids must be ordered b1 ≥ b2 ≥ b3 ≥ 0").into());
    }
    let rho = r / lambda;
    let unsupported = |why: &str| Err(CliError::Unsupported(why.to_string()));

    type Closed = Box<dyn Fn(f64) -> dynascore::Result<f64>>;
    let (mut spec, closed, closed_boundary): (DpSpec, Closed, Option<f64>) = match cfg.str("value.format")? {
        "second" => match b3 {
            Some(b3) => {
                if reserve > 0.0 || r > 0.0 {
                    return unsupported("three-bidder value function needs no reserve and r = 0");
                }
                let stop_now = b2 >= 2.0 * b3;
                (
                    DpSpec::spa_three(b2, b3),
                    Box::new(move |m| spa3_value(m, b2, b3)),
                    stop_now.then_some(0.0),
                )
            }
            None if reserve > 0.0 => {
                if r > 0.0 {
                    return unsupported("reserve prices with discounting");
                }
                (
                    DpSpec::spa_reserve(b2, reserve),
                    Box::new(move |m| spa_reserve_value(m, b2, reserve)),
                    (b2 >= 2.0 * reserve).then_some(0.0),
                )
            }
            None => {
                let mut spec = DpSpec::spa_no_reserve(b2);
                spec.rho = rho;
                (spec, Box::new(move |m| Ok(m * b2)), Some(0.0))
            }
        },
        "first" => {
            if reserve > 0.0 {
                return unsupported("first-price value function with a reserve");
            }
            if b3.is_some() {
                return unsupported("three-bidder first-price value function");
            }
            let boundary = (rho > 0.0 && b2 > 0.0).then(|| (1.0 - rho * b1 / b2).max(0.0));
            (
                DpSpec::fpa_discounted(b1, b2, rho),
                Box::new(move |m| fpa_value(m, b1, b2, rho)),
                boundary,
            )
        }
        other => {
            return Err(cfg
                .error("value.format", format!("expected first or second, got `{other}`"))
                .into())
        }
    };
    spec = spec.with_grid_step(step);
    let dp = dp_solve(&spec)?;
    let boundary = dp.boundary.map(real).unwrap_or_default();
    let mut rows = Vec::with_capacity(dp.grid.len());
    let mut worst = 0.0f64;
    for (&mu, &v) in dp.grid.iter().zip(&dp.value) {
        let c = closed(mu)?;
        worst = worst.max((c - v).abs());
        rows.push(vec![real(mu), real(c), real(v), real((c - v).abs()), boundary.clone()]);
    }
    log::info!(
        "max |closed form - dp| = {worst:.3e}; dp boundary {:?}, closed-form boundary {:?}; value at p: {}",
        dp.boundary,
        closed_boundary,
        closed(p)?
    );
    let mut dir = OutDir::create(out)?;
    dir.write_csv("value.csv", &["mu", "closed_form", "dp_oracle", "abs_diff", "boundary"], &rows)?;
    dir.finish("value-function", cfg.digest(), seed(cfg)?)?;
    Ok(Finished { not_converged: None })
}

#[derive(Serialize)]
struct VerifyReport {
    seed: u64,
    all_passed: bool,
    checks: Vec<CheckResult>,
}

pub fn verify(cfg: &Config, out: &Path) -> Result<bool, CliError> {
    cfg.check_keys(&[
        "run.seed",
        "verify.n_samples",
        "verify.ordering_worlds",
        "verify.value_points",
        "verify.bid_points",
        "verify.max_iters",
        "verify.checks",
        "verify.fault",
    ])?;
    let mut opts = VerifyOptions::default();
    opts.seed = cfg.u64_or("run.seed", opts.seed)?;
    opts.n_samples = cfg.u64_or("verify.n_samples", opts.n_samples)?;
    opts.ordering_worlds = cfg.u64_or("verify.ordering_worlds", opts.ordering_worlds)?;
    opts.solver.value_points = cfg.usize_or("verify.value_points", opts.solver.value_points)?;
    opts.solver.bid_points = cfg.usize_or("verify.bid_points", opts.solver.bid_points)?;
    opts.solver.max_iters = cfg.usize_or("verify.max_iters", opts.solver.max_iters)?;
    if opts.n_samples < 2 {
        return Err(cfg.error("verify.n_samples", "need at least 2 samples").into());
    }
    match cfg.str_or("verify.fault", "none") {
        "none" => {}
        "no_reserve_floor" => opts.exercise.floor_at_reserve = false,
        other => {
            return Err(cfg
                .error("verify.fault", format!("expected none or no_reserve_floor, got `{other}`"))
                .into())
        }
    }
    let ids: Vec<u32> = match cfg.f64_list("verify.checks")? {
        None => (1..=CHECK_NAMES.len() as u32).collect(),
        Some(list) => list
            .into_iter()
            .map(|x| {
                let id = x as u32;
                if x.fract() == 0.0 && (1..=CHECK_NAMES.len() as u32).contains(&id) {
                    Ok(id)
                } else {
                    Err(cfg.error("verify.checks", format!("no check {x}")))
                }
            })
            .collect::<Result<_, _>>()?,
    };

    let mut checks = Vec::new();
    for id in ids {
        let started = std::time::Instant::now();
        let result = run_check(id, &opts)?;
        println!("{}  ({:.1}s)", result.line(), started.elapsed().as_secs_f64());
        checks.push(result);
    }
    let all_passed = checks.iter().all(|c| c.passed);
    let mut dir = OutDir::create(out)?;
    dir.write_json(
        "verify_report.json",
        &VerifyReport {
            seed: opts.seed,
            all_passed,
            checks,
        },
    )?;
    dir.finish("verify", cfg.digest(), opts.seed)?;
    Ok(all_passed)
}
