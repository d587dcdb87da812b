//! Acceptance suite: one line per criterion, pass or fail, with the
//! tolerance pinned here rather than taken from the library.

use std::path::Path;
use std::process::Command;
use std::time::Instant;

use dynascore::equilibrium::spa_reserve_deviation;
use dynascore::verify::{run_check, CheckResult, VerifyOptions};
use dynascore::ValueDistribution;

struct Criterion {
    id: u32,
    /// Tolerance the suite must report for its headline statistic.
    tolerance: f64,
    /// Extra test-side condition on the observed statistic.
    accept: fn(&CheckResult) -> Result<(), String>,
}

fn within_tolerance(c: &CheckResult) -> Result<(), String> {
    if c.observed <= c.tolerance {
        Ok(())
    } else {
        Err(format!("observed {:.3e} above tolerance", c.observed))
    }
}

fn positive_margin(c: &CheckResult) -> Result<(), String> {
    if c.observed > 0.0 {
        Ok(())
    } else {
        Err(format!("margin {:.3e} not positive", c.observed))
    }
}

// Independent of the library: the construction's bound is v̄ − ε − 2R with
// v̄ = 1 for uniform[0, 1].
fn witness_bound(c: &CheckResult) -> Result<(), String> {
    let expected = 1.0 - 0.1 - 2.0 * 0.5;
    if (c.observed - expected).abs() > 1e-12 {
        return Err(format!("deviation profit {} differs from v̄ − ε − 2R = {expected}", c.observed));
    }
    let w = spa_reserve_deviation(&ValueDistribution::uniform(), 0.5, 0.1).map_err(|e| e.to_string())?;
    if w.precondition {
        return Err("precondition v̄ > 2R unexpectedly holds".into());
    }
    positive_margin(c)
}

fn exact(c: &CheckResult) -> Result<(), String> {
    if c.observed == 0.0 {
        Ok(())
    } else {
        Err(format!("means differ by {:e} across worker counts", c.observed))
    }
}

const CRITERIA: [Criterion; 10] = [
    Criterion { id: 1, tolerance: 3.0, accept: within_tolerance },
    Criterion { id: 2, tolerance: 3.0, accept: within_tolerance },
    Criterion { id: 3, tolerance: 3.0, accept: within_tolerance },
    Criterion { id: 4, tolerance: 1e-3, accept: within_tolerance },
    Criterion { id: 5, tolerance: 1e-3, accept: |c| within_tolerance(&CheckResult { tolerance: c.tolerance + 1e-12, ..c.clone() }) },
    Criterion { id: 6, tolerance: 1e-3, accept: within_tolerance },
    Criterion { id: 7, tolerance: 1e-3, accept: within_tolerance },
    Criterion { id: 8, tolerance: 3.0, accept: within_tolerance },
    Criterion { id: 9, tolerance: 0.0, accept: witness_bound },
    Criterion { id: 10, tolerance: 0.0, accept: positive_margin },
];

const RUNTIME_LIMIT_10: f64 = 120.0;

fn run_cli(args: &[&str]) -> Result<(), String> {
    let status = Command::new(env!("CARGO_BIN_EXE_dynascore"))
        .args(args)
        .status()
        .map_err(|e| e.to_string())?;
    if status.success() {
        Ok(())
    } else {
        Err(format!("dynascore {} exited with {status}", args.join(" ")))
    }
}

// Identical config and seed give byte-identical CSVs for any `--threads`.
fn cli_determinism(dir: &Path) -> Result<String, String> {
    let cfg = dir.join("pair.cfg");
    std::fs::write(
        &cfg,
        "market.p = 0.5\nrun.n_samples = 200000\nrun.seed = 99\n\
         arm.fpa.format = first\narm.fpa.bidding = closed_form\n\
         arm.spa.format = second\narm.spa.bidding = truthful\n\
         arm.rsv.format = second\narm.rsv.reserve = 0.4\narm.rsv.bidding = fixed\narm.rsv.bids = 0.9, 0.6\n",
    )
    .map_err(|e| e.to_string())?;
    let eq = dir.join("eq.cfg");
    std::fs::write(&eq, "market.p = 0.5\nsolver.value_points = 128\nsolver.bid_points = 256\n")
        .map_err(|e| e.to_string())?;
    let mut files = Vec::new();
    for threads in ["1", "3"] {
        let out = dir.join(format!("t{threads}"));
        let o = out.to_str().unwrap();
        run_cli(&["simulate", "--config", cfg.to_str().unwrap(), "--out", o, "--threads", threads])?;
        run_cli(&["equilibrium", "--config", eq.to_str().unwrap(), "--out", o, "--threads", threads])?;
        let read = |name: &str| std::fs::read(out.join(name)).map_err(|e| e.to_string());
        files.push((read("revenue.csv")?, read("bids.csv")?));
    }
    if files[0] != files[1] {
        return Err("CSV outputs differ between --threads 1 and --threads 3".into());
    }
    Ok(format!("revenue.csv and bids.csv byte-identical for --threads 1 and 3 ({} bytes)", files[0].0.len()))
}

fn main() {
    let opts = VerifyOptions::default();
    let mut failures = Vec::new();
    let mut report = |id: u32, passed: bool, line: String| {
        println!("criterion {id:>2} {} {line}", if passed { "PASS" } else { "FAIL" });
        if !passed {
            failures.push(id);
        }
    };

    for c in &CRITERIA {
        let started = Instant::now();
        let outcome = run_check(c.id, &opts);
        let secs = started.elapsed().as_secs_f64();
        match outcome {
            Err(e) => report(c.id, false, format!("error: {e}")),
            Ok(result) => {
                let mut problems = Vec::new();
                if result.tolerance != c.tolerance {
                    problems.push(format!("suite tolerance {} not the pinned {}", result.tolerance, c.tolerance));
                }
                if let Err(why) = (c.accept)(&result) {
                    problems.push(why);
                }
                if !result.passed {
                    problems.push("suite verdict FAIL".into());
                }
                if c.id == 10 && secs > RUNTIME_LIMIT_10 {
                    problems.push(format!("took {secs:.0}s (limit {RUNTIME_LIMIT_10}s)"));
                }
                let mut line = format!("{}  [{secs:.1}s]", result.line());
                if !problems.is_empty() {
                    line.push_str(&format!("  <- {}", problems.join("; ")));
                }
                report(c.id, problems.is_empty(), line);
            }
        }
    }

    let started = Instant::now();
    let library = run_check(11, &opts).map_err(|e| e.to_string()).and_then(|r| {
        exact(&r)?;
        if r.passed {
            Ok(r.line())
        } else {
            Err(r.line())
        }
    });
    let tmp = tempfile::TempDir::new().expect("temp dir");
    let binary = cli_determinism(tmp.path());
    let passed = library.is_ok() && binary.is_ok();
    let text = [library, binary].map(|r| r.unwrap_or_else(|e| e)).join("; ");
    report(11, passed, format!("{text}  [{:.1}s]", started.elapsed().as_secs_f64()));

    if !failures.is_empty() {
        println!("acceptance: {} of 11 criteria failed: {failures:?}", failures.len());
        std::process::exit(1);
    }
    println!("acceptance: all 11 criteria passed");
}
