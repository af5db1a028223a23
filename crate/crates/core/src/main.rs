use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;

use wavefront::lab::run::write_json;
use wavefront::lab::{self, Experiment, Scenario};
use wavefront::models::{builtin_models, validate_model};
use wavefront::{Error, Result};

#[derive(Parser)]
#[command(name = "wavefront", version, about = "Front tracking experiments for Temple-class systems")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Scenario file (TOML)
    #[arg(long, global = true)]
    scenario: Option<PathBuf>,
    /// Output directory; defaults to the scenario's `output` or `out`
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    nu: Option<u32>,
    #[arg(long, global = true)]
    horizon: Option<f64>,
}

#[derive(Subcommand, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Check the model of the scenario, or every built-in model
    Validate,
    /// Track the scenario data and write the event log, fronts and metrics
    Run,
    Converge,
    Stability,
    Decay,
    EpsilonShock,
    Sensitivity,
    Characteristics,
}

fn load(cli: &Cli) -> Result<Scenario> {
    let path = cli.scenario.as_ref().ok_or_else(|| Error::Scenario("--scenario is required".into()))?;
    let mut s = Scenario::load(path)?;
    if let Some(seed) = cli.seed {
        s.seed = seed;
    }
    if let Some(nu) = cli.nu {
        s.grid.nu = nu;
    }
    if let Some(h) = cli.horizon {
        s.horizon = h;
    }
    s.check()?;
    Ok(s)
}

fn out_dir(cli: &Cli, s: &Scenario) -> PathBuf {
    cli.out.clone().or_else(|| s.output.clone()).unwrap_or_else(|| PathBuf::from("out"))
}

/// Parameters from the scenario when its experiment matches the command.
fn params_for(s: &Scenario, command: Command) -> Experiment {
    let wanted = match command {
        Command::Converge => Experiment::Converge(Default::default()),
        Command::Stability => Experiment::Stability(Default::default()),
        Command::Decay => Experiment::Decay(Default::default()),
        Command::EpsilonShock => Experiment::EpsilonShock(Default::default()),
        Command::Sensitivity => Experiment::Sensitivity(Default::default()),
        Command::Characteristics => Experiment::Characteristics(Default::default()),
        Command::Validate | Command::Run => Experiment::Run,
    };
    if s.experiment.name() == wanted.name() {
        s.experiment.clone()
    } else {
        wanted
    }
}

fn write_csv(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> Result<()>) -> Result<()> {
    let mut buf = Vec::new();
    f(&mut buf)?;
    fs::write(path, buf)?;
    Ok(())
}

fn finish<T: Serialize>(dir: &Path, report: &T, violations: usize, summary: String) -> Result<ExitCode> {
    write_json(&dir.join("metrics.json"), report)?;
    println!("{summary}; violations {violations}; artifacts in {}", dir.display());
    Ok(if violations == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn validate(cli: &Cli) -> Result<ExitCode> {
    let models = match &cli.scenario {
        Some(_) => vec![load(cli)?.model()?],
        None => builtin_models(),
    };
    let mut ok = true;
    for m in &models {
        let report = validate_model(m, 256)?;
        for c in &report.outcomes {
            println!("{:<12} {:?}: measured {:.3e}, tolerance {:.3e} {}", m.name(), c.check, c.measured, c.tolerance, if c.passed { "ok" } else { "FAILED" });
        }
        ok &= report.passed();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    if cli.command == Command::Validate {
        return validate(cli);
    }
    let s = load(cli)?;
    let dir = out_dir(cli, &s);
    fs::create_dir_all(&dir)?;
    fs::write(dir.join("scenario.toml"), s.to_toml()?)?;
    match (cli.command, params_for(&s, cli.command)) {
        (Command::Run, _) => {
            let art = lab::run(&s)?;
            art.write(&dir)?;
            let m = &art.metrics;
            println!("{} events, {} -> {} fronts; violations {}; artifacts in {}", m.events, m.fronts_initial, m.fronts_final, m.violations, dir.display());
            Ok(if m.violations == 0 { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        (_, Experiment::Converge(p)) => {
            let r = lab::experiment_converge(&s, &p)?;
            write_csv(&dir.join("converge.csv"), |out| {
                writeln!(out, "coarse_nu,fine_nu,l1")?;
                for d in &r.pairwise {
                    writeln!(out, "{},{},{}", d.coarse, d.fine, d.l1)?;
                }
                Ok(())
            })?;
            finish(&dir, &r, r.violations, format!("monotone {}", r.monotone))
        }
        (_, Experiment::Stability(p)) => {
            let r = lab::experiment_stability(&s, &p)?;
            finish(&dir, &r, r.violations, format!("K' variation across TV levels {:?}", r.variation))
        }
        (_, Experiment::Decay(p)) => {
            let r = lab::experiment_decay(&s, &p)?;
            finish(&dir, &r, r.violations, format!("kappa spread {:.3}, bound holds {}", r.kappa_spread, r.bound_holds))
        }
        (_, Experiment::EpsilonShock(p)) => {
            let r = lab::experiment_epsilon_shock(&s, &p)?;
            finish(&dir, &r, r.violations, format!("L {:.4}, L' {:.4}, bounded {}", r.l_hat, r.l_prime_hat, r.bounded))
        }
        (_, Experiment::Sensitivity(p)) => {
            let r = lab::experiment_sensitivity(&s, &p)?;
            for (k, v) in r.shifts.iter().enumerate() {
                write_csv(&dir.join(format!("integral_shift_{k}.csv")), |out| v.write_csv(out))?;
            }
            finish(&dir, &r, r.violations, format!("max defect {:.3e}, slopes ok {}", r.max_defect, r.slopes_ok))
        }
        (_, Experiment::Characteristics(p)) => {
            let r = lab::experiment_characteristics(&s, &p)?;
            write_csv(&dir.join("characteristics.csv"), |out| {
                writeln!(out, "family,y,t,x")?;
                for (y, path) in &r.paths {
                    path.write_csv(*y, &mut *out)?;
                }
                Ok(())
            })?;
            finish(&dir, &r, r.violations, format!("C hat {:.4}, variation {:.4}", r.map.c_hat, r.c_hat_variation))
        }
        (_, Experiment::Run) => unreachable!("every experiment command maps to its own parameters"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            match &cli.scenario {
                Some(p) => eprintln!("error: scenario {}: {e}", p.display()),
                None => eprintln!("error: {e}"),
            }
            ExitCode::from(2)
        }
    }
}
