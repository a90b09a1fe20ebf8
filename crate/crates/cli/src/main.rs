use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use serde::Serialize;
use sha2::{Digest, Sha256};

use tiecap::allocation::{max_sum, sweep, trace_curve, AllocationCurve, CurvePoint, CurveResult, Study};
use tiecap::oracle::{compare_case, random_case};
use tiecap::risk_engine::{CapacityLevel, Policy, RiskResult};
use tiecap::scenario::{
    calibrate_scenario, gb_fr_like, prepare_study, DataConfig, ScenarioInputs, ScenarioSeries, ScenarioSpec,
};
use tiecap::weather_demand::{write_demand_csv, write_wind_csv};
use tiecap::HOURS_PER_YEAR;

#[derive(Parser)]
#[command(
    name = "tiecap",
    version,
    about = "Capacity value of interconnection between two power systems"
)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write synthetic demand and wind series plus a starter scenario.
    Synth {
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Number of non-leap years of hourly data.
        #[arg(long, default_value_t = 5)]
        years: usize,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Resolve "auto" portfolio sizes and load offsets, rewriting the scenario.
    Calibrate { scenario: PathBuf },
    /// Print the isolated LOLE of both systems.
    Baseline {
        scenario: PathBuf,
        /// Optional JSON report.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Trace one capacity allocation curve.
    Curve {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_policy)]
        policy: Policy,
        #[command(flatten)]
        trace: TraceArgs,
        /// Total interconnection capacity replacing the scenario's.
        #[arg(long)]
        capacity_mw: Option<u32>,
    },
    /// Trace the curves of all four power flow policies.
    Policies {
        scenario: PathBuf,
        #[command(flatten)]
        trace: TraceArgs,
        #[arg(long)]
        capacity_mw: Option<u32>,
    },
    /// Trace one policy across several interconnection capacities.
    Sweep {
        scenario: PathBuf,
        #[arg(long, value_parser = parse_policy, default_value = "share")]
        policy: Policy,
        #[command(flatten)]
        trace: TraceArgs,
        /// Total interconnection capacity; repeat for several curves.
        #[arg(long, required = true)]
        capacity_mw: Vec<u32>,
    },
    /// Compare the engine against the enumeration oracle on random cases.
    #[command(hide = true)]
    OracleCheck {
        #[arg(long, default_value_t = 200)]
        cases: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(clap::Args)]
struct TraceArgs {
    /// Number of trace points (default from the scenario).
    #[arg(long)]
    points: Option<usize>,
    /// Bisection resolution in MW (default from the scenario).
    #[arg(long)]
    tol_mw: Option<f64>,
    /// Output CSV; a JSON sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

fn parse_policy(s: &str) -> std::result::Result<Policy, String> {
    s.parse::<Policy>().map_err(|e| e.to_string())
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli.command) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth { seed, years, out } => synth(seed, years, &out),
        Command::Calibrate { scenario } => calibrate(&scenario),
        Command::Baseline { scenario, out } => baseline(&scenario, out.as_deref()),
        Command::Curve {
            scenario,
            policy,
            trace,
            capacity_mw,
        } => {
            let s = Loaded::open(&scenario, capacity_mw)?;
            let (points, tol) = s.trace_params(&trace);
            let curve = trace_curve(&s.study, policy, points, tol)?;
            let optimum = max_sum(&curve)?;
            ensure!(curve.points.contains(&optimum), "optimum is not a curve point");
            write_curve(&trace.out, &s, &CurveResult { curve, optimum }, points, tol)
        }
        Command::Policies {
            scenario,
            trace,
            capacity_mw,
        } => {
            let s = Loaded::open(&scenario, capacity_mw)?;
            let (points, tol) = s.trace_params(&trace);
            let ics = [s.study.interconnection().clone()];
            let curves = sweep(&s.study, &Policy::ALL, &ics, points, tol)?;
            write_bundle(&trace.out, &s, &curves, points, tol)
        }
        Command::Sweep {
            scenario,
            policy,
            trace,
            capacity_mw,
        } => {
            let s = Loaded::open(&scenario, None)?;
            let (points, tol) = s.trace_params(&trace);
            let ics = capacity_mw
                .iter()
                .map(|&c| s.spec.interconnection_spec(Some(f64::from(c))))
                .collect::<tiecap::Result<Vec<_>>>()?;
            let curves = sweep(&s.study, &[policy], &ics, points, tol)?;
            write_bundle(&trace.out, &s, &curves, points, tol)
        }
        Command::OracleCheck { cases, seed } => oracle_check(cases, seed),
    }
}

fn synth(seed: u64, years: usize, out: &Path) -> Result<()> {
    ensure!(years >= 1, "at least one year of data is needed");
    fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    let series = ScenarioSeries::synthetic(seed, years * HOURS_PER_YEAR as usize)?;
    write_demand_csv(&out.join("demand.csv"), &series.demand_a, &series.demand_b)?;
    write_wind_csv(&out.join("wind.csv"), &series.cf_a)?;
    let spec = gb_fr_like(DataConfig {
        demand_csv: "demand.csv".into(),
        wind_csv: "wind.csv".into(),
    });
    spec.save(&out.join("scenario.json"))?;
    println!(
        "wrote {} hourly rows to {} (demand.csv, wind.csv, scenario.json)",
        series.demand_a.len(),
        out.display()
    );
    Ok(())
}

fn calibrate(path: &Path) -> Result<()> {
    let mut spec = ScenarioSpec::load(path)?;
    let inputs = ScenarioInputs::load(&spec, path)?;
    let was_calibrated = spec.is_calibrated();
    let (a, b) = calibrate_scenario(&mut spec, &inputs)?;
    for (name, c) in [(&spec.system_a.name, a), (&spec.system_b.name, b)] {
        println!(
            "{name}: n_sets={} load_offset_mw={:.3} lole_h={:.6}",
            c.n_sets, c.load_offset_mw, c.lole
        );
    }
    if !was_calibrated {
        spec.save(path)?;
        println!("updated {}", path.display());
    }
    Ok(())
}

fn baseline(path: &Path, out: Option<&Path>) -> Result<()> {
    let s = Loaded::open(path, None)?;
    let r = s.study.baseline();
    println!("{}: lole_h={:.6}", s.spec.system_a.name, r.r_a);
    println!("{}: lole_h={:.6}", s.spec.system_b.name, r.r_b);
    if let Some(out) = out {
        #[derive(Serialize)]
        struct Report<'a> {
            tool: &'a str,
            version: &'a str,
            scenario_sha256: &'a str,
            baseline_lole_h: Lole,
        }
        write_json(
            out,
            &Report {
                tool: "tiecap",
                version: env!("CARGO_PKG_VERSION"),
                scenario_sha256: &s.hash,
                baseline_lole_h: r.into(),
            },
        )?;
    }
    Ok(())
}

fn oracle_check(cases: usize, seed: u64) -> Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..cases {
        worst = worst.max(compare_case(&random_case(&mut rng, 10))?);
    }
    println!("cases={cases} max_abs_diff={worst:e}");
    if worst > 1e-12 {
        bail!("engine and oracle disagree by {worst:e}");
    }
    Ok(())
}

/// A scenario file with its hash and prepared study.
struct Loaded {
    spec: ScenarioSpec,
    hash: String,
    study: Study,
}

impl Loaded {
    fn open(path: &Path, capacity_mw: Option<u32>) -> Result<Self> {
        let bytes = fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        let hash = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        let spec = ScenarioSpec::load(path)?;
        let inputs = ScenarioInputs::load(&spec, path)?;
        let mut study = prepare_study(&spec, &inputs)?;
        if let Some(c) = capacity_mw {
            study = study.with_interconnection(spec.interconnection_spec(Some(f64::from(c)))?);
        }
        Ok(Self { spec, hash, study })
    }

    fn trace_params(&self, args: &TraceArgs) -> (usize, f64) {
        (
            args.points.unwrap_or(self.spec.trace.n_points),
            args.tol_mw.unwrap_or(self.spec.trace.tol_mw),
        )
    }
}

#[derive(Serialize)]
struct Lole {
    a: f64,
    b: f64,
}

impl From<RiskResult> for Lole {
    fn from(r: RiskResult) -> Self {
        Self { a: r.r_a, b: r.r_b }
    }
}

#[derive(Serialize)]
struct PointOut {
    l_a_mw: f64,
    l_b_mw: f64,
    binding: &'static str,
}

impl From<&CurvePoint> for PointOut {
    fn from(p: &CurvePoint) -> Self {
        Self {
            l_a_mw: p.l_a,
            l_b_mw: p.l_b,
            binding: p.binding.name(),
        }
    }
}

#[derive(Serialize)]
struct CurveOut<'a> {
    policy: &'a str,
    capacity_mw: f64,
    levels: &'a [CapacityLevel],
    optimum: PointOut,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    points: Vec<PointOut>,
}

impl<'a> CurveOut<'a> {
    fn new(r: &'a CurveResult, with_points: bool) -> Self {
        let c: &AllocationCurve = &r.curve;
        Self {
            policy: c.policy.name(),
            capacity_mw: c.interconnection.max_capacity_mw(),
            levels: c.interconnection.levels(),
            optimum: (&r.optimum).into(),
            points: if with_points {
                c.points.iter().map(Into::into).collect()
            } else {
                Vec::new()
            },
        }
    }
}

#[derive(Serialize)]
struct Sidecar<'a, T: Serialize> {
    tool: &'a str,
    version: &'a str,
    scenario_sha256: &'a str,
    baseline_lole_h: Lole,
    n_points: usize,
    tol_mw: f64,
    tol_risk_h: f64,
    #[serde(flatten)]
    body: T,
}

fn sidecar_path(out: &Path) -> Result<PathBuf> {
    let side = out.with_extension("json");
    ensure!(
        side != out,
        "--out must not end in .json; the JSON sidecar is written next to the CSV"
    );
    Ok(side)
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = fs::File::create(path).with_context(|| format!("cannot write {}", path.display()))?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

fn sidecar<'a, T: Serialize>(s: &'a Loaded, points: usize, tol: f64, body: T) -> Sidecar<'a, T> {
    Sidecar {
        tool: "tiecap",
        version: env!("CARGO_PKG_VERSION"),
        scenario_sha256: &s.hash,
        baseline_lole_h: s.study.baseline().into(),
        n_points: points,
        tol_mw: tol,
        tol_risk_h: s.study.tol_risk(),
        body,
    }
}

fn write_curve(out: &Path, s: &Loaded, r: &CurveResult, points: usize, tol: f64) -> Result<()> {
    let side = sidecar_path(out)?;
    let mut csv = format!("# scenario_sha256={}\nl_a_mw,l_b_mw,binding\n", s.hash);
    for p in &r.curve.points {
        csv.push_str(&format!("{:.3},{:.3},{}\n", p.l_a, p.l_b, p.binding.name()));
    }
    write_text(out, &csv)?;
    write_json(&side, &sidecar(s, points, tol, CurveOut::new(r, false)))?;
    println!(
        "{}: {} points, max-sum optimum ({:.1}, {:.1}) MW -> {}",
        r.curve.policy,
        r.curve.points.len(),
        r.optimum.l_a,
        r.optimum.l_b,
        out.display()
    );
    Ok(())
}

fn write_bundle(out: &Path, s: &Loaded, curves: &[CurveResult], points: usize, tol: f64) -> Result<()> {
    let side = sidecar_path(out)?;
    let mut csv = format!(
        "# scenario_sha256={}\npolicy,capacity_mw,l_a_mw,l_b_mw,binding\n",
        s.hash
    );
    for r in curves {
        ensure!(r.curve.points.contains(&r.optimum), "optimum is not a curve point");
        let cap = r.curve.interconnection.max_capacity_mw();
        for p in &r.curve.points {
            csv.push_str(&format!(
                "{},{:.0},{:.3},{:.3},{}\n",
                r.curve.policy,
                cap,
                p.l_a,
                p.l_b,
                p.binding.name()
            ));
        }
        println!(
            "{} @ {:.0} MW: max-sum optimum ({:.1}, {:.1}) MW",
            r.curve.policy, cap, r.optimum.l_a, r.optimum.l_b
        );
    }
    write_text(out, &csv)?;
    #[derive(Serialize)]
    struct Bundle<'a> {
        curves: Vec<CurveOut<'a>>,
    }
    let bundle = Bundle {
        curves: curves.iter().map(|r| CurveOut::new(r, true)).collect(),
    };
    write_json(&side, &sidecar(s, points, tol, bundle))?;
    println!("wrote {} curves to {}", curves.len(), out.display());
    Ok(())
}
