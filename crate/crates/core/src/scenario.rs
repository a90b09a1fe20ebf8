//! Two-system study definitions and their preparation into a [`Study`].
//!
//! A scenario is a JSON document. Unknown keys are rejected. Data file paths
//! are resolved relative to the scenario file.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::allocation::{Study, DEFAULT_POINTS, DEFAULT_TOL_MW, DEFAULT_TOL_RISK};
use crate::calibration::{calibrate, Calibration, IsolatedSystem, DEFAULT_MAX_SETS, DEFAULT_TOL};
use crate::fleet::{GeneratorSet, UnitClass};
use crate::gridpmf::{Pmf1, Pmf2};
use crate::risk_engine::{binomial_lines, build_margin, CapacityLevel, InterconnectionSpec};
use crate::weather_demand::{
    joint_demand_pmf, joint_wind_from_series, joint_wind_pmf, read_demand_csv, read_wind_csv, synth_series,
    wind_power_pmf, CopulaSpec, DemandProfile, HourlySeries, SeriesProfile, WindProfile,
};
use crate::{Error, Result};

/// Mass trimmed from each generation tail before the joint convolution.
const GENERATION_TRIM: f64 = 1e-15;

/// Either the literal string `"auto"` or a value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum AutoOr<T> {
    Value(T),
    Auto(Auto),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Auto {
    Auto,
}

impl<T: Copy> AutoOr<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            AutoOr::Value(v) => Some(*v),
            AutoOr::Auto(_) => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitConfig {
    pub capacity_mw: u32,
    pub availability: f64,
    pub count: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub name: String,
    /// Units making up one generator set.
    pub generator_set: Vec<UnitConfig>,
    pub n_sets: AutoOr<u32>,
    pub load_offset_mw: AutoOr<f64>,
    pub wind_installed_mw: u32,
}

impl SystemConfig {
    pub fn generator_set(&self) -> Result<GeneratorSet> {
        GeneratorSet::new(
            self.generator_set
                .iter()
                .map(|u| UnitClass::new(f64::from(u.capacity_mw), u.availability, u.count))
                .collect::<Result<_>>()?,
        )
    }

    pub fn is_calibrated(&self) -> bool {
        self.n_sets.value().is_some() && self.load_offset_mw.value().is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataConfig {
    /// Columns `timestamp,demand_a_mw,demand_b_mw`.
    pub demand_csv: PathBuf,
    /// Columns `timestamp,cf_a` or `timestamp,cf_a,cf_b`.
    pub wind_csv: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum InterconnectionConfig {
    Lines {
        n_lines: u32,
        per_line_mw: u32,
        availability: f64,
    },
    Levels {
        levels: Vec<LevelConfig>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevelConfig {
    pub capacity_mw: u32,
    pub probability: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    /// Step of the generator pmfs; must divide every unit size.
    pub fleet_step_mw: u32,
    /// Step of every joint (two-system) pmf.
    pub joint_step_mw: u32,
}

impl Default for GridConfig {
    fn default() -> Self {
        Self {
            fleet_step_mw: 10,
            joint_step_mw: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CalibrationConfig {
    pub tol_h: f64,
    pub max_sets: u32,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            tol_h: DEFAULT_TOL,
            max_sets: DEFAULT_MAX_SETS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceConfig {
    pub n_points: usize,
    pub tol_mw: f64,
    pub tol_risk_h: f64,
}

impl Default for TraceConfig {
    fn default() -> Self {
        Self {
            n_points: DEFAULT_POINTS,
            tol_mw: DEFAULT_TOL_MW,
            tol_risk_h: DEFAULT_TOL_RISK,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub system_a: SystemConfig,
    pub system_b: SystemConfig,
    pub data: DataConfig,
    /// Factor applied to system B demand as read.
    pub demand_scale_b: f64,
    pub copula_rho: f64,
    pub interconnection: InterconnectionConfig,
    /// LOLE standard both systems are calibrated to, in h/yr.
    pub risk_standard_h: f64,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default)]
    pub calibration: CalibrationConfig,
    #[serde(default)]
    pub trace: TraceConfig,
}

fn check(cond: bool, msg: impl FnOnce() -> String) -> Result<()> {
    if cond {
        Ok(())
    } else {
        Err(Error::input(msg()))
    }
}

impl ScenarioSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        let spec: Self = serde_json::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|source| Error::Io {
            path: path.display().to_string(),
            source,
        })
    }

    pub fn validate(&self) -> Result<()> {
        for sys in [&self.system_a, &self.system_b] {
            sys.generator_set()?;
            check(sys.n_sets.value() != Some(0), || {
                format!("{}: n_sets must be at least 1", sys.name)
            })?;
            if let Some(x) = sys.load_offset_mw.value() {
                check(x.is_finite() && x >= 0.0, || {
                    format!("{}: load offset must be nonnegative", sys.name)
                })?;
            }
            check(sys.wind_installed_mw > 0, || {
                format!("{}: installed wind must be positive", sys.name)
            })?;
        }
        check(self.demand_scale_b > 0.0 && self.demand_scale_b.is_finite(), || {
            format!("demand_scale_b must be positive, got {}", self.demand_scale_b)
        })?;
        CopulaSpec::new(self.copula_rho)?;
        self.interconnection_spec(None)?;
        check(
            self.risk_standard_h > 0.0 && self.risk_standard_h <= crate::HOURS_PER_YEAR,
            || format!("risk standard must lie in (0, 8760] h/yr, got {}", self.risk_standard_h),
        )?;
        check(self.grid.fleet_step_mw > 0 && self.grid.joint_step_mw > 0, || {
            "grid steps must be positive".into()
        })?;
        check(self.calibration.tol_h > 0.0, || {
            "calibration tolerance must be positive".into()
        })?;
        check(self.calibration.max_sets >= 1, || "max_sets must be at least 1".into())?;
        check(self.trace.n_points >= 2, || "trace needs at least two points".into())?;
        check(self.trace.tol_mw > 0.0, || "trace tol_mw must be positive".into())?;
        check(self.trace.tol_risk_h >= 0.0, || {
            "trace tol_risk_h must be nonnegative".into()
        })?;
        Ok(())
    }

    pub fn is_calibrated(&self) -> bool {
        self.system_a.is_calibrated() && self.system_b.is_calibrated()
    }

    /// Interconnection levels, optionally rescaled to a total capacity of
    /// `capacity_mw`. Line configurations split the total evenly over the
    /// lines; explicit level lists are scaled proportionally.
    pub fn interconnection_spec(&self, capacity_mw: Option<f64>) -> Result<InterconnectionSpec> {
        match &self.interconnection {
            InterconnectionConfig::Lines {
                n_lines,
                per_line_mw,
                availability,
            } => {
                let per_line = match capacity_mw {
                    None => f64::from(*per_line_mw),
                    Some(c) if *n_lines > 0 => c / f64::from(*n_lines),
                    Some(0.0) => 0.0,
                    Some(_) => {
                        return Err(Error::input(
                            "cannot set a capacity on an interconnection with no lines",
                        ))
                    }
                };
                binomial_lines(*n_lines, per_line, *availability)
            }
            InterconnectionConfig::Levels { levels } => {
                let spec = InterconnectionSpec::new(
                    levels
                        .iter()
                        .map(|l| CapacityLevel {
                            capacity_mw: f64::from(l.capacity_mw),
                            probability: l.probability,
                        })
                        .collect(),
                )?;
                match capacity_mw {
                    None => Ok(spec),
                    Some(c) if spec.max_capacity_mw() > 0.0 => spec.scaled(c / spec.max_capacity_mw()),
                    Some(0.0) => Ok(spec),
                    Some(_) => Err(Error::input(
                        "cannot rescale an interconnection whose levels are all 0 MW",
                    )),
                }
            }
        }
    }
}

/// Hourly series feeding a scenario.
#[derive(Debug, Clone)]
pub struct ScenarioSeries {
    pub demand_a: HourlySeries,
    pub demand_b: HourlySeries,
    pub cf_a: HourlySeries,
    pub cf_b: Option<HourlySeries>,
}

impl ScenarioSeries {
    pub fn read(spec: &ScenarioSpec, base_dir: &Path) -> Result<Self> {
        let (demand_a, demand_b) = read_demand_csv(&base_dir.join(&spec.data.demand_csv))?;
        let (cf_a, cf_b) = read_wind_csv(&base_dir.join(&spec.data.wind_csv))?;
        Ok(Self {
            demand_a,
            demand_b,
            cf_a,
            cf_b,
        })
    }

    /// Synthetic GB-like / FR-like demand and a single wind capacity-factor
    /// series, all deterministic in `seed`.
    pub fn synthetic(seed: u64, hours: usize) -> Result<Self> {
        Ok(Self {
            demand_a: synth_series(seed, hours, &SeriesProfile::Demand(DemandProfile::gb_like()))?,
            demand_b: synth_series(
                seed.wrapping_add(1),
                hours,
                &SeriesProfile::Demand(DemandProfile::fr_like()),
            )?,
            cf_a: synth_series(
                seed.wrapping_add(2),
                hours,
                &SeriesProfile::Wind(WindProfile::gb_like()),
            )?,
            cf_b: None,
        })
    }
}

/// Distributions derived from a scenario, before generation is added.
#[derive(Debug, Clone)]
pub struct ScenarioInputs {
    pub demand: Pmf2,
    pub wind: Pmf2,
    pub system_a: IsolatedSystem,
    pub system_b: IsolatedSystem,
}

impl ScenarioInputs {
    pub fn new(spec: &ScenarioSpec, series: &ScenarioSeries) -> Result<Self> {
        let step = f64::from(spec.grid.joint_step_mw);
        let fleet_step = f64::from(spec.grid.fleet_step_mw);
        let demand = joint_demand_pmf(&series.demand_a, &series.demand_b, spec.demand_scale_b, step)?;
        if series.cf_a.timestamps != series.demand_a.timestamps {
            log::info!("wind and demand series cover different hours; they are treated as independent");
        }
        let installed = (
            f64::from(spec.system_a.wind_installed_mw),
            f64::from(spec.system_b.wind_installed_mw),
        );
        let wind = match &series.cf_b {
            Some(cf_b) => joint_wind_from_series(&series.cf_a, cf_b, installed, step)?,
            None => {
                let marginal = wind_power_pmf(&series.cf_a, installed.0, step)?;
                joint_wind_pmf(&marginal, CopulaSpec::new(spec.copula_rho)?, installed)?
            }
        };
        let system_a = IsolatedSystem::new(
            spec.system_a.generator_set()?,
            fleet_step,
            &wind.marginal_a(),
            &demand.marginal_a(),
        )?;
        let system_b = IsolatedSystem::new(
            spec.system_b.generator_set()?,
            fleet_step,
            &wind.marginal_b(),
            &demand.marginal_b(),
        )?;
        Ok(Self {
            demand,
            wind,
            system_a,
            system_b,
        })
    }

    pub fn load(spec: &ScenarioSpec, scenario_path: &Path) -> Result<Self> {
        let base = scenario_path.parent().unwrap_or(Path::new("."));
        Self::new(spec, &ScenarioSeries::read(spec, base)?)
    }
}

/// Resolves every `"auto"` portfolio field of `spec`, keeping explicit values.
/// Systems with an explicit set count but automatic offset only get the
/// offset solved.
pub fn calibrate_scenario(spec: &mut ScenarioSpec, inputs: &ScenarioInputs) -> Result<(Calibration, Calibration)> {
    let target = spec.risk_standard_h;
    let cal = spec.calibration;
    let (a, b) = rayon::join(
        {
            let mut cfg = spec.system_a.clone();
            move || resolve_system(&mut cfg, &inputs.system_a, target, cal).map(|c| (c, cfg))
        },
        {
            let mut cfg = spec.system_b.clone();
            move || resolve_system(&mut cfg, &inputs.system_b, target, cal).map(|c| (c, cfg))
        },
    );
    let ((ca, cfg_a), (cb, cfg_b)) = (a?, b?);
    spec.system_a = cfg_a;
    spec.system_b = cfg_b;
    Ok((ca, cb))
}

fn resolve_system(
    cfg: &mut SystemConfig,
    sys: &IsolatedSystem,
    target: f64,
    cal: CalibrationConfig,
) -> Result<Calibration> {
    let c = match (cfg.n_sets.value(), cfg.load_offset_mw.value()) {
        (Some(n), Some(off)) => Calibration {
            n_sets: n,
            load_offset_mw: off,
            lole: sys.lole(n, off)?,
        },
        (Some(n), None) => {
            let margin = sys.margin(&sys.fleet(n)?)?;
            let off = crate::calibration::solve_load_offset(&margin, target, cal.tol_h, sys.set.capacity_mw())?;
            Calibration {
                n_sets: n,
                load_offset_mw: off,
                lole: crate::calibration::margin_lole(&margin, off),
            }
        }
        (None, _) => calibrate(sys, target, cal.tol_h, cal.max_sets)?,
    };
    cfg.n_sets = AutoOr::Value(c.n_sets);
    cfg.load_offset_mw = AutoOr::Value(c.load_offset_mw);
    Ok(c)
}

/// Generation pmf of a calibrated system on the joint grid.
fn generation(sys: &IsolatedSystem, n_sets: u32, step: f64) -> Result<Pmf1> {
    Ok(sys.fleet(n_sets)?.regrid(step)?.trim(GENERATION_TRIM))
}

/// Builds the joint margin and the study for a calibrated scenario.
pub fn prepare_study(spec: &ScenarioSpec, inputs: &ScenarioInputs) -> Result<Study> {
    let resolved = |cfg: &SystemConfig| -> Result<(u32, f64)> {
        match (cfg.n_sets.value(), cfg.load_offset_mw.value()) {
            (Some(n), Some(off)) => Ok((n, off)),
            _ => Err(Error::input(format!(
                "system {} is not calibrated (n_sets or load_offset_mw is \"auto\"); run `tiecap calibrate` first",
                cfg.name
            ))),
        }
    };
    let (na, off_a) = resolved(&spec.system_a)?;
    let (nb, off_b) = resolved(&spec.system_b)?;
    let step = f64::from(spec.grid.joint_step_mw);
    let (ga, gb) = rayon::join(
        || generation(&inputs.system_a, na, step),
        || generation(&inputs.system_b, nb, step),
    );
    let margin = build_margin(&ga?, &gb?, &inputs.wind, &inputs.demand, (off_a, off_b))?;
    log::info!("joint margin grid {:?} cells", margin.pmf().shape());
    Ok(Study::new(Arc::new(margin), spec.interconnection_spec(None)?).with_tol_risk(spec.trace.tol_risk_h))
}

/// A GB/FR-like scenario: the characteristic unit sets at 90% availability,
/// 13 GW / 15 GW of wind coupled with rho = 0.5376, system B demand scaled by
/// 1.5, four 750 MW lines at 95% and a 3 h/yr standard. Portfolios are left
/// on `"auto"`.
pub fn gb_fr_like(data: DataConfig) -> ScenarioSpec {
    let units = |set: GeneratorSet| {
        set.units()
            .iter()
            .map(|u| UnitConfig {
                capacity_mw: u.capacity_mw as u32,
                availability: u.availability,
                count: u.count,
            })
            .collect()
    };
    let system = |name: &str, set, wind| SystemConfig {
        name: name.into(),
        generator_set: units(set),
        n_sets: AutoOr::Auto(Auto::Auto),
        load_offset_mw: AutoOr::Auto(Auto::Auto),
        wind_installed_mw: wind,
    };
    ScenarioSpec {
        system_a: system("GB", GeneratorSet::gb(0.9), 13_000),
        system_b: system("FR", GeneratorSet::fr(0.9), 15_000),
        data,
        demand_scale_b: 1.5,
        copula_rho: 0.5376,
        interconnection: InterconnectionConfig::Lines {
            n_lines: 4,
            per_line_mw: 750,
            availability: 0.95,
        },
        risk_standard_h: 3.0,
        grid: GridConfig::default(),
        calibration: CalibrationConfig::default(),
        trace: TraceConfig::default(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> ScenarioSpec {
        gb_fr_like(DataConfig {
            demand_csv: "demand.csv".into(),
            wind_csv: "wind.csv".into(),
        })
    }

    #[test]
    fn json_round_trip() {
        let s = spec();
        let text = s.to_json().unwrap();
        assert!(text.contains("\"n_sets\": \"auto\""));
        assert_eq!(ScenarioSpec::from_json(&text).unwrap(), s);
    }

    #[test]
    fn unknown_keys_rejected() {
        let mut v: serde_json::Value = serde_json::from_str(&spec().to_json().unwrap()).unwrap();
        v["copula_rhoo"] = serde_json::json!(0.5);
        assert!(ScenarioSpec::from_json(&v.to_string()).is_err());
        let mut v: serde_json::Value = serde_json::from_str(&spec().to_json().unwrap()).unwrap();
        v["system_a"]["n_sets"] = serde_json::json!("automatic");
        assert!(ScenarioSpec::from_json(&v.to_string()).is_err());
    }

    #[test]
    fn invalid_ranges_rejected() {
        let mut s = spec();
        s.copula_rho = 1.2;
        assert!(s.validate().is_err());
        let mut s = spec();
        s.trace.n_points = 1;
        assert!(s.validate().is_err());
    }

    #[test]
    fn capacity_override() {
        let s = spec();
        let ic = s.interconnection_spec(Some(5000.0)).unwrap();
        assert_eq!(ic.levels().len(), 5);
        assert_eq!(ic.max_capacity_mw(), 5000.0);
        let mut s = spec();
        s.interconnection = InterconnectionConfig::Levels {
            levels: vec![
                LevelConfig {
                    capacity_mw: 0,
                    probability: 0.1,
                },
                LevelConfig {
                    capacity_mw: 2000,
                    probability: 0.9,
                },
            ],
        };
        let ic = s.interconnection_spec(Some(3000.0)).unwrap();
        assert_eq!(ic.levels()[1].capacity_mw, 3000.0);
        assert_eq!(s.interconnection_spec(Some(0.0)).unwrap().max_capacity_mw(), 0.0);
    }

    #[test]
    fn uncalibrated_study_refused() {
        let s = spec();
        let series = ScenarioSeries::synthetic(1, 24 * 30).unwrap();
        let inputs = ScenarioInputs::new(&s, &series).unwrap();
        let err = prepare_study(&s, &inputs).unwrap_err().to_string();
        assert!(err.contains("calibrate"));
    }
}
