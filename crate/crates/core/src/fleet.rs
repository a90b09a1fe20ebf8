//! Two-state dispatchable generation.

use serde::{Deserialize, Serialize};

use crate::gridpmf::{convolve1, Pmf1};
use crate::{Error, Result};

/// `count` identical units of `capacity` MW, each independently available
/// with probability `availability`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UnitClass {
    pub capacity_mw: f64,
    pub availability: f64,
    pub count: u32,
}

impl UnitClass {
    pub fn new(capacity_mw: f64, availability: f64, count: u32) -> Result<Self> {
        let u = Self {
            capacity_mw,
            availability,
            count,
        };
        u.validate()?;
        Ok(u)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.capacity_mw > 0.0 && self.capacity_mw.is_finite()) {
            return Err(Error::input(format!(
                "unit capacity must be positive, got {}",
                self.capacity_mw
            )));
        }
        if !(0.0..=1.0).contains(&self.availability) {
            return Err(Error::input(format!(
                "unit availability must lie in [0, 1], got {}",
                self.availability
            )));
        }
        Ok(())
    }
}

/// A characteristic set of units added to a portfolio as one block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct GeneratorSet(pub Vec<UnitClass>);

impl GeneratorSet {
    pub fn new(units: Vec<UnitClass>) -> Result<Self> {
        let set = Self(units);
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.0.iter().all(|u| u.count == 0) {
            return Err(Error::input("generator set has no units"));
        }
        self.0.iter().try_for_each(UnitClass::validate)
    }

    pub fn units(&self) -> &[UnitClass] {
        &self.0
    }

    pub fn capacity_mw(&self) -> f64 {
        self.0.iter().map(|u| u.capacity_mw * f64::from(u.count)).sum()
    }

    pub fn expected_available_mw(&self) -> f64 {
        self.0
            .iter()
            .map(|u| u.capacity_mw * u.availability * f64::from(u.count))
            .sum()
    }

    /// GB-like set: 1200, 2x600, 2x300, 150, 80, 2x20, 3x10 MW.
    pub fn gb(availability: f64) -> Self {
        Self::from_sizes(
            &[
                (1200.0, 1),
                (600.0, 2),
                (300.0, 2),
                (150.0, 1),
                (80.0, 1),
                (20.0, 2),
                (10.0, 3),
            ],
            availability,
        )
    }

    /// FR-like set: 2x1200, 600, 300, 150, 80, 2x20, 3x10 MW.
    pub fn fr(availability: f64) -> Self {
        Self::from_sizes(
            &[
                (1200.0, 2),
                (600.0, 1),
                (300.0, 1),
                (150.0, 1),
                (80.0, 1),
                (20.0, 2),
                (10.0, 3),
            ],
            availability,
        )
    }

    fn from_sizes(sizes: &[(f64, u32)], availability: f64) -> Self {
        Self(
            sizes
                .iter()
                .map(|&(capacity_mw, count)| UnitClass {
                    capacity_mw,
                    availability,
                    count,
                })
                .collect(),
        )
    }

    /// Available-capacity pmf of one set.
    pub fn pmf(&self, grid_step: f64) -> Result<Pmf1> {
        self.validate()?;
        let mut acc = Pmf1::delta(0.0, grid_step)?;
        for u in &self.0 {
            let cells = u.capacity_mw / grid_step;
            if (cells - cells.round()).abs() > 1e-9 {
                return Err(Error::input(format!(
                    "unit capacity {} MW is not a multiple of the {grid_step} MW grid; choose a grid step that divides every unit size",
                    u.capacity_mw
                )));
            }
            let mut masses = vec![0.0; cells.round() as usize + 1];
            masses[0] = 1.0 - u.availability;
            *masses.last_mut().unwrap() += u.availability;
            let unit = Pmf1::new(0.0, grid_step, masses)?;
            for _ in 0..u.count {
                acc = convolve1(&acc, &unit)?;
            }
        }
        Ok(acc)
    }
}

/// A system's dispatchable portfolio: `n_sets` copies of one generator set,
/// plus the constant load offset found by calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct FleetSpec {
    pub generator_set: GeneratorSet,
    pub n_sets: u32,
    pub load_offset_mw: f64,
}

impl FleetSpec {
    pub fn new(generator_set: GeneratorSet, n_sets: u32, load_offset_mw: f64) -> Result<Self> {
        if n_sets == 0 {
            return Err(Error::input("a fleet needs at least one generator set"));
        }
        generator_set.validate()?;
        Ok(Self {
            generator_set,
            n_sets,
            load_offset_mw,
        })
    }

    pub fn capacity_mw(&self) -> f64 {
        self.generator_set.capacity_mw() * f64::from(self.n_sets)
    }
}

/// Distribution of total available capacity across all units of the fleet.
pub fn fleet_pmf(fleet: &FleetSpec, grid_step: f64) -> Result<Pmf1> {
    let set = fleet.generator_set.pmf(grid_step)?;
    repeat_sets(&set, fleet.n_sets)
}

/// `set` convolved with itself `n` times (`n >= 1`).
pub(crate) fn repeat_sets(set: &Pmf1, n: u32) -> Result<Pmf1> {
    let mut acc = set.clone();
    for _ in 1..n {
        acc = convolve1(&acc, set)?;
    }
    Ok(acc)
}
