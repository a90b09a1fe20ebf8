//! Sizing each isolated system to a LOLE standard.
//!
//! Calibration works on one system at a time without interconnection, so only
//! the system's own marginals matter: the isolated margin is
//! `G_n + W - D - offset`, with `G_n` the sum of `n` independent generator
//! sets. The LOLE is evaluated under the same cell-density reading as the
//! joint engine, which makes a calibrated system reproduce the target when the
//! full joint margin is later assembled.

use crate::fleet::GeneratorSet;
use crate::gridpmf::{convolve1, Pmf1};
use crate::{Error, Result, HOURS_PER_YEAR};

pub const DEFAULT_MAX_SETS: u32 = 500;
pub const DEFAULT_TOL: f64 = 1e-3;
pub const MAX_BISECTIONS: usize = 60;

/// LOLE values this close to the target count as equal, not below it.
const TARGET_SLACK: f64 = 1e-9;

/// Mass trimmed from the fleet tails while growing a portfolio.
const FLEET_TRIM: f64 = 1e-16;

/// One system's non-dispatchable part of the margin, `W - D`, on the joint
/// grid.
#[derive(Debug, Clone)]
pub struct IsolatedSystem {
    pub set: GeneratorSet,
    /// Grid step used to build generator pmfs; must divide every unit size.
    pub fleet_step: f64,
    residual: Pmf1,
}

impl IsolatedSystem {
    pub fn new(set: GeneratorSet, fleet_step: f64, wind: &Pmf1, demand: &Pmf1) -> Result<Self> {
        set.validate()?;
        let residual = convolve1(wind, &demand.reflect())?;
        Ok(Self {
            set,
            fleet_step,
            residual,
        })
    }

    pub fn residual(&self) -> &Pmf1 {
        &self.residual
    }

    fn joint_step(&self) -> f64 {
        self.residual.step()
    }

    /// Available-capacity pmf of `n_sets` sets on the fleet grid.
    pub fn fleet(&self, n_sets: u32) -> Result<Pmf1> {
        if n_sets == 0 {
            return Err(Error::input("a fleet needs at least one generator set"));
        }
        let set = self.set.pmf(self.fleet_step)?;
        let mut acc = set.clone();
        for _ in 1..n_sets {
            acc = convolve1(&acc, &set)?.trim(FLEET_TRIM);
        }
        Ok(acc)
    }

    /// Isolated margin before any load offset.
    pub fn margin(&self, fleet: &Pmf1) -> Result<Pmf1> {
        convolve1(&fleet.regrid(self.joint_step())?, &self.residual)
    }

    pub fn lole(&self, n_sets: u32, load_offset_mw: f64) -> Result<f64> {
        Ok(margin_lole(&self.margin(&self.fleet(n_sets)?)?, load_offset_mw))
    }
}

/// `h * P(M - offset <= 0)` under the cell density.
pub fn margin_lole(margin: &Pmf1, load_offset_mw: f64) -> f64 {
    HOURS_PER_YEAR * margin.cell_cdf(load_offset_mw)
}

/// Outcome of growing a portfolio set by set.
#[derive(Debug, Clone)]
pub struct Portfolio {
    pub n_sets: u32,
    /// Isolated LOLE with `n_sets` sets.
    pub lole: f64,
    /// Isolated LOLE with one set fewer (`None` for a single set).
    pub lole_one_fewer: Option<f64>,
    /// Isolated margin with `n_sets` sets, before any load offset.
    pub margin: Pmf1,
}

/// Smallest number of sets whose isolated LOLE is strictly below `target`
/// (by more than rounding noise).
pub fn build_portfolio(sys: &IsolatedSystem, target: f64, max_sets: u32) -> Result<Portfolio> {
    if !(target > 0.0) {
        return Err(Error::input(format!("LOLE target must be positive, got {target}")));
    }
    let set = sys.set.pmf(sys.fleet_step)?;
    let mut fleet = set.clone();
    let mut previous: Option<f64> = None;
    for n in 1..=max_sets.max(1) {
        if n > 1 {
            fleet = convolve1(&fleet, &set)?.trim(FLEET_TRIM);
        }
        let margin = sys.margin(&fleet)?;
        let lole = margin_lole(&margin, 0.0);
        log::debug!("{n} sets: LOLE {lole:.6} h/yr");
        if let Some(prev) = previous {
            if lole > prev + 1e-9 {
                return Err(Error::Infeasible(format!(
                    "LOLE rose from {prev} to {lole} h/yr when adding set {n}"
                )));
            }
        }
        if lole < target - TARGET_SLACK {
            if let Some(prev) = previous {
                if prev < target - TARGET_SLACK {
                    return Err(Error::Infeasible(format!("{} sets already met the target", n - 1)));
                }
            }
            return Ok(Portfolio {
                n_sets: n,
                lole,
                lole_one_fewer: previous,
                margin,
            });
        }
        previous = Some(lole);
    }
    Err(Error::Infeasible(format!(
        "LOLE target {target} h/yr not reached within {max_sets} generator sets (LOLE {:.4} h/yr at the cap)",
        previous.unwrap_or(f64::NAN)
    )))
}

/// Constant load offset bringing the isolated LOLE up to `target` within
/// `tol`, found by bisection on `[0, one set capacity]`.
pub fn solve_load_offset(margin: &Pmf1, target: f64, tol: f64, max_offset_mw: f64) -> Result<f64> {
    let f = |x: f64| margin_lole(margin, x);
    let (mut lo, mut hi) = (0.0, max_offset_mw);
    let (mut f_lo, mut f_hi) = (f(lo), f(hi));
    if (f_lo - target).abs() <= tol {
        return Ok(0.0);
    }
    if f_lo > target || f_hi < target - tol {
        return Err(Error::Bracket(format!(
            "LOLE at offset 0 is {f_lo:.6} and at {max_offset_mw} MW is {f_hi:.6}; target {target} h/yr is not bracketed"
        )));
    }
    if (f_hi - target).abs() <= tol {
        return Ok(hi);
    }
    for _ in 0..MAX_BISECTIONS {
        let mid = 0.5 * (lo + hi);
        let f_mid = f(mid);
        if f_mid < f_lo - 1e-12 || f_mid > f_hi + 1e-12 {
            return Err(Error::Bracket(format!(
                "LOLE not monotone in the offset: {f_lo} at {lo}, {f_mid} at {mid}, {f_hi} at {hi}"
            )));
        }
        if (f_mid - target).abs() <= tol {
            return Ok(mid);
        }
        if f_mid < target {
            (lo, f_lo) = (mid, f_mid);
        } else {
            (hi, f_hi) = (mid, f_mid);
        }
    }
    Err(Error::Bracket(format!(
        "offset search did not converge within {MAX_BISECTIONS} steps (bracket [{lo}, {hi}] MW, LOLE [{f_lo}, {f_hi}])"
    )))
}

/// Calibrated portfolio of one system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Calibration {
    pub n_sets: u32,
    pub load_offset_mw: f64,
    /// Isolated LOLE after the offset is applied.
    pub lole: f64,
}

pub fn calibrate(sys: &IsolatedSystem, target: f64, tol: f64, max_sets: u32) -> Result<Calibration> {
    let p = build_portfolio(sys, target, max_sets)?;
    let offset = solve_load_offset(&p.margin, target, tol, sys.set.capacity_mw())?;
    Ok(Calibration {
        n_sets: p.n_sets,
        load_offset_mw: offset,
        lole: margin_lole(&p.margin, offset),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fleet::UnitClass;
    use approx::assert_abs_diff_eq;

    fn one_unit_system(demand: f64) -> IsolatedSystem {
        let set = GeneratorSet::new(vec![UnitClass::new(100.0, 0.9, 1).unwrap()]).unwrap();
        let wind = Pmf1::delta(0.0, 10.0).unwrap();
        let d = Pmf1::delta(demand, 10.0).unwrap();
        IsolatedSystem::new(set, 10.0, &wind, &d).unwrap()
    }

    #[test]
    fn two_state_unit_needs_two_sets() {
        let sys = one_unit_system(90.0);
        let p = build_portfolio(&sys, 876.0, 10).unwrap();
        assert_eq!(p.n_sets, 2);
        assert_abs_diff_eq!(p.lole, 87.6, epsilon = 1e-9);
        assert_abs_diff_eq!(p.lole_one_fewer.unwrap(), 876.0, epsilon = 1e-9);
    }

    #[test]
    fn vacuous_target_takes_one_set() {
        let sys = one_unit_system(90.0);
        assert_eq!(build_portfolio(&sys, 8760.0, 10).unwrap().n_sets, 1);
    }

    #[test]
    fn cap_is_enforced() {
        let sys = one_unit_system(90.0);
        let err = build_portfolio(&sys, 1e-12, 3).unwrap_err();
        assert!(matches!(err, Error::Infeasible(_)));
    }

    #[test]
    fn offset_zero_when_already_at_target() {
        let sys = one_unit_system(90.0);
        let margin = sys.margin(&sys.fleet(1).unwrap()).unwrap();
        assert_eq!(solve_load_offset(&margin, 876.0, 1e-3, 100.0).unwrap(), 0.0);
    }

    #[test]
    fn offset_reproduces_target() {
        let sys = one_unit_system(90.0);
        let margin = sys.margin(&sys.fleet(2).unwrap()).unwrap();
        let x = solve_load_offset(&margin, 300.0, 1e-3, 100.0).unwrap();
        assert!((margin_lole(&margin, x) - 300.0).abs() <= 1e-3);
        assert!(x > 0.0);
    }

    #[test]
    fn unbracketed_target_rejected() {
        let sys = one_unit_system(90.0);
        let margin = sys.margin(&sys.fleet(2).unwrap()).unwrap();
        assert!(matches!(
            solve_load_offset(&margin, 80.0, 1e-3, 100.0),
            Err(Error::Bracket(_))
        ));
    }
}
