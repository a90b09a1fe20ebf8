//! Acceptable load additions and the capacity allocation curve.
//!
//! A pair of load additions `l = (l_a, l_b)` is acceptable when neither
//! system's interconnected LOLE exceeds its isolated LOLE. Adding load never
//! improves security, so acceptability is monotone in each component and the
//! frontier can be traced by bisection.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::risk_engine::{
    adjusted_risk_for, baseline_risk, InterconnectionSpec, MarginDist, Policy, RiskResult, System,
};
use crate::{Error, Result};

pub const DEFAULT_TOL_MW: f64 = 1.0;
pub const DEFAULT_TOL_RISK: f64 = 1e-6;
pub const DEFAULT_POINTS: usize = 61;

/// Doublings allowed when the initial upper bracket is still acceptable.
const BRACKET_DOUBLINGS: usize = 40;

/// Margin, interconnection and baseline risks of a two-system study.
#[derive(Debug, Clone)]
pub struct Study {
    margin: Arc<MarginDist>,
    interconnection: InterconnectionSpec,
    baseline: RiskResult,
    tol_risk: f64,
}

impl Study {
    pub fn new(margin: Arc<MarginDist>, interconnection: InterconnectionSpec) -> Self {
        let baseline = baseline_risk(&margin);
        Self {
            margin,
            interconnection,
            baseline,
            tol_risk: DEFAULT_TOL_RISK,
        }
    }

    pub fn with_tol_risk(mut self, tol_risk: f64) -> Self {
        self.tol_risk = tol_risk;
        self
    }

    /// Same margin and baseline with a different interconnection.
    pub fn with_interconnection(&self, interconnection: InterconnectionSpec) -> Self {
        Self {
            interconnection,
            ..self.clone()
        }
    }

    /// The study with system labels exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            margin: Arc::new(self.margin.swapped()),
            interconnection: self.interconnection.clone(),
            baseline: RiskResult {
                r_a: self.baseline.r_b,
                r_b: self.baseline.r_a,
            },
            tol_risk: self.tol_risk,
        }
    }

    pub fn margin(&self) -> &MarginDist {
        &self.margin
    }

    pub fn interconnection(&self) -> &InterconnectionSpec {
        &self.interconnection
    }

    pub fn baseline(&self) -> RiskResult {
        self.baseline
    }

    pub fn tol_risk(&self) -> f64 {
        self.tol_risk
    }

    /// Headroom `r0 + tol - r+` of one system; negative when violated.
    pub fn slack(&self, l: (f64, f64), policy: Policy, system: System) -> f64 {
        self.baseline.get(system) + self.tol_risk
            - adjusted_risk_for(&self.margin, l, &self.interconnection, policy, system)
    }

    fn system_ok(&self, l: (f64, f64), policy: Policy, system: System) -> bool {
        self.slack(l, policy, system) >= 0.0
    }

    /// Load additions larger than these along one axis are never acceptable.
    fn upper_bracket(&self) -> (f64, f64) {
        let (hi_a, hi_b) = self.margin.support_max();
        let pad = self.interconnection.max_capacity_mw() + self.margin.step();
        ((hi_a + pad).max(pad), (hi_b + pad).max(pad))
    }
}

/// Both interconnected risks stay within the isolated risks.
pub fn acceptable(study: &Study, l: (f64, f64), policy: Policy) -> bool {
    study.system_ok(l, policy, System::A) && study.system_ok(l, policy, System::B)
}

/// Largest `x` in `[lo, ...)` with `pred(x)`, to within `tol`, assuming
/// `pred(lo)` holds and `pred` is monotone.
fn bisect_max(pred: impl Fn(f64) -> bool, lo: f64, hi: f64, tol: f64) -> Result<f64> {
    let (mut lo, mut hi) = (lo, hi);
    let mut doublings = 0;
    while pred(hi) {
        if doublings == BRACKET_DOUBLINGS {
            return Err(Error::Bracket(format!(
                "load still acceptable at {hi} MW after widening the bracket"
            )));
        }
        lo = hi;
        hi = 2.0 * hi + tol;
        doublings += 1;
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        if pred(mid) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest nonnegative `l_b` such that `(l_a, l_b)` is acceptable, within
/// `tol_mw`; `None` if `(l_a, 0)` is already unacceptable.
pub fn max_lb(study: &Study, l_a: f64, policy: Policy, tol_mw: f64) -> Result<Option<f64>> {
    if !acceptable(study, (l_a, 0.0), policy) {
        return Ok(None);
    }
    let hi = study.upper_bracket().1;
    bisect_max(|l_b| acceptable(study, (l_a, l_b), policy), 0.0, hi, tol_mw).map(Some)
}

/// Largest nonnegative `l_a` such that `(l_a, 0)` is acceptable.
pub fn max_la(study: &Study, policy: Policy, tol_mw: f64) -> Result<Option<f64>> {
    if !acceptable(study, (0.0, 0.0), policy) {
        return Ok(None);
    }
    let hi = study.upper_bracket().0;
    bisect_max(|l_a| acceptable(study, (l_a, 0.0), policy), 0.0, hi, tol_mw).map(Some)
}

/// Which system's risk constraint limits further load at a curve point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Binding {
    A,
    B,
    Both,
}

impl Binding {
    pub fn name(self) -> &'static str {
        match self {
            Binding::A => "a",
            Binding::B => "b",
            Binding::Both => "both",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub l_a: f64,
    pub l_b: f64,
    pub binding: Binding,
}

impl CurvePoint {
    pub fn sum(&self) -> f64 {
        self.l_a + self.l_b
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AllocationCurve {
    pub policy: Policy,
    pub interconnection: InterconnectionSpec,
    pub points: Vec<CurvePoint>,
}

/// Constraint(s) violated when stepping `tol_mw` past the point in either
/// direction; falls back to the tighter one if neither step violates.
fn binding_at(study: &Study, l: (f64, f64), policy: Policy, tol_mw: f64) -> Binding {
    let probes = [(l.0, l.1 + tol_mw), (l.0 + tol_mw, l.1)];
    let violated = |s: System| probes.iter().any(|&p| !study.system_ok(p, policy, s));
    match (violated(System::A), violated(System::B)) {
        (true, true) => Binding::Both,
        (true, false) => Binding::A,
        (false, true) => Binding::B,
        (false, false) => {
            if study.slack(l, policy, System::A) <= study.slack(l, policy, System::B) {
                Binding::A
            } else {
                Binding::B
            }
        }
    }
}

/// Samples the frontier of acceptable load additions on a uniform `l_a` grid
/// over `[0, L_A^max]`.
pub fn trace_curve(study: &Study, policy: Policy, n_points: usize, tol_mw: f64) -> Result<AllocationCurve> {
    if n_points < 2 {
        return Err(Error::input("a curve needs at least two trace points"));
    }
    if !(tol_mw > 0.0) {
        return Err(Error::input("bisection tolerance must be positive"));
    }
    let infeasible = || {
        let r = crate::risk_engine::adjusted_risk(study.margin(), (0.0, 0.0), study.interconnection(), policy);
        Error::Infeasible(format!(
            "under {policy} the interconnected risk at zero load addition ({:.6}, {:.6}) h/yr exceeds the isolated risk ({:.6}, {:.6}) h/yr",
            r.r_a, r.r_b, study.baseline.r_a, study.baseline.r_b
        ))
    };
    let la_max = max_la(study, policy, tol_mw)?.ok_or_else(infeasible)?;

    let grid: Vec<f64> = if la_max < tol_mw {
        vec![0.0]
    } else {
        (0..n_points)
            .map(|k| la_max * k as f64 / (n_points - 1) as f64)
            .collect()
    };
    let lbs: Vec<Option<f64>> = grid
        .par_iter()
        .map(|&l_a| max_lb(study, l_a, policy, tol_mw))
        .collect::<Result<_>>()?;

    let mut frontier = Vec::with_capacity(grid.len());
    let mut running = f64::INFINITY;
    for (&l_a, lb) in grid.iter().zip(lbs) {
        let Some(l_b) = lb else {
            log::warn!("no acceptable l_b at l_a = {l_a} MW under {policy}; point skipped");
            continue;
        };
        running = running.min(l_b);
        frontier.push((l_a, running));
    }
    let points = frontier
        .par_iter()
        .map(|&(l_a, l_b)| CurvePoint {
            l_a,
            l_b,
            binding: binding_at(study, (l_a, l_b), policy, tol_mw),
        })
        .collect();
    Ok(AllocationCurve {
        policy,
        interconnection: study.interconnection.clone(),
        points,
    })
}

/// Points not weakly dominated by another point of the curve.
pub fn pareto_set(curve: &AllocationCurve) -> Vec<CurvePoint> {
    let pts = &curve.points;
    pts.iter()
        .enumerate()
        .filter(|&(i, p)| {
            !pts.iter()
                .enumerate()
                .any(|(j, q)| j != i && q.l_a >= p.l_a && q.l_b >= p.l_b && (q.l_a > p.l_a || q.l_b > p.l_b))
        })
        .map(|(_, p)| *p)
        .collect()
}

/// Point maximizing `value`; ties go to the larger `l_a`.
pub fn select_optimum(curve: &AllocationCurve, value: impl Fn(&CurvePoint) -> f64) -> Result<CurvePoint> {
    let mut best: Option<(f64, CurvePoint)> = None;
    for p in &curve.points {
        let v = value(p);
        let better = match best {
            None => true,
            Some((bv, bp)) => v > bv || (v == bv && p.l_a > bp.l_a),
        };
        if better {
            best = Some((v, *p));
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::input("cannot pick an optimum from an empty curve"))
}

/// Maximum total load addition.
pub fn max_sum(curve: &AllocationCurve) -> Result<CurvePoint> {
    select_optimum(curve, CurvePoint::sum)
}

/// A traced curve with its max-sum optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurveResult {
    pub curve: AllocationCurve,
    pub optimum: CurvePoint,
}

/// One curve per (policy, interconnection) pair, policies varying fastest.
pub fn sweep(
    study: &Study,
    policies: &[Policy],
    interconnections: &[InterconnectionSpec],
    n_points: usize,
    tol_mw: f64,
) -> Result<Vec<CurveResult>> {
    let mut out = Vec::with_capacity(policies.len() * interconnections.len());
    for ic in interconnections {
        let s = study.with_interconnection(ic.clone());
        for &policy in policies {
            let curve = trace_curve(&s, policy, n_points, tol_mw)?;
            let optimum = max_sum(&curve)?;
            out.push(CurveResult { curve, optimum });
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gridpmf::Pmf2;
    use crate::risk_engine::{binomial_lines, InterconnectionSpec};

    fn gaussian_margin(mean: (f64, f64), sd: (f64, f64), step: f64) -> MarginDist {
        let mut pts = Vec::new();
        for i in -40..=40 {
            for j in -40..=40 {
                let (a, b) = (mean.0 + i as f64 * step, mean.1 + j as f64 * step);
                let za = (a - mean.0) / sd.0;
                let zb = (b - mean.1) / sd.1;
                pts.push(((a, b), (-0.5 * (za * za + zb * zb)).exp()));
            }
        }
        let total: f64 = pts.iter().map(|p| p.1).sum();
        let p = Pmf2::from_points(step, pts.into_iter().map(|(v, m)| (v, m / total))).unwrap();
        MarginDist::new(p).unwrap()
    }

    fn study(c: f64) -> Study {
        let m = Arc::new(gaussian_margin((1000.0, 1400.0), (400.0, 500.0), 50.0));
        Study::new(m, binomial_lines(2, c / 2.0, 0.95).unwrap())
    }

    fn curve(points: &[(f64, f64)]) -> AllocationCurve {
        AllocationCurve {
            policy: Policy::Veto,
            interconnection: InterconnectionSpec::fixed(0.0).unwrap(),
            points: points
                .iter()
                .map(|&(l_a, l_b)| CurvePoint {
                    l_a,
                    l_b,
                    binding: Binding::Both,
                })
                .collect(),
        }
    }

    #[test]
    fn veto_origin_acceptable() {
        let s = study(1000.0);
        assert!(acceptable(&s, (0.0, 0.0), Policy::Veto));
        assert!(!acceptable(&s, (1e6, 0.0), Policy::Veto));
    }

    #[test]
    fn zero_capacity_is_tight() {
        let s = study(0.0);
        assert!(!acceptable(&s, (1.0, 0.0), Policy::Veto));
        assert_eq!(max_lb(&s, 0.0, Policy::Veto, 1.0).unwrap(), Some(0.0));
        let c = trace_curve(&s, Policy::Share, 5, 1.0).unwrap();
        assert_eq!(
            c.points,
            vec![CurvePoint {
                l_a: 0.0,
                l_b: 0.0,
                binding: Binding::Both
            }]
        );
    }

    #[test]
    fn curve_invariants() {
        let s = study(1500.0);
        let c = trace_curve(&s, Policy::Veto, 11, 1.0).unwrap();
        assert_eq!(c.points.len(), 11);
        assert!(c.points[10].l_a > 100.0 && c.points[0].l_b > 100.0);
        for w in c.points.windows(2) {
            assert!(w[1].l_a > w[0].l_a);
            assert!(w[1].l_b <= w[0].l_b);
        }
        for p in &c.points {
            assert!(acceptable(&s, (p.l_a, p.l_b), Policy::Veto));
        }
    }

    #[test]
    fn pareto_examples() {
        let strict = curve(&[(0.0, 3.0), (1.0, 2.0), (2.0, 0.0)]);
        assert_eq!(pareto_set(&strict), strict.points);
        let flat = curve(&[(0.0, 2.0), (1.0, 2.0), (2.0, 2.0), (3.0, 0.0)]);
        let kept: Vec<_> = pareto_set(&flat).iter().map(|p| (p.l_a, p.l_b)).collect();
        assert_eq!(kept, vec![(2.0, 2.0), (3.0, 0.0)]);
        let single = curve(&[(1.0, 1.0)]);
        assert_eq!(pareto_set(&single), single.points);
    }

    #[test]
    fn optimum_examples() {
        let c = curve(&[(0.0, 3.0), (1.0, 2.0), (2.0, 0.5)]);
        assert_eq!(max_sum(&c).unwrap().l_a, 1.0);
        let tie = curve(&[(0.0, 2.0), (1.0, 1.0), (2.0, 0.0)]);
        assert_eq!(max_sum(&tie).unwrap().l_a, 2.0);
        assert_eq!(select_optimum(&c, |p| p.l_a).unwrap().l_a, 2.0);
        assert!(max_sum(&curve(&[])).is_err());
    }

    #[test]
    fn sweep_shapes() {
        let s = study(1000.0);
        let ics = [1000.0, 2000.0].map(|c| binomial_lines(2, c / 2.0, 0.95).unwrap());
        let out = sweep(&s, &[Policy::Veto], &ics, 6, 1.0).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[1].optimum.sum() >= out[0].optimum.sum() - 1.0);
        for r in &out {
            assert!(r.curve.points.contains(&r.optimum));
        }
    }
}
