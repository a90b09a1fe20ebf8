//! Brute-force reference computations used to check the engine.
//!
//! Nothing here calls into the region-integral or copula code of the engine.
//! Policy outcomes are decided by simulating interconnector flows per outcome,
//! and the normal distribution comes from `statrs`.

use std::collections::BTreeMap;

use rand::Rng;
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::gridpmf::{Pmf1, Pmf2};
use crate::risk_engine::{policy_lolp, shortfall_decomposition, MarginDist, Policy, System};
use crate::{Error, Result};

/// Largest number of factor combinations [`oracle_margin`] will enumerate.
pub const MAX_OUTCOMES: usize = 1_000_000;

/// A finite list of joint margin outcomes, each occupying a square cell of
/// side `cell_width` centred on the outcome.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteMargin {
    outcomes: Vec<(f64, f64, f64)>,
    cell_width: f64,
}

impl DiscreteMargin {
    pub fn new(outcomes: Vec<(f64, f64, f64)>, cell_width: f64) -> Result<Self> {
        if !(cell_width > 0.0 && cell_width.is_finite()) {
            return Err(Error::input(format!("cell width {cell_width} is invalid")));
        }
        if outcomes
            .iter()
            .any(|o| !(o.2 >= 0.0) || !o.0.is_finite() || !o.1.is_finite())
        {
            return Err(Error::input(
                "outcomes need finite values and nonnegative probabilities",
            ));
        }
        let total: f64 = outcomes.iter().map(|o| o.2).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::NotNormalized(total));
        }
        Ok(Self { outcomes, cell_width })
    }

    pub fn outcomes(&self) -> &[(f64, f64, f64)] {
        &self.outcomes
    }

    pub fn cell_width(&self) -> f64 {
        self.cell_width
    }

    /// Outcomes as a grid pmf with the cell width as step. Every outcome must
    /// sit on a multiple of the step.
    pub fn to_pmf(&self) -> Result<Pmf2> {
        let w = self.cell_width;
        let cells = self.binned()?;
        let (imin, imax) = (
            cells.keys().map(|k| k.0).min().unwrap(),
            cells.keys().map(|k| k.0).max().unwrap(),
        );
        let (jmin, jmax) = (
            cells.keys().map(|k| k.1).min().unwrap(),
            cells.keys().map(|k| k.1).max().unwrap(),
        );
        let (na, nb) = ((imax - imin + 1) as usize, (jmax - jmin + 1) as usize);
        let mut masses = vec![0.0; na * nb];
        for (&(i, j), &p) in &cells {
            masses[(i - imin) as usize * nb + (j - jmin) as usize] += p;
        }
        Pmf2::new((imin as f64 * w, jmin as f64 * w), w, na, nb, masses)
    }

    /// Probability per grid index `(round(m_a / w), round(m_b / w))`.
    pub fn binned(&self) -> Result<BTreeMap<(i64, i64), f64>> {
        let w = self.cell_width;
        let mut cells = BTreeMap::new();
        for &(a, b, p) in &self.outcomes {
            let (fa, fb) = (a / w, b / w);
            if (fa - fa.round()).abs() > 1e-9 || (fb - fb.round()).abs() > 1e-9 {
                return Err(Error::input(format!("outcome ({a}, {b}) is off the {w} MW grid")));
            }
            *cells.entry((fa.round() as i64, fb.round() as i64)).or_insert(0.0) += p;
        }
        Ok(cells)
    }
}

/// Whether `system` (own surplus `u`, other surplus `v`, after load
/// additions) ends up short when the link carries at most `c`.
fn short_after_flows(u: f64, v: f64, c: f64, policy: Policy, system: System) -> bool {
    let favoured = policy.assisted();
    if favoured == Some(system) {
        // the other side sends everything the link can carry
        return u + c < 0.0;
    }
    if favoured == Some(system.other()) {
        // own surplus is taken first for the other side's deficit; any
        // import happens only if the other side has spare
        let export = if v < 0.0 { c.min(-v) } else { 0.0 };
        let import = if v > 0.0 { c.min(v) } else { 0.0 };
        return u - export + import < 0.0;
    }
    match policy {
        Policy::Veto => {
            // imports only out of the neighbour's surplus
            let import = if v > 0.0 { c.min(v) } else { 0.0 };
            u + import < 0.0
        }
        Policy::Share => {
            if u + v < 0.0 {
                // a joint deficit is spread over both systems; only surplus
                // beyond the link limit can stay at home
                u - c < 0.0
            } else {
                let import = if v > 0.0 { c.min(v) } else { 0.0 };
                u + import < 0.0
            }
        }
        Policy::AssistA | Policy::AssistB => unreachable!(),
    }
}

/// Shortfall probability of `system` by enumerating outcomes and simulating
/// the flows each policy allows.
///
/// Refuses when some outcome cell straddles one of the lines where the
/// outcome classification changes, since cell-density and point-mass
/// semantics would then disagree.
pub fn oracle_policy_lolp(dm: &DiscreteMargin, l: (f64, f64), c: f64, policy: Policy, system: System) -> Result<f64> {
    if !(c >= 0.0) {
        return Err(Error::input("capacity must be nonnegative"));
    }
    let half = 0.5 * dm.cell_width;
    let mut p = 0.0;
    for &(ma, mb, prob) in &dm.outcomes {
        let (own, other, l_own, l_other) = match system {
            System::A => (ma, mb, l.0, l.1),
            System::B => (mb, ma, l.1, l.0),
        };
        let (u, v) = (own - l_own, other - l_other);
        for line in [-c, 0.0, c] {
            if (u - line).abs() < half {
                return Err(Error::OracleRefused(format!(
                    "cell at ({ma}, {mb}) straddles own-margin line {}",
                    l_own + line
                )));
            }
        }
        if (u + v).abs() < dm.cell_width {
            return Err(Error::OracleRefused(format!(
                "cell at ({ma}, {mb}) straddles the joint-margin line {}",
                l_own + l_other
            )));
        }
        if short_after_flows(u, v, c, policy, system) {
            p += prob;
        }
    }
    Ok(p)
}

/// A discrete margin with load additions and link capacities chosen so that
/// no outcome cell touches a classification boundary.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub margin: DiscreteMargin,
    pub l: (f64, f64),
    pub capacities: Vec<f64>,
}

/// Random boundary-safe case with up to `max_outcomes` outcomes.
///
/// Outcomes lie on the integer lattice with unit cells, load additions sit on
/// half-integers and capacities are integers, so every own-margin line falls
/// on a cell edge. Outcomes on the joint-margin line are redrawn.
pub fn random_case(rng: &mut impl Rng, max_outcomes: usize) -> OracleCase {
    let l = (
        f64::from(rng.random_range(-5..=5)) + 0.5,
        f64::from(rng.random_range(-5..=5)) + 0.5,
    );
    let s = l.0 + l.1;
    let n = rng.random_range(1..=max_outcomes.max(1));
    let mut outcomes = Vec::with_capacity(n);
    while outcomes.len() < n {
        let (a, b) = (
            f64::from(rng.random_range(-10..=10)),
            f64::from(rng.random_range(-10..=10)),
        );
        if a + b != s {
            outcomes.push((a, b, rng.random_range(0.05..1.0)));
        }
    }
    let total: f64 = outcomes.iter().map(|o: &(f64, f64, f64)| o.2).sum();
    for o in &mut outcomes {
        o.2 /= total;
    }
    let fix = outcomes.iter().map(|o| o.2).sum::<f64>() - 1.0;
    outcomes[0].2 -= fix;
    let capacities = vec![
        0.0,
        f64::from(rng.random_range(1..=3)),
        f64::from(rng.random_range(8..=30)),
    ];
    OracleCase {
        margin: DiscreteMargin::new(outcomes, 1.0).expect("normalized by construction"),
        l,
        capacities,
    }
}

/// Largest difference between engine and oracle shortfall probabilities over
/// every policy, system and capacity of `case`.
pub fn compare_case(case: &OracleCase) -> Result<f64> {
    let m = MarginDist::new(case.margin.to_pmf()?)?;
    let mut worst: f64 = 0.0;
    for &c in &case.capacities {
        for system in [System::A, System::B] {
            let d = shortfall_decomposition(&m, case.l, c, system);
            for policy in Policy::ALL {
                let engine = policy_lolp(&d, policy, system);
                let oracle = oracle_policy_lolp(&case.margin, case.l, c, policy, system)?;
                worst = worst.max((engine - oracle).abs());
            }
        }
    }
    Ok(worst)
}

/// `P(m_A <= a, m_A + m_B <= a + b)` by splitting every cell into
/// `refinement x refinement` subcells and testing subcell centres.
pub fn oracle_phi(m: &MarginDist, a: f64, b: f64, refinement: usize) -> f64 {
    assert!(refinement >= 2, "refinement must be at least 2");
    let p = m.pmf();
    let (na, nb) = p.shape();
    let d = p.step();
    let r = refinement as f64;
    let sub = d / r;
    let s = if b == f64::INFINITY { f64::INFINITY } else { a + b };
    let mut total = 0.0;
    for i in 0..na {
        for j in 0..nb {
            let mass = p.get(i, j);
            if mass == 0.0 {
                continue;
            }
            let (x0, y0) = (p.value_a(i) - 0.5 * d, p.value_b(j) - 0.5 * d);
            let mut inside = 0usize;
            for si in 0..refinement {
                let x = x0 + (si as f64 + 0.5) * sub;
                if x > a {
                    break;
                }
                for sj in 0..refinement {
                    let y = y0 + (sj as f64 + 0.5) * sub;
                    if x + y <= s {
                        inside += 1;
                    }
                }
            }
            total += mass * inside as f64 / (r * r);
        }
    }
    total
}

/// Exact joint margin `G_A + G_B + W - D` by enumerating every combination
/// of factor outcomes.
pub fn oracle_margin(ga: &Pmf1, gb: &Pmf1, w: &Pmf2, d: &Pmf2) -> Result<DiscreteMargin> {
    let support1 = |p: &Pmf1| -> Vec<(f64, f64)> {
        (0..p.len())
            .filter(|&k| p.masses()[k] > 0.0)
            .map(|k| (p.value(k), p.masses()[k]))
            .collect()
    };
    let support2 = |p: &Pmf2| -> Vec<((f64, f64), f64)> {
        let (na, nb) = p.shape();
        (0..na)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .filter(|&(i, j)| p.get(i, j) > 0.0)
            .map(|(i, j)| ((p.value_a(i), p.value_b(j)), p.get(i, j)))
            .collect()
    };
    let (sa, sb, sw, sd) = (support1(ga), support1(gb), support2(w), support2(d));
    let count = sa.len() as f64 * sb.len() as f64 * sw.len() as f64 * sd.len() as f64;
    if count > MAX_OUTCOMES as f64 {
        return Err(Error::input(format!(
            "{count} factor combinations exceed the enumeration limit of {MAX_OUTCOMES}"
        )));
    }
    let mut outcomes = Vec::with_capacity(count as usize);
    for &(a, pa) in &sa {
        for &(b, pb) in &sb {
            for &((wa, wb), pw) in &sw {
                for &((da, db), pd) in &sd {
                    outcomes.push((a + wa - da, b + wb - db, pa * pb * pw * pd));
                }
            }
        }
    }
    let total: f64 = outcomes.iter().map(|o| o.2).sum();
    for o in &mut outcomes {
        o.2 /= total;
    }
    DiscreteMargin::new(outcomes, w.step())
}

/// Gaussian-copula probabilities of bin pairs, where both marginals share the
/// bin masses `masses`, by dense midpoint integration of
/// `P(bin i, bin j) = ∫_{z in bin i} φ(z) P(Z_b in bin j | z) dz`.
pub fn oracle_copula_bins(masses: &[f64], rho: f64, panels_per_bin: usize) -> Vec<Vec<f64>> {
    let std = Normal::new(0.0, 1.0).unwrap();
    let total: f64 = masses.iter().sum();
    let n = masses.len();
    let mut edges = vec![f64::NEG_INFINITY];
    let mut acc = 0.0;
    for m in &masses[..n - 1] {
        acc += m / total;
        edges.push(std.inverse_cdf(acc.min(1.0)));
    }
    edges.push(f64::INFINITY);
    let clip = |z: f64| z.clamp(-10.0, 10.0);
    let sd = (1.0 - rho * rho).sqrt();
    let cond = |z: f64, lo: f64, hi: f64| -> f64 {
        if sd == 0.0 {
            let x = rho * z;
            return f64::from(u8::from(x > lo && x <= hi));
        }
        let f = |e: f64| {
            if e == f64::INFINITY {
                1.0
            } else if e == f64::NEG_INFINITY {
                0.0
            } else {
                std.cdf((e - rho * z) / sd)
            }
        };
        f(hi) - f(lo)
    };
    let mut out = vec![vec![0.0; n]; n];
    for i in 0..n {
        let (lo, hi) = (clip(edges[i]), clip(edges[i + 1]));
        if hi <= lo {
            continue;
        }
        let h = (hi - lo) / panels_per_bin as f64;
        for k in 0..panels_per_bin {
            let z = lo + (k as f64 + 0.5) * h;
            let weight = std.pdf(z) * h;
            for j in 0..n {
                out[i][j] += weight * cond(z, edges[j], edges[j + 1]);
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn three() -> DiscreteMargin {
        let third = 1.0 / 3.0;
        DiscreteMargin::new(vec![(-2.0, 3.0, third), (1.0, -2.0, third), (-1.0, -1.0, third)], 0.5).unwrap()
    }

    #[test]
    fn three_outcome_policies() {
        let dm = three();
        let lolp = |p| oracle_policy_lolp(&dm, (0.0, 0.0), 1.5, p, System::A).unwrap();
        assert_abs_diff_eq!(lolp(Policy::Veto), 2.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lolp(Policy::AssistA), 1.0 / 3.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lolp(Policy::Share), 1.0, epsilon = 1e-15);
        assert_abs_diff_eq!(lolp(Policy::AssistB), 1.0, epsilon = 1e-15);
    }

    #[test]
    fn straddling_cell_is_refused() {
        let dm = three();
        let err = oracle_policy_lolp(&dm, (0.0, 0.0), 2.0, Policy::Veto, System::A).unwrap_err();
        assert!(matches!(err, Error::OracleRefused(_)));
        let dm = DiscreteMargin::new(vec![(1.0, -1.2, 1.0)], 0.5).unwrap();
        assert!(oracle_policy_lolp(&dm, (0.0, 0.0), 5.0, Policy::Share, System::A).is_err());
    }

    #[test]
    fn phi_refinement_examples() {
        let m = MarginDist::new(Pmf2::delta((0.0, 0.0), 50.0).unwrap()).unwrap();
        for r in [2, 7, 64] {
            assert_eq!(oracle_phi(&m, f64::INFINITY, f64::INFINITY, r), 1.0);
        }
        assert_abs_diff_eq!(oracle_phi(&m, 0.0, f64::INFINITY, 64), 0.5, epsilon = 1e-12);
        let mut last = f64::INFINITY;
        for r in [4, 16, 64, 256] {
            let err = (oracle_phi(&m, 0.0, 0.0, r) - 0.375).abs();
            assert!(err <= last);
            last = err;
        }
        assert!(last < 1e-3);
    }

    #[test]
    fn margin_enumeration_sizes() {
        let pt = Pmf1::delta(100.0, 10.0).unwrap();
        let w = Pmf2::delta((20.0, 30.0), 10.0).unwrap();
        let d = Pmf2::delta((50.0, 60.0), 10.0).unwrap();
        let single = oracle_margin(&pt, &pt, &w, &d).unwrap();
        assert_eq!(single.outcomes(), &[(70.0, 70.0, 1.0)]);

        let two = Pmf1::new(0.0, 10.0, vec![0.3, 0.7]).unwrap();
        let w2 = Pmf2::from_points(10.0, [((0.0, 0.0), 0.5), ((10.0, 20.0), 0.5)]).unwrap();
        let d2 = Pmf2::from_points(10.0, [((40.0, 10.0), 0.25), ((60.0, 30.0), 0.75)]).unwrap();
        let dm = oracle_margin(&two, &two, &w2, &d2).unwrap();
        assert_eq!(dm.outcomes().len(), 16);
        assert_abs_diff_eq!(dm.outcomes()[0].2, 0.3 * 0.3 * 0.5 * 0.25, epsilon = 1e-15);
    }

    #[test]
    fn margin_enumeration_limit() {
        let wide = Pmf1::new(0.0, 10.0, vec![0.01; 100]).unwrap();
        let w = Pmf2::new((0.0, 0.0), 10.0, 11, 10, vec![1.0 / 110.0; 110]).unwrap();
        assert!(oracle_margin(&wide, &wide, &w, &w).is_err());
    }

    #[test]
    fn random_cases_are_safe_and_agree() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let case = random_case(&mut rng, 10);
            assert!(compare_case(&case).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn copula_oracle_limits() {
        let m = [0.1, 0.2, 0.3, 0.4];
        let indep = oracle_copula_bins(&m, 0.0, 2000);
        for i in 0..4 {
            for j in 0..4 {
                assert_abs_diff_eq!(indep[i][j], m[i] * m[j], epsilon = 1e-6);
            }
        }
    }
}
