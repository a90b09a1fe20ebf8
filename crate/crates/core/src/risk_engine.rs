//! Joint margin, region integrals and per-policy loss-of-load risk.
//!
//! The joint margin `M = G + W - D` is held as a [`Pmf2`] whose masses are
//! read as a piecewise-constant density: each mass is spread uniformly over
//! the `step x step` square centred on its grid point. All shortfall
//! probabilities are integrals of that density over the region
//!
//! ```text
//! R(a, b) = { m_x <= a } ∩ { m_x + m_y <= a + b }
//! ```
//!
//! for the system `x` under study and the other system `y`. The adjusted
//! post-interconnection margin is never built explicitly.

use serde::{Deserialize, Serialize};

use crate::gridpmf::{convolve2, outer, reflect2, same_step, Pmf1, Pmf2};
use crate::{Error, Result, HOURS_PER_YEAR};

/// Rounding noise level of region-integral differences. Negative differences
/// are clamped to 0 and logged when they fall below `-CLAMP_TOL`.
pub const CLAMP_TOL: f64 = 1e-12;

/// Rows/columns carrying less total mass than this are cut from the margin.
const MARGIN_TRIM: f64 = 1e-15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum System {
    A,
    B,
}

impl System {
    pub fn other(self) -> System {
        match self {
            System::A => System::B,
            System::B => System::A,
        }
    }
}

/// Rule resolving interconnector flows when a shortfall cannot be avoided.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Policy {
    /// A system exports only out of its own surplus.
    Veto,
    /// Shortfalls are shared between the systems.
    Share,
    /// Interconnection is used to relieve system A as far as possible.
    AssistA,
    /// Interconnection is used to relieve system B as far as possible.
    AssistB,
}

impl Policy {
    pub const ALL: [Policy; 4] = [Policy::Veto, Policy::Share, Policy::AssistA, Policy::AssistB];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Veto => "veto",
            Policy::Share => "share",
            Policy::AssistA => "assist-a",
            Policy::AssistB => "assist-b",
        }
    }

    /// The same rule with the system labels exchanged.
    pub fn mirrored(self) -> Policy {
        match self {
            Policy::AssistA => Policy::AssistB,
            Policy::AssistB => Policy::AssistA,
            p => p,
        }
    }

    /// The system this policy favours, if any.
    pub fn assisted(self) -> Option<System> {
        match self {
            Policy::AssistA => Some(System::A),
            Policy::AssistB => Some(System::B),
            _ => None,
        }
    }
}

impl std::fmt::Display for Policy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| Error::input(format!("unknown policy {s:?} (veto|share|assist-a|assist-b)")))
    }
}

/// One available-capacity state of the interconnection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CapacityLevel {
    pub capacity_mw: f64,
    pub probability: f64,
}

/// Discrete distribution of available interconnection capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterconnectionSpec {
    levels: Vec<CapacityLevel>,
}

impl InterconnectionSpec {
    pub fn new(levels: Vec<CapacityLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::input("interconnection needs at least one capacity level"));
        }
        for l in &levels {
            if !(l.capacity_mw >= 0.0 && l.capacity_mw.is_finite()) {
                return Err(Error::input(format!("capacity level {} MW is invalid", l.capacity_mw)));
            }
            if !(0.0..=1.0).contains(&l.probability) {
                return Err(Error::input(format!("level probability {} is invalid", l.probability)));
            }
        }
        if levels.windows(2).any(|w| w[1].capacity_mw <= w[0].capacity_mw) {
            return Err(Error::input("capacity levels must be distinct and ascending"));
        }
        let total: f64 = levels.iter().map(|l| l.probability).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::input(format!("level probabilities sum to {total}, not 1")));
        }
        Ok(Self { levels })
    }

    /// A fixed, always-available capacity.
    pub fn fixed(capacity_mw: f64) -> Result<Self> {
        Self::new(vec![CapacityLevel {
            capacity_mw,
            probability: 1.0,
        }])
    }

    pub fn levels(&self) -> &[CapacityLevel] {
        &self.levels
    }

    pub fn max_capacity_mw(&self) -> f64 {
        self.levels.last().map_or(0.0, |l| l.capacity_mw)
    }

    /// Same probabilities with every capacity multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        if factor == 0.0 {
            return Self::fixed(0.0);
        }
        Self::new(
            self.levels
                .iter()
                .map(|l| CapacityLevel {
                    capacity_mw: l.capacity_mw * factor,
                    probability: l.probability,
                })
                .collect(),
        )
    }
}

/// `n_lines` independent identical lines of `per_line_mw`, each available
/// with probability `availability`.
pub fn binomial_lines(n_lines: u32, per_line_mw: f64, availability: f64) -> Result<InterconnectionSpec> {
    if !(0.0..=1.0).contains(&availability) {
        return Err(Error::input(format!("line availability {availability} is invalid")));
    }
    if n_lines == 0 || per_line_mw == 0.0 {
        return InterconnectionSpec::fixed(0.0);
    }
    let n = n_lines as i32;
    let mut binom = 1.0;
    let levels = (0..=n_lines)
        .map(|k| {
            if k > 0 {
                binom = binom * f64::from(n_lines - k + 1) / f64::from(k);
            }
            let k = k as i32;
            CapacityLevel {
                capacity_mw: f64::from(k) * per_line_mw,
                probability: binom * availability.powi(k) * (1.0 - availability).powi(n - k),
            }
        })
        .collect();
    InterconnectionSpec::new(levels)
}

/// Shortfall probability split into disjoint contributions for one system.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ShortfallDecomposition {
    /// Shortfall even if the full capacity flows towards the system.
    pub base: f64,
    /// Additional shortfall because the other system cannot spare imports.
    pub imp: f64,
    /// Additional shortfall caused by exports forced on the system.
    pub exp: f64,
}

/// Per-system LOLE in hours per year.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RiskResult {
    pub r_a: f64,
    pub r_b: f64,
}

impl RiskResult {
    pub fn get(&self, system: System) -> f64 {
        match system {
            System::A => self.r_a,
            System::B => self.r_b,
        }
    }
}

/// Precomputed sums for region integrals with one axis as the constrained
/// (first) coordinate `u` and the other as `t`.
#[derive(Debug, Clone)]
struct PhiTable {
    x0: f64,
    y0: f64,
    step: f64,
    nx: usize,
    ny: usize,
    masses: Vec<f64>,
    /// `col_cum[i * ny + j] = sum of masses[i][0..=j]`.
    col_cum: Vec<f64>,
    /// Cumulative marginal of `u`.
    row_cum: Vec<f64>,
    /// Prefix sums along each anti-diagonal `k = i + j`, in increasing `i`.
    diag_cum: Vec<f64>,
    diag_off: Vec<usize>,
}

impl PhiTable {
    fn new(p: &Pmf2) -> Self {
        let (nx, ny) = p.shape();
        let masses = p.masses().to_vec();
        let mut col_cum = Vec::with_capacity(nx * ny);
        let mut row_cum = Vec::with_capacity(nx);
        let mut run = 0.0;
        for i in 0..nx {
            let mut acc = 0.0;
            for &m in p.row(i) {
                acc += m;
                col_cum.push(acc);
            }
            run += acc;
            row_cum.push(run);
        }
        let nd = nx + ny - 1;
        let mut diag_off = Vec::with_capacity(nd + 1);
        let mut diag_cum = Vec::with_capacity(nx * ny);
        for k in 0..nd {
            diag_off.push(diag_cum.len());
            let (lo, hi) = (k.saturating_sub(ny - 1), k.min(nx - 1));
            let mut acc = 0.0;
            for i in lo..=hi {
                acc += masses[i * ny + (k - i)];
                diag_cum.push(acc);
            }
        }
        diag_off.push(diag_cum.len());
        let (x0, y0) = p.origin();
        Self {
            x0,
            y0,
            step: p.step(),
            nx,
            ny,
            masses,
            col_cum,
            row_cum,
            diag_cum,
            diag_off,
        }
    }

    fn x(&self, i: usize) -> f64 {
        self.x0 + i as f64 * self.step
    }

    fn y(&self, j: usize) -> f64 {
        self.y0 + j as f64 * self.step
    }

    fn diag_center(&self, k: usize) -> f64 {
        self.x0 + self.y0 + k as f64 * self.step
    }

    /// Largest column index whose cell lies entirely in `u <= a` (may be -1).
    fn full_column(&self, a: f64) -> i64 {
        let h = 0.5 * self.step;
        let mut i = ((a - h - self.x0) / self.step - 1e-9).floor() as i64;
        i = i.min(self.nx as i64 - 1);
        while i >= 0 && self.x(i as usize) + h > a {
            i -= 1;
        }
        i
    }

    /// Largest column index whose cell meets `u < a` (may be -1).
    fn touched_column(&self, a: f64) -> i64 {
        let h = 0.5 * self.step;
        let mut i = ((a + h - self.x0) / self.step + 1e-9).floor() as i64;
        i = i.clamp(-1, self.nx as i64 - 1);
        while i + 1 < self.nx as i64 && self.x((i + 1) as usize) - h < a {
            i += 1;
        }
        i
    }

    /// Largest diagonal whose cells lie entirely in `u + t <= s`.
    fn full_diagonal(&self, s: f64) -> i64 {
        let d = self.step;
        let nd = (self.nx + self.ny - 1) as i64;
        let mut k = ((s - d - self.x0 - self.y0) / d - 1e-9).floor() as i64;
        k = k.min(nd - 1);
        while k >= 0 && self.diag_center(k as usize) + d > s {
            k -= 1;
        }
        k
    }

    /// Largest diagonal whose cells meet `u + t < s`.
    fn touched_diagonal(&self, s: f64) -> i64 {
        let d = self.step;
        let nd = (self.nx + self.ny - 1) as i64;
        let mut k = ((s + d - self.x0 - self.y0) / d + 1e-9).floor() as i64;
        k = k.clamp(-1, nd - 1);
        while k + 1 < nd && self.diag_center((k + 1) as usize) - d < s {
            k += 1;
        }
        k
    }

    /// Mass of column `i` over rows with diagonal index `<= k`.
    fn column_upto_diag(&self, i: usize, k: i64) -> f64 {
        let jmax = k - i as i64;
        if jmax < 0 {
            0.0
        } else {
            self.col_cum[i * self.ny + (jmax as usize).min(self.ny - 1)]
        }
    }

    /// Mass on diagonal `k` over columns `<= imax`.
    fn diag_upto_column(&self, k: usize, imax: i64) -> f64 {
        let lo = k.saturating_sub(self.ny - 1) as i64;
        let hi = imax.min(k.min(self.nx - 1) as i64);
        if hi < lo {
            0.0
        } else {
            self.diag_cum[self.diag_off[k] + (hi - lo) as usize]
        }
    }

    fn phi(&self, a: f64, b: f64) -> f64 {
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return 0.0;
        }
        let h = 0.5 * self.step;
        let d = self.step;
        let (i_full, i_touch) = if a == f64::INFINITY {
            (self.nx as i64 - 1, self.nx as i64 - 1)
        } else {
            (self.full_column(a), self.touched_column(a))
        };
        let col_fraction = |i: usize| ((a - (self.x(i) - h)) / d).clamp(0.0, 1.0);

        if a == f64::INFINITY && b == f64::INFINITY {
            return self.row_cum[self.nx - 1];
        }
        if b == f64::INFINITY {
            let mut p = if i_full >= 0 {
                self.row_cum[i_full as usize]
            } else {
                0.0
            };
            for i in (i_full + 1).max(0)..=i_touch {
                let i = i as usize;
                p += col_fraction(i) * self.col_cum[i * self.ny + self.ny - 1];
            }
            return p;
        }

        let s = a + b;
        let (k_full, k_touch) = (self.full_diagonal(s), self.touched_diagonal(s));
        let mut p = 0.0;

        // cells inside both half-planes
        for i in 0..=i_full.min(k_full) {
            p += self.column_upto_diag(i as usize, k_full);
        }
        // columns cut by the vertical line only
        for i in (i_full + 1).max(0)..=i_touch.min(k_full) {
            let i = i as usize;
            p += col_fraction(i) * self.column_upto_diag(i, k_full);
        }
        // diagonals cut by the sloped line only
        for k in (k_full + 1).max(0)..=k_touch {
            let k = k as usize;
            let mass = self.diag_upto_column(k, i_full);
            if mass > 0.0 {
                p += mass * diagonal_fraction(s - self.diag_center(k), d);
            }
        }
        // cells cut by both lines
        for i in (i_full + 1).max(0)..=i_touch {
            for k in (k_full + 1).max(i)..=k_touch {
                let j = (k - i) as usize;
                if j >= self.ny {
                    continue;
                }
                let m = self.masses[i as usize * self.ny + j];
                if m > 0.0 {
                    p += m * cell_fraction(self.x(i as usize), self.y(j), h, a, s);
                }
            }
        }
        p
    }

    /// Reference path: clip every cell individually.
    fn phi_direct(&self, a: f64, b: f64) -> f64 {
        let h = 0.5 * self.step;
        if a == f64::NEG_INFINITY || b == f64::NEG_INFINITY {
            return 0.0;
        }
        let s = a + b;
        let mut p = 0.0;
        for i in 0..self.nx {
            for j in 0..self.ny {
                let m = self.masses[i * self.ny + j];
                if m > 0.0 {
                    p += m * cell_fraction(self.x(i), self.y(j), h, a, s);
                }
            }
        }
        p
    }
}

/// Fraction of a square of side `d` lying below a line `u + t = c + delta`
/// where `c` is the centre sum.
fn diagonal_fraction(delta: f64, d: f64) -> f64 {
    if delta >= d {
        1.0
    } else if delta <= -d {
        0.0
    } else if delta >= 0.0 {
        1.0 - (d - delta).powi(2) / (2.0 * d * d)
    } else {
        (d + delta).powi(2) / (2.0 * d * d)
    }
}

/// Clips `poly` to the half-plane `nx * u + ny * t <= c`.
fn clip(poly: &[(f64, f64)], n: (f64, f64), c: f64) -> Vec<(f64, f64)> {
    let inside = |p: &(f64, f64)| n.0 * p.0 + n.1 * p.1 <= c;
    let mut out = Vec::with_capacity(poly.len() + 2);
    for (k, cur) in poly.iter().enumerate() {
        let prev = &poly[(k + poly.len() - 1) % poly.len()];
        let (ci, pi) = (inside(cur), inside(prev));
        if ci != pi {
            let fp = n.0 * prev.0 + n.1 * prev.1 - c;
            let fc = n.0 * cur.0 + n.1 * cur.1 - c;
            let t = fp / (fp - fc);
            out.push((prev.0 + t * (cur.0 - prev.0), prev.1 + t * (cur.1 - prev.1)));
        }
        if ci {
            out.push(*cur);
        }
    }
    out
}

fn polygon_area(poly: &[(f64, f64)]) -> f64 {
    let n = poly.len();
    if n < 3 {
        return 0.0;
    }
    let twice: f64 = (0..n)
        .map(|k| {
            let (p, q) = (poly[k], poly[(k + 1) % n]);
            p.0 * q.1 - q.0 * p.1
        })
        .sum();
    0.5 * twice.abs()
}

/// Fraction of the square centred at `(x, y)` with half-side `h` inside
/// `{u <= a} ∩ {u + t <= s}`. Infinite bounds drop their constraint.
fn cell_fraction(x: f64, y: f64, h: f64, a: f64, s: f64) -> f64 {
    let a_in = a == f64::INFINITY || x + h <= a;
    let s_in = s == f64::INFINITY || x + y + 2.0 * h <= s;
    if a_in && s_in {
        return 1.0;
    }
    if x - h >= a || x + y - 2.0 * h >= s {
        return 0.0;
    }
    // local coordinates keep the clip well conditioned
    let mut poly = vec![(-h, -h), (h, -h), (h, h), (-h, h)];
    if !a_in {
        poly = clip(&poly, (1.0, 0.0), a - x);
    }
    if !s_in {
        poly = clip(&poly, (1.0, 1.0), s - x - y);
    }
    (polygon_area(&poly) / (4.0 * h * h)).clamp(0.0, 1.0)
}

/// The joint margin distribution together with region-integral tables for
/// both system orientations.
#[derive(Debug, Clone)]
pub struct MarginDist {
    pmf: Pmf2,
    table_a: PhiTable,
    table_b: PhiTable,
}

impl MarginDist {
    pub fn new(pmf: Pmf2) -> Result<Self> {
        pmf.check_normalized()?;
        let table_a = PhiTable::new(&pmf);
        let table_b = PhiTable::new(&pmf.swap_axes());
        Ok(Self { pmf, table_a, table_b })
    }

    pub fn pmf(&self) -> &Pmf2 {
        &self.pmf
    }

    pub fn step(&self) -> f64 {
        self.pmf.step()
    }

    /// Largest grid value on each axis plus half a cell: the margin density
    /// vanishes beyond it.
    pub fn support_max(&self) -> (f64, f64) {
        let (na, nb) = self.pmf.shape();
        let h = 0.5 * self.step();
        (self.pmf.value_a(na - 1) + h, self.pmf.value_b(nb - 1) + h)
    }

    pub fn support_min(&self) -> (f64, f64) {
        let h = 0.5 * self.step();
        (self.pmf.value_a(0) - h, self.pmf.value_b(0) - h)
    }

    fn table(&self, system: System) -> &PhiTable {
        match system {
            System::A => &self.table_a,
            System::B => &self.table_b,
        }
    }

    /// `P(m_A <= a, m_A + m_B <= a + b)` under the cell density.
    /// `b = +inf` drops the second constraint.
    pub fn phi(&self, a: f64, b: f64) -> f64 {
        self.table_a.phi(a, b)
    }

    /// Region integral with `system`'s margin as the constrained coordinate:
    /// `P(m_x <= a, m_x + m_y <= a + b)`.
    pub fn phi_for(&self, system: System, a: f64, b: f64) -> f64 {
        self.table(system).phi(a, b)
    }

    /// Same integral, clipping every cell individually.
    pub fn phi_direct(&self, system: System, a: f64, b: f64) -> f64 {
        self.table(system).phi_direct(a, b)
    }

    /// Swaps the system labels.
    pub fn swapped(&self) -> MarginDist {
        MarginDist {
            pmf: self.pmf.swap_axes(),
            table_a: self.table_b.clone(),
            table_b: self.table_a.clone(),
        }
    }
}

/// Assembles `f_M = f_GA * f_GB * f_W * f_{-D}` with demand shifted up by the
/// constant `load_offsets`.
pub fn build_margin(ga: &Pmf1, gb: &Pmf1, wind: &Pmf2, demand: &Pmf2, load_offsets: (f64, f64)) -> Result<MarginDist> {
    let step = wind.step();
    for s in [ga.step(), gb.step(), demand.step()] {
        if !same_step(s, step) {
            return Err(Error::StepMismatch { left: s, right: step });
        }
    }
    let generation = outer(ga, gb)?;
    let supply = convolve2(&generation, wind)?;
    let neg_demand = reflect2(&demand.shift(load_offsets));
    let mut margin = convolve2(&supply, &neg_demand)?.trim(MARGIN_TRIM);
    if let Some(c) = margin.renormalize() {
        log::warn!("joint margin renormalized (correction {c:e})");
    }
    MarginDist::new(margin)
}

fn clamp_small(x: f64) -> f64 {
    debug_assert!(x > -1e-9, "region difference {x} is significantly negative");
    if x < -CLAMP_TOL {
        log::debug!("region difference {x:e} exceeds rounding noise; clamped to 0");
    }
    x.max(0.0)
}

/// Splits the shortfall probability of `system` at load additions `l` and
/// fixed interconnection capacity `c` into its three disjoint parts.
pub fn shortfall_decomposition(m: &MarginDist, l: (f64, f64), c: f64, system: System) -> ShortfallDecomposition {
    let (own, other) = match system {
        System::A => l,
        System::B => (l.1, l.0),
    };
    let phi = |a: f64, b: f64| m.phi_for(system, a, b);
    let base = phi(own - c, f64::INFINITY);
    let at = phi(own, other);
    let imp = at - phi(own - c, other + c);
    let exp = phi(own + c, other - c) - at;
    ShortfallDecomposition {
        base: clamp_small(base),
        imp: clamp_small(imp),
        exp: clamp_small(exp),
    }
}

/// Shortfall probability of `system` under `policy`.
pub fn policy_lolp(d: &ShortfallDecomposition, policy: Policy, system: System) -> f64 {
    let p = match policy {
        Policy::Veto => d.base + d.imp,
        Policy::Share => d.base + d.imp + d.exp,
        Policy::AssistA | Policy::AssistB => {
            if policy.assisted() == Some(system) {
                d.base
            } else {
                d.base + d.imp + d.exp
            }
        }
    };
    p.clamp(0.0, 1.0)
}

/// Shortfall probability of `system` at fixed capacity `c`.
pub fn fixed_capacity_lolp(m: &MarginDist, l: (f64, f64), c: f64, policy: Policy, system: System) -> f64 {
    policy_lolp(&shortfall_decomposition(m, l, c, system), policy, system)
}

/// LOLE of one system after load additions `l`, mixing over the
/// interconnection capacity states.
pub fn adjusted_risk_for(
    m: &MarginDist,
    l: (f64, f64),
    ic: &InterconnectionSpec,
    policy: Policy,
    system: System,
) -> f64 {
    HOURS_PER_YEAR
        * ic.levels()
            .iter()
            .filter(|lv| lv.probability > 0.0)
            .map(|lv| lv.probability * fixed_capacity_lolp(m, l, lv.capacity_mw, policy, system))
            .sum::<f64>()
}

/// Interconnection-adjusted LOLE of both systems.
pub fn adjusted_risk(m: &MarginDist, l: (f64, f64), ic: &InterconnectionSpec, policy: Policy) -> RiskResult {
    RiskResult {
        r_a: adjusted_risk_for(m, l, ic, policy, System::A),
        r_b: adjusted_risk_for(m, l, ic, policy, System::B),
    }
}

/// Isolated-system LOLE, `h * P(M_x < 0)`.
pub fn baseline_risk(m: &MarginDist) -> RiskResult {
    RiskResult {
        r_a: HOURS_PER_YEAR * m.phi_for(System::A, 0.0, f64::INFINITY),
        r_b: HOURS_PER_YEAR * m.phi_for(System::B, 0.0, f64::INFINITY),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn unit_at_origin() -> MarginDist {
        MarginDist::new(Pmf2::delta((0.0, 0.0), 50.0).unwrap()).unwrap()
    }

    pub(crate) fn three_outcome() -> MarginDist {
        let pts = [(-2.0, 3.0), (1.0, -2.0), (-1.0, -1.0)];
        let p = Pmf2::from_points(0.5, pts.iter().map(|&v| (v, 1.0 / 3.0))).unwrap();
        MarginDist::new(p).unwrap()
    }

    #[test]
    fn phi_unit_cell_examples() {
        let m = unit_at_origin();
        assert_abs_diff_eq!(m.phi(25.0, f64::INFINITY), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(m.phi(0.0, f64::INFINITY), 0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(m.phi(0.0, 0.0), 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(m.phi_direct(System::A, 0.0, 0.0), 0.375, epsilon = 1e-12);
        assert_abs_diff_eq!(m.phi(f64::INFINITY, f64::INFINITY), 1.0, epsilon = 1e-12);
        assert_eq!(m.phi(f64::NEG_INFINITY, 0.0), 0.0);
    }

    #[test]
    fn diagonal_fraction_matches_clip() {
        for k in -12..=12 {
            let delta = k as f64 * 4.0;
            let clipped = cell_fraction(0.0, 0.0, 25.0, f64::INFINITY, delta);
            assert_abs_diff_eq!(diagonal_fraction(delta, 50.0), clipped, epsilon = 1e-14);
        }
    }

    #[test]
    fn three_outcome_decomposition() {
        let m = three_outcome();
        let d = shortfall_decomposition(&m, (0.0, 0.0), 1.5, System::A);
        assert_abs_diff_eq!(d.base, 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.base + d.imp, 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(d.base + d.imp + d.exp, 1.0, epsilon = 1e-12);
        let lolp = |p| policy_lolp(&d, p, System::A);
        assert_abs_diff_eq!(lolp(Policy::Veto), 2.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lolp(Policy::Share), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lolp(Policy::AssistA), 1.0 / 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(lolp(Policy::AssistB), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn zero_capacity_collapses_policies() {
        let m = three_outcome();
        for l in [(0.0, 0.0), (-1.2, 0.7), (0.3, 2.2)] {
            let d = shortfall_decomposition(&m, l, 0.0, System::A);
            assert_eq!(d.imp, 0.0);
            assert_eq!(d.exp, 0.0);
            let isolated = m.phi(l.0, f64::INFINITY);
            for p in Policy::ALL {
                assert_eq!(policy_lolp(&d, p, System::A), isolated);
            }
        }
    }

    #[test]
    fn huge_capacity_removes_base() {
        let m = three_outcome();
        let d = shortfall_decomposition(&m, (0.0, 0.0), 1e6, System::B);
        assert_eq!(d.base, 0.0);
    }

    #[test]
    fn zero_decomposition_zero_lolp() {
        let d = ShortfallDecomposition::default();
        for p in Policy::ALL {
            assert_eq!(policy_lolp(&d, p, System::A), 0.0);
            assert_eq!(policy_lolp(&d, p, System::B), 0.0);
        }
    }

    #[test]
    fn binomial_lines_examples() {
        let ic = binomial_lines(4, 750.0, 0.95).unwrap();
        let caps: Vec<f64> = ic.levels().iter().map(|l| l.capacity_mw).collect();
        assert_eq!(caps, vec![0.0, 750.0, 1500.0, 2250.0, 3000.0]);
        assert_abs_diff_eq!(ic.levels()[4].probability, 0.814_506_25, epsilon = 1e-15);
        let total: f64 = ic.levels().iter().map(|l| l.probability).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-15);
        let none = binomial_lines(0, 750.0, 0.95).unwrap();
        assert_eq!(
            none.levels(),
            &[CapacityLevel {
                capacity_mw: 0.0,
                probability: 1.0
            }]
        );
    }

    #[test]
    fn interconnection_validation() {
        let lv = |c, p| CapacityLevel {
            capacity_mw: c,
            probability: p,
        };
        assert!(InterconnectionSpec::new(vec![lv(0.0, 0.5), lv(0.0, 0.5)]).is_err());
        assert!(InterconnectionSpec::new(vec![lv(100.0, 0.5), lv(0.0, 0.5)]).is_err());
        assert!(InterconnectionSpec::new(vec![lv(0.0, 0.5), lv(10.0, 0.4)]).is_err());
        assert!(InterconnectionSpec::new(vec![lv(-1.0, 1.0)]).is_err());
        assert!(InterconnectionSpec::new(vec![]).is_err());
    }

    #[test]
    fn isolated_interconnection_gives_marginal_risk() {
        let m = three_outcome();
        let ic = InterconnectionSpec::fixed(0.0).unwrap();
        for p in Policy::ALL {
            let r = adjusted_risk(&m, (0.4, -1.1), &ic, p);
            assert_abs_diff_eq!(
                r.r_a,
                HOURS_PER_YEAR * m.phi_for(System::A, 0.4, f64::INFINITY),
                epsilon = 1e-9
            );
            assert_abs_diff_eq!(
                r.r_b,
                HOURS_PER_YEAR * m.phi_for(System::B, -1.1, f64::INFINITY),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn deterministic_surplus_has_no_risk() {
        let m = MarginDist::new(Pmf2::delta((5000.0, 5000.0), 50.0).unwrap()).unwrap();
        let ic = binomial_lines(4, 750.0, 0.95).unwrap();
        for p in Policy::ALL {
            let r = adjusted_risk(&m, (0.0, 0.0), &ic, p);
            assert_eq!((r.r_a, r.r_b), (0.0, 0.0));
        }
        let b = baseline_risk(&m);
        assert_eq!((b.r_a, b.r_b), (0.0, 0.0));
    }

    #[test]
    fn two_level_mixture_is_average() {
        let m = three_outcome();
        let lv = |c, p| CapacityLevel {
            capacity_mw: c,
            probability: p,
        };
        let ic = InterconnectionSpec::new(vec![lv(0.0, 0.5), lv(1.5, 0.5)]).unwrap();
        for p in Policy::ALL {
            let mixed = adjusted_risk(&m, (0.0, 0.0), &ic, p);
            for sys in [System::A, System::B] {
                let r0 = fixed_capacity_lolp(&m, (0.0, 0.0), 0.0, p, sys);
                let r1 = fixed_capacity_lolp(&m, (0.0, 0.0), 1.5, p, sys);
                assert_abs_diff_eq!(mixed.get(sys), HOURS_PER_YEAR * 0.5 * (r0 + r1), epsilon = 1e-9);
            }
        }
    }

    #[test]
    fn single_unit_baseline() {
        // one 100 MW unit at 90%, demand 50, no wind
        let g = Pmf1::new(0.0, 50.0, vec![0.1, 0.0, 0.9]).unwrap();
        let d = Pmf2::delta((50.0, 0.0), 50.0).unwrap();
        let w = Pmf2::delta((0.0, 0.0), 50.0).unwrap();
        let other = Pmf1::delta(1000.0, 50.0).unwrap();
        let m = build_margin(&g, &other, &w, &d, (0.0, 0.0)).unwrap();
        let r = baseline_risk(&m);
        assert_abs_diff_eq!(r.r_a, 876.0, epsilon = 1e-9);
        assert_eq!(r.r_b, 0.0);
        let three = baseline_risk(&three_outcome());
        assert_abs_diff_eq!(three.r_a, HOURS_PER_YEAR * 2.0 / 3.0, epsilon = 1e-9);
    }

    #[test]
    fn build_margin_point_masses() {
        let ga = Pmf1::delta(1000.0, 50.0).unwrap();
        let gb = Pmf1::delta(2000.0, 50.0).unwrap();
        let w = Pmf2::delta((100.0, 150.0), 50.0).unwrap();
        let d = Pmf2::delta((700.0, 900.0), 50.0).unwrap();
        let m = build_margin(&ga, &gb, &w, &d, (50.0, 100.0)).unwrap();
        assert_abs_diff_eq!(m.pmf().mass_at(350.0, 1150.0), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn build_margin_means_add() {
        let ga = Pmf1::new(1000.0, 50.0, vec![0.1, 0.2, 0.3, 0.4]).unwrap();
        let gb = Pmf1::new(2000.0, 50.0, vec![0.5, 0.5]).unwrap();
        let w = Pmf2::from_points(50.0, [((0.0, 0.0), 0.3), ((120.0, 40.0), 0.7)]).unwrap();
        let d = Pmf2::from_points(50.0, [((800.0, 1500.0), 0.6), ((910.0, 1720.0), 0.4)]).unwrap();
        let m = build_margin(&ga, &gb, &w, &d, (37.0, 0.0)).unwrap();
        let (ma, mb) = m.pmf().mean();
        let (wa, wb) = w.mean();
        let (da, db) = d.mean();
        assert_abs_diff_eq!(ma, ga.mean() + wa - da - 37.0, epsilon = 1e-6);
        assert_abs_diff_eq!(mb, gb.mean() + wb - db, epsilon = 1e-6);
        let bad = Pmf1::delta(0.0, 10.0).unwrap();
        assert!(matches!(
            build_margin(&bad, &gb, &w, &d, (0.0, 0.0)),
            Err(Error::StepMismatch { .. })
        ));
    }

    #[test]
    fn policy_parsing() {
        for p in Policy::ALL {
            assert_eq!(p.name().parse::<Policy>().unwrap(), p);
        }
        assert!("assist".parse::<Policy>().is_err());
    }
}
