//! Joint demand and wind distributions built from hourly series.
//!
//! Demand is taken empirically: each hour contributes `1/N` at the pair of
//! simultaneous system demands. Wind in system B is derived from the system A
//! marginal through a Gaussian copula, discretized by integrating the copula
//! conditional distribution over pairs of marginal bins.

use std::f64::consts::PI;
use std::path::Path;

use chrono::{Datelike, Duration, NaiveDate, NaiveDateTime, Timelike};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::gridpmf::{Pmf1, Pmf2};
use crate::normal;
use crate::{Error, Result};

/// Timestamp format used for every CSV written by this crate.
pub const TIMESTAMP_FORMAT: &str = "%Y-%m-%dT%H:%M:%SZ";

/// Hourly values: demand in MW or wind capacity factor.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlySeries {
    pub timestamps: Vec<NaiveDateTime>,
    pub values: Vec<f64>,
}

impl HourlySeries {
    pub fn new(timestamps: Vec<NaiveDateTime>, values: Vec<f64>) -> Result<Self> {
        if timestamps.len() != values.len() {
            return Err(Error::input(format!(
                "{} timestamps but {} values",
                timestamps.len(),
                values.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::input(format!("non-finite series value {v}")));
        }
        Ok(Self { timestamps, values })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.len() as f64
    }

    /// Removes every hour falling on 29 February.
    pub fn drop_leap_days(&self) -> Self {
        let (timestamps, values) = self
            .timestamps
            .iter()
            .zip(&self.values)
            .filter(|(t, _)| !is_leap_day(t))
            .map(|(t, v)| (*t, *v))
            .unzip();
        Self { timestamps, values }
    }

    /// Checks that timestamps advance by exactly one hour, treating 29
    /// February as absent.
    pub fn check_hourly(&self) -> Result<()> {
        for w in self.timestamps.windows(2) {
            let expected = next_hour(w[0]);
            if w[1] != expected {
                return Err(Error::input(format!(
                    "series gap or disorder: {} is followed by {}, expected {}",
                    w[0], w[1], expected
                )));
            }
        }
        Ok(())
    }

    pub fn check_capacity_factors(&self) -> Result<()> {
        match self.values.iter().position(|v| !(0.0..=1.0).contains(v)) {
            Some(k) => Err(Error::input(format!(
                "capacity factor {} at {} is outside [0, 1]",
                self.values[k], self.timestamps[k]
            ))),
            None => Ok(()),
        }
    }
}

fn is_leap_day(t: &NaiveDateTime) -> bool {
    t.month() == 2 && t.day() == 29
}

fn next_hour(t: NaiveDateTime) -> NaiveDateTime {
    let n = t + Duration::hours(1);
    if is_leap_day(&n) {
        n + Duration::days(1)
    } else {
        n
    }
}

/// `len` hourly timestamps from midnight on 1 January of `start_year`,
/// skipping 29 February.
pub fn hourly_timestamps(start_year: i32, len: usize) -> Vec<NaiveDateTime> {
    let mut t = NaiveDate::from_ymd_opt(start_year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid start date");
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        out.push(t);
        t = next_hour(t);
    }
    out
}

/// Empirical joint demand distribution. Hour `t` contributes `1/N` at
/// `(d_a(t), scale_b * d_b(t))`.
pub fn joint_demand_pmf(
    series_a: &HourlySeries,
    series_b: &HourlySeries,
    scale_b: f64,
    grid_step: f64,
) -> Result<Pmf2> {
    if series_a.is_empty() {
        return Err(Error::input("empty demand series"));
    }
    if series_a.timestamps != series_b.timestamps {
        return Err(Error::input("demand series are not aligned on identical timestamps"));
    }
    if !(scale_b > 0.0 && scale_b.is_finite()) {
        return Err(Error::input(format!("demand scale must be positive, got {scale_b}")));
    }
    let w = 1.0 / series_a.len() as f64;
    let points = series_a
        .values
        .iter()
        .zip(&series_b.values)
        .map(|(a, b)| ((*a, scale_b * b), w));
    let mut pmf = Pmf2::from_points(grid_step, points)?;
    if let Some(c) = pmf.renormalize() {
        log::warn!("joint demand pmf renormalized (correction {c:e})");
    }
    Ok(pmf)
}

/// Marginal pmf of wind output `installed * cf`.
pub fn wind_power_pmf(cf_series: &HourlySeries, installed_mw: f64, grid_step: f64) -> Result<Pmf1> {
    if !(installed_mw > 0.0 && installed_mw.is_finite()) {
        return Err(Error::input(format!(
            "installed wind capacity must be positive, got {installed_mw}"
        )));
    }
    if cf_series.is_empty() {
        return Err(Error::input("empty capacity factor series"));
    }
    cf_series.check_capacity_factors()?;
    let w = 1.0 / cf_series.len() as f64;
    let mut pmf = Pmf1::from_points(grid_step, cf_series.values.iter().map(|cf| (installed_mw * cf, w)))?.trim(0.0);
    if let Some(c) = pmf.renormalize() {
        log::warn!("wind pmf renormalized (correction {c:e})");
    }
    Ok(pmf)
}

/// Empirical joint wind distribution from simultaneous capacity factors.
pub fn joint_wind_from_series(
    cf_a: &HourlySeries,
    cf_b: &HourlySeries,
    installed: (f64, f64),
    grid_step: f64,
) -> Result<Pmf2> {
    if cf_a.is_empty() {
        return Err(Error::input("empty capacity factor series"));
    }
    if cf_a.timestamps != cf_b.timestamps {
        return Err(Error::input("wind series are not aligned on identical timestamps"));
    }
    cf_a.check_capacity_factors()?;
    cf_b.check_capacity_factors()?;
    let w = 1.0 / cf_a.len() as f64;
    let pts = cf_a
        .values
        .iter()
        .zip(&cf_b.values)
        .map(|(a, b)| ((installed.0 * a, installed.1 * b), w));
    Ok(Pmf2::from_points(grid_step, pts)?.trim(0.0))
}

/// Gaussian copula dependence parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CopulaSpec {
    pub rho: f64,
}

impl CopulaSpec {
    pub fn new(rho: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&rho) {
            return Err(Error::input(format!("copula rho must lie in [0, 1], got {rho}")));
        }
        Ok(Self { rho })
    }
}

/// Conditional distribution function of the Gaussian copula,
/// `h(x, v; rho) = P(X <= x | V = v)`.
///
/// At `rho = ±1` the conditional law is a point mass and `h` becomes a step.
pub fn gaussian_copula_h(x: f64, v: f64, rho: f64) -> f64 {
    if rho >= 1.0 {
        return if x >= v { 1.0 } else { 0.0 };
    }
    if rho <= -1.0 {
        return if x >= 1.0 - v { 1.0 } else { 0.0 };
    }
    if rho == 0.0 {
        return x.clamp(0.0, 1.0);
    }
    h_from_quantiles(normal::inv_cdf(x), normal::inv_cdf(v), rho)
}

fn h_from_quantiles(zx: f64, zv: f64, rho: f64) -> f64 {
    if zx == f64::NEG_INFINITY {
        return 0.0;
    }
    if zx == f64::INFINITY {
        return 1.0;
    }
    normal::cdf((zx - rho * zv) / (1.0 - rho * rho).sqrt())
}

/// Eight-point Gauss-Legendre rule on [-1, 1].
const GL_NODES: [f64; 4] = [
    0.183_434_642_495_649_8,
    0.525_532_409_916_329_0,
    0.796_666_477_413_626_7,
    0.960_289_856_497_536_3,
];
const GL_WEIGHTS: [f64; 4] = [
    0.362_683_783_378_362_0,
    0.313_706_645_877_887_3,
    0.222_381_034_453_374_5,
    0.101_228_536_290_376_3,
];

/// Normal quantile range treated as the whole real line; the excluded tails
/// carry less than 1e-18 probability.
const Z_LIMIT: f64 = 9.0;

/// Probabilities of every pair of marginal bins under the Gaussian copula.
///
/// `masses` are the bin probabilities (shared by both margins). Entry `[i][j]`
/// is `P(U in bin i, V in bin j)`: the integral over `u` in bin `i` of the
/// conditional mass `h(v_j, u) - h(v_{j-1}, u)` of bin `j`. The integral is
/// taken in normal-quantile coordinates `u = Phi(z)`, where the integrand is
/// smooth, by composite Gauss-Legendre quadrature on panels no wider than half
/// the conditional standard deviation.
pub fn copula_bin_matrix(masses: &[f64], rho: f64) -> Vec<Vec<f64>> {
    let n = masses.len();
    let mut bounds = Vec::with_capacity(n + 1);
    bounds.push(0.0);
    let mut acc = 0.0;
    for m in masses {
        acc += m;
        bounds.push(acc);
    }
    let total = acc;
    let mut out = vec![vec![0.0; n]; n];

    if rho >= 1.0 {
        for i in 0..n {
            for j in 0..n {
                let lo = bounds[i].max(bounds[j]);
                let hi = bounds[i + 1].min(bounds[j + 1]);
                out[i][j] = (hi - lo).max(0.0);
            }
        }
        return out;
    }

    let zb: Vec<f64> = bounds
        .iter()
        .enumerate()
        .map(|(k, b)| {
            if k == 0 {
                -Z_LIMIT
            } else if k == n {
                Z_LIMIT
            } else {
                normal::inv_cdf(b / total).clamp(-Z_LIMIT, Z_LIMIT)
            }
        })
        .collect();
    let sd = (1.0 - rho * rho).sqrt();
    let panel = 0.5 * sd.max(0.01);
    let mut cond = vec![0.0; n + 1];
    cond[n] = 1.0;

    for i in 0..n {
        let (z0, z1) = (zb[i], zb[i + 1]);
        if masses[i] <= 0.0 || z1 <= z0 {
            continue;
        }
        let panels = ((z1 - z0) / panel).ceil().max(1.0) as usize;
        let width = (z1 - z0) / panels as f64;
        for k in 0..panels {
            let mid = z0 + (k as f64 + 0.5) * width;
            let half = 0.5 * width;
            for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS) {
                for z in [mid - half * x, mid + half * x] {
                    let weight = w * half * normal::pdf(z) * total;
                    for (c, zv) in cond[1..n].iter_mut().zip(&zb[1..n]) {
                        *c = normal::cdf((zv - rho * z) / sd);
                    }
                    for j in 0..n {
                        if masses[j] > 0.0 {
                            out[i][j] += weight * (cond[j + 1] - cond[j]).max(0.0);
                        }
                    }
                }
            }
        }
    }
    out
}

/// Joint wind distribution for two systems sharing one marginal shape.
///
/// `marginal` is the system A wind output pmf for `installed.0` MW; system B
/// output is the same capacity factor scaled to `installed.1` MW. The copula
/// couples the two margins.
pub fn joint_wind_pmf(marginal: &Pmf1, copula: CopulaSpec, installed: (f64, f64)) -> Result<Pmf2> {
    marginal.check_normalized()?;
    let (ia, ib) = installed;
    if !(ia > 0.0 && ib > 0.0 && ia.is_finite() && ib.is_finite()) {
        return Err(Error::input("installed wind capacities must be positive"));
    }
    let ratio = ib / ia;
    let step = marginal.step();
    let bins = copula_bin_matrix(marginal.masses(), copula.rho);
    let mut points = Vec::new();
    for (i, row) in bins.iter().enumerate() {
        for (j, &p) in row.iter().enumerate() {
            if p > 0.0 {
                points.push(((marginal.value(i), ratio * marginal.value(j)), p));
            }
        }
    }
    let mut pmf = Pmf2::from_points(step, points)?.trim(0.0);
    if let Some(c) = pmf.renormalize() {
        log::warn!("joint wind pmf renormalized (correction {c:e})");
    }
    Ok(pmf)
}

/// Shape of a synthetic hourly demand profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub mean_mw: f64,
    /// Relative winter/summer swing.
    pub seasonal_amplitude: f64,
    /// Relative peak/trough swing within a day.
    pub diurnal_amplitude: f64,
    /// Relative reduction at weekends.
    pub weekend_reduction: f64,
    /// Relative standard deviation of the persistent weather component.
    pub noise_sd: f64,
}

impl DemandProfile {
    pub fn gb_like() -> Self {
        Self {
            mean_mw: 34_500.0,
            seasonal_amplitude: 0.17,
            diurnal_amplitude: 0.2,
            weekend_reduction: 0.08,
            noise_sd: 0.035,
        }
    }

    /// Nominal (unscaled) continental profile with heating-driven seasonality.
    pub fn fr_like() -> Self {
        Self {
            mean_mw: 54_000.0,
            seasonal_amplitude: 0.24,
            diurnal_amplitude: 0.15,
            weekend_reduction: 0.07,
            noise_sd: 0.045,
        }
    }
}

/// Shape of a synthetic wind capacity-factor profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WindProfile {
    /// Location of the latent Gaussian weather state.
    pub level: f64,
    /// Winter uplift of the latent state.
    pub seasonal_amplitude: f64,
    /// Hour-to-hour persistence of the latent state.
    pub persistence: f64,
    pub spread: f64,
}

impl WindProfile {
    pub fn gb_like() -> Self {
        Self {
            level: -0.6,
            seasonal_amplitude: 0.3,
            persistence: 0.985,
            spread: 0.95,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum SeriesProfile {
    Demand(DemandProfile),
    Wind(WindProfile),
}

fn season(t: &NaiveDateTime) -> f64 {
    // +1 in mid-January, -1 in mid-July
    (2.0 * PI * (f64::from(t.ordinal0()) - 15.0) / 365.0).cos()
}

fn diurnal(hour: u32) -> f64 {
    let h = f64::from(hour);
    let base = -(2.0 * PI * (h - 4.0) / 24.0).cos();
    let evening = (-((h - 18.0) / 2.0).powi(2)).exp();
    0.5 * (0.7 * base + 0.6 * evening)
}

/// Deterministic synthetic hourly series starting 1 January 2010, with leap
/// days omitted.
pub fn synth_series(seed: u64, length: usize, profile: &SeriesProfile) -> Result<HourlySeries> {
    if length == 0 {
        return Err(Error::input("synthetic series length must be at least 1"));
    }
    let timestamps = hourly_timestamps(2010, length);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = Vec::with_capacity(length);
    match profile {
        SeriesProfile::Demand(p) => {
            let rho: f64 = 0.995;
            let innov = (1.0 - rho * rho).sqrt();
            let mut x: f64 = StandardNormal.sample(&mut rng);
            for t in &timestamps {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + innov * e;
                let weekend = matches!(t.weekday(), chrono::Weekday::Sat | chrono::Weekday::Sun);
                let level = 1.0 + p.seasonal_amplitude * season(t) + p.diurnal_amplitude * diurnal(t.hour())
                    - if weekend { p.weekend_reduction } else { 0.0 }
                    + p.noise_sd * x;
                values.push((p.mean_mw * level).max(0.0));
            }
        }
        SeriesProfile::Wind(p) => {
            let rho = p.persistence;
            let innov = (1.0 - rho * rho).sqrt();
            let mut x: f64 = StandardNormal.sample(&mut rng);
            for t in &timestamps {
                let e: f64 = StandardNormal.sample(&mut rng);
                x = rho * x + innov * e;
                let z = p.level + p.seasonal_amplitude * season(t) + p.spread * x;
                values.push(normal::cdf(z).clamp(0.0, 1.0));
            }
        }
    }
    HourlySeries::new(timestamps, values)
}

fn parse_timestamp(s: &str) -> Result<NaiveDateTime> {
    let s = s.trim();
    if let Ok(t) = chrono::DateTime::parse_from_rfc3339(s) {
        return Ok(t.naive_utc());
    }
    for fmt in [
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M",
    ] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    Err(Error::input(format!("unparseable timestamp {s:?}")))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.display().to_string(),
        source,
    }
}

fn read_columns(path: &Path, expected: &[&[&str]]) -> Result<(Vec<NaiveDateTime>, Vec<Vec<f64>>)> {
    let file = std::fs::File::open(path).map_err(io_err(path))?;
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if !expected
        .iter()
        .any(|cols| cols.iter().copied().eq(headers.iter().map(String::as_str)))
    {
        return Err(Error::input(format!(
            "{}: unexpected header {:?}, expected one of {:?}",
            path.display(),
            headers,
            expected
        )));
    }
    let ncols = headers.len() - 1;
    let mut stamps = Vec::new();
    let mut cols = vec![Vec::new(); ncols];
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let t = parse_timestamp(&rec[0])?;
        if is_leap_day(&t) {
            continue;
        }
        stamps.push(t);
        for (c, col) in cols.iter_mut().enumerate() {
            let v: f64 = rec[c + 1].parse().map_err(|_| {
                Error::input(format!(
                    "{}: row {}: bad number {:?}",
                    path.display(),
                    line + 2,
                    &rec[c + 1]
                ))
            })?;
            col.push(v);
        }
    }
    if stamps.is_empty() {
        return Err(Error::input(format!("{}: no data rows", path.display())));
    }
    Ok((stamps, cols))
}

/// Demand file: `timestamp,demand_a_mw,demand_b_mw`.
pub fn read_demand_csv(path: &Path) -> Result<(HourlySeries, HourlySeries)> {
    let (t, mut cols) = read_columns(path, &[&["timestamp", "demand_a_mw", "demand_b_mw"]])?;
    let b = HourlySeries::new(t.clone(), cols.pop().unwrap())?;
    let a = HourlySeries::new(t, cols.pop().unwrap())?;
    a.check_hourly()?;
    Ok((a, b))
}

/// Wind file: `timestamp,cf_a` or `timestamp,cf_a,cf_b`.
pub fn read_wind_csv(path: &Path) -> Result<(HourlySeries, Option<HourlySeries>)> {
    let (t, mut cols) = read_columns(path, &[&["timestamp", "cf_a"], &["timestamp", "cf_a", "cf_b"]])?;
    let b = if cols.len() == 2 {
        let s = HourlySeries::new(t.clone(), cols.pop().unwrap())?;
        s.check_capacity_factors()?;
        Some(s)
    } else {
        None
    };
    let a = HourlySeries::new(t, cols.pop().unwrap())?;
    a.check_hourly()?;
    a.check_capacity_factors()?;
    Ok((a, b))
}

pub fn write_demand_csv(path: &Path, a: &HourlySeries, b: &HourlySeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "demand_a_mw", "demand_b_mw"])?;
    for ((t, x), y) in a.timestamps.iter().zip(&a.values).zip(&b.values) {
        w.write_record([
            t.format(TIMESTAMP_FORMAT).to_string(),
            format!("{x:.1}"),
            format!("{y:.1}"),
        ])?;
    }
    w.flush().map_err(io_err(path))
}

pub fn write_wind_csv(path: &Path, cf_a: &HourlySeries) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["timestamp", "cf_a"])?;
    for (t, x) in cf_a.timestamps.iter().zip(&cf_a.values) {
        w.write_record([t.format(TIMESTAMP_FORMAT).to_string(), format!("{x:.4}")])?;
    }
    w.flush().map_err(io_err(path))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn series(values: Vec<f64>) -> HourlySeries {
        HourlySeries::new(hourly_timestamps(2010, values.len()), values).unwrap()
    }

    #[test]
    fn single_on_grid_hour_is_delta() {
        let p = joint_demand_pmf(&series(vec![100.0]), &series(vec![200.0]), 1.0, 50.0).unwrap();
        assert_eq!(p.mass_at(100.0, 200.0), 1.0);
        assert_abs_diff_eq!(p.total(), 1.0);
    }

    #[test]
    fn two_hours_two_masses() {
        let p = joint_demand_pmf(&series(vec![100.0, 200.0]), &series(vec![200.0, 100.0]), 1.0, 50.0).unwrap();
        assert_eq!(p.mass_at(100.0, 200.0), 0.5);
        assert_eq!(p.mass_at(200.0, 100.0), 0.5);
    }

    #[test]
    fn scaling_b_scales_mean() {
        let a = series(vec![1000.0, 1234.0, 1717.0, 990.0]);
        let b = series(vec![2000.0, 2111.0, 1822.0, 3001.0]);
        let p1 = joint_demand_pmf(&a, &b, 1.0, 50.0).unwrap();
        let p15 = joint_demand_pmf(&a, &b, 1.5, 50.0).unwrap();
        assert_abs_diff_eq!(p15.mean().1, 1.5 * p1.mean().1, epsilon = 1e-6);
        assert_abs_diff_eq!(p15.mean().0, a.mean(), epsilon = 1e-6);
        assert_abs_diff_eq!(p1.mean().1, b.mean(), epsilon = 1e-6);
    }

    #[test]
    fn misaligned_or_empty_demand_rejected() {
        let a = series(vec![1.0, 2.0]);
        let mut b = series(vec![1.0, 2.0]);
        b.timestamps[1] += Duration::hours(1);
        assert!(joint_demand_pmf(&a, &b, 1.0, 50.0).is_err());
        let e = series(vec![]);
        assert!(joint_demand_pmf(&e, &e, 1.0, 50.0).is_err());
    }

    #[test]
    fn wind_marginal_examples() {
        let p = wind_power_pmf(&series(vec![0.0; 5]), 13_000.0, 50.0).unwrap();
        assert_eq!(p.mass_at(0.0), 1.0);
        let p = wind_power_pmf(&series(vec![1.0; 5]), 13_000.0, 50.0).unwrap();
        assert_eq!(p.mass_at(13_000.0), 1.0);
        let p = wind_power_pmf(&series(vec![0.2, 0.4]), 1000.0, 50.0).unwrap();
        assert_eq!(p.mass_at(200.0), 0.5);
        assert_eq!(p.mass_at(400.0), 0.5);
        assert!(p.origin() >= 0.0 && p.max_value() <= 1000.0);
        assert!(wind_power_pmf(&series(vec![1.2]), 1000.0, 50.0).is_err());
        assert!(wind_power_pmf(&series(vec![0.2]), 0.0, 50.0).is_err());
    }

    #[test]
    fn h_function_examples() {
        for &(x, v) in &[(0.1, 0.3), (0.7, 0.01), (0.999, 0.5)] {
            assert_abs_diff_eq!(gaussian_copula_h(x, v, 0.0), x, epsilon = 1e-15);
        }
        for rho in [0.0, 0.3, 0.9] {
            assert_eq!(gaussian_copula_h(0.5, 0.5, rho), 0.5);
        }
        // 30-digit reference: Phi(Phi^-1(0.9) / 0.8)
        assert_abs_diff_eq!(
            gaussian_copula_h(0.9, 0.5, 0.6),
            0.945_415_500_910_091_4,
            epsilon = 1e-12
        );
    }

    #[test]
    fn h_function_monotone_and_limits() {
        let mut prev = 0.0;
        for k in 1..100 {
            let h = gaussian_copula_h(k as f64 / 100.0, 0.3, 0.7);
            assert!(h > prev);
            prev = h;
        }
        assert_eq!(gaussian_copula_h(0.4, 0.5, 1.0), 0.0);
        assert_eq!(gaussian_copula_h(0.6, 0.5, 1.0), 1.0);
        let near = gaussian_copula_h(0.6, 0.5, 0.999_999);
        assert!(near > 0.99);
    }

    fn four_bin() -> Pmf1 {
        Pmf1::new(0.0, 50.0, vec![0.1, 0.4, 0.3, 0.2]).unwrap()
    }

    #[test]
    fn independence_copula_is_product() {
        let m = four_bin();
        let j = joint_wind_pmf(&m, CopulaSpec::new(0.0).unwrap(), (150.0, 150.0)).unwrap();
        for i in 0..4 {
            for k in 0..4 {
                let e = m.masses()[i] * m.masses()[k];
                assert_abs_diff_eq!(j.mass_at(m.value(i), m.value(k)), e, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn comonotonic_copula_is_diagonal() {
        let m = four_bin();
        let j = joint_wind_pmf(&m, CopulaSpec::new(1.0).unwrap(), (150.0, 150.0)).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(j.mass_at(m.value(i), m.value(i)), m.masses()[i], epsilon = 1e-15);
        }
        let near = copula_bin_matrix(m.masses(), 0.999_9);
        let diag: f64 = (0..4).map(|i| near[i][i]).sum();
        assert!(diag > 0.95, "diag mass {diag}");
    }

    #[test]
    fn joint_wind_marginals_match() {
        let cf: Vec<f64> = (0..2000).map(|k| ((k * 37 % 101) as f64 / 100.0).powf(1.7)).collect();
        let m = wind_power_pmf(&series(cf), 13_000.0, 50.0).unwrap();
        let j = joint_wind_pmf(&m, CopulaSpec::new(0.5376).unwrap(), (13_000.0, 13_000.0)).unwrap();
        let ma = j.marginal_a();
        let mb = j.marginal_b();
        for k in 0..m.len() {
            let v = m.value(k);
            assert_abs_diff_eq!(ma.mass_at(v), m.masses()[k], epsilon = 1e-6);
            assert_abs_diff_eq!(mb.mass_at(v), m.masses()[k], epsilon = 1e-6);
        }
    }

    #[test]
    fn b_marginal_rescales() {
        let m = four_bin();
        let j = joint_wind_pmf(&m, CopulaSpec::new(0.4).unwrap(), (150.0, 300.0)).unwrap();
        let mb = j.marginal_b();
        assert_abs_diff_eq!(mb.mean(), 2.0 * m.mean(), epsilon = 1e-6);
        assert_abs_diff_eq!(j.marginal_a().mean(), m.mean(), epsilon = 1e-9);
    }

    #[test]
    fn leap_days_dropped_and_gaps_rejected() {
        let start = NaiveDate::from_ymd_opt(2012, 2, 28)
            .unwrap()
            .and_hms_opt(22, 0, 0)
            .unwrap();
        let stamps: Vec<_> = (0..30).map(|h| start + Duration::hours(h)).collect();
        let s = HourlySeries::new(stamps, vec![1.0; 30]).unwrap();
        assert!(s.check_hourly().is_err());
        let d = s.drop_leap_days();
        assert_eq!(d.len(), 6);
        d.check_hourly().unwrap();

        let mut g = series(vec![1.0; 5]);
        g.timestamps.remove(2);
        g.values.remove(2);
        assert!(g.check_hourly().is_err());
    }

    #[test]
    fn synth_is_deterministic_and_bounded() {
        let wind = SeriesProfile::Wind(WindProfile::gb_like());
        let a = synth_series(7, 8760, &wind).unwrap();
        let b = synth_series(7, 8760, &wind).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 8760);
        assert!(a.values.iter().all(|v| (0.0..=1.0).contains(v)));
        let c = synth_series(8, 8760, &wind).unwrap();
        assert_ne!(a, c);
        let d = synth_series(1, 8760, &SeriesProfile::Demand(DemandProfile::gb_like())).unwrap();
        assert!(d.values.iter().all(|v| *v > 0.0));
        d.check_hourly().unwrap();
        assert!(synth_series(1, 0, &wind).is_err());
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let a = series(vec![100.0, 150.5]);
        let b = series(vec![300.0, 310.0]);
        let path = dir.path().join("demand.csv");
        write_demand_csv(&path, &a, &b).unwrap();
        let (ra, rb) = read_demand_csv(&path).unwrap();
        assert_eq!(ra, a);
        assert_eq!(rb, b);

        let path = dir.path().join("wind.csv");
        std::fs::write(
            &path,
            "timestamp,cf_a,cf_b\n2010-01-01T00:00:00Z,0.5,0.25\n2010-01-01T01:00:00Z,0.1,0.2\n",
        )
        .unwrap();
        let (wa, wb) = read_wind_csv(&path).unwrap();
        assert_eq!(wa.values, vec![0.5, 0.1]);
        assert_eq!(wb.unwrap().values, vec![0.25, 0.2]);

        std::fs::write(&path, "time,cf\n2010-01-01T00:00:00Z,0.5\n").unwrap();
        assert!(read_wind_csv(&path).is_err());
    }
}
