#![allow(dead_code)]

use std::sync::Arc;

use rand::Rng;
use tiecap::allocation::Study;
use tiecap::gridpmf::{Pmf1, Pmf2};
use tiecap::risk_engine::{binomial_lines, InterconnectionSpec, MarginDist};
use tiecap::scenario::{
    calibrate_scenario, gb_fr_like, prepare_study, DataConfig, ScenarioInputs, ScenarioSeries, ScenarioSpec,
};

/// Discretized bivariate normal margin on a `step` grid, `half_width` cells
/// each side of the mean.
pub fn gaussian_margin(mean: (f64, f64), sd: (f64, f64), corr: f64, step: f64, half_width: i32) -> MarginDist {
    let mut masses = Vec::new();
    let n = (2 * half_width + 1) as usize;
    let origin = (
        mean.0 - f64::from(half_width) * step,
        mean.1 - f64::from(half_width) * step,
    );
    for i in 0..n {
        for j in 0..n {
            let za = (origin.0 + i as f64 * step - mean.0) / sd.0;
            let zb = (origin.1 + j as f64 * step - mean.1) / sd.1;
            let q = (za * za - 2.0 * corr * za * zb + zb * zb) / (1.0 - corr * corr);
            masses.push((-0.5 * q).exp());
        }
    }
    let total: f64 = masses.iter().sum();
    masses.iter_mut().for_each(|m| *m /= total);
    MarginDist::new(Pmf2::new(origin, step, n, n, masses).unwrap()).unwrap()
}

/// Identical systems with positively correlated margins.
pub fn symmetric_study(capacity: f64) -> Study {
    let m = gaussian_margin((1500.0, 1500.0), (500.0, 500.0), 0.3, 50.0, 45);
    Study::new(Arc::new(m), lines(capacity))
}

/// Two dissimilar systems.
pub fn asymmetric_study(capacity: f64) -> Study {
    let m = gaussian_margin((1200.0, 2600.0), (350.0, 780.0), 0.4, 50.0, 70);
    Study::new(Arc::new(m), lines(capacity))
}

pub fn lines(capacity: f64) -> InterconnectionSpec {
    binomial_lines(4, capacity / 4.0, 0.95).unwrap()
}

/// Random pmf with `n` cells of random mass, possibly with interior zeros.
pub fn random_pmf1(rng: &mut impl Rng, origin: f64, step: f64, n: usize) -> Pmf1 {
    let mut m: Vec<f64> = (0..n)
        .map(|_| if rng.random_bool(0.2) { 0.0 } else { rng.random::<f64>() })
        .collect();
    m[0] += 0.1;
    let t: f64 = m.iter().sum();
    m.iter_mut().for_each(|x| *x /= t);
    Pmf1::new(origin, step, m).unwrap()
}

pub fn random_pmf2(rng: &mut impl Rng, origin: (f64, f64), step: f64, na: usize, nb: usize) -> Pmf2 {
    let mut m: Vec<f64> = (0..na * nb)
        .map(|_| if rng.random_bool(0.3) { 0.0 } else { rng.random::<f64>() })
        .collect();
    m[0] += 0.1;
    let t: f64 = m.iter().sum();
    m.iter_mut().for_each(|x| *x /= t);
    Pmf2::new(origin, step, na, nb, m).unwrap()
}

/// Direct double-sum 2D convolution, returned as `(origin, na, nb, masses)`.
pub fn naive_convolve2(p: &Pmf2, q: &Pmf2) -> ((f64, f64), usize, usize, Vec<f64>) {
    let (pa, pb) = p.shape();
    let (qa, qb) = q.shape();
    let (na, nb) = (pa + qa - 1, pb + qb - 1);
    let mut out = vec![0.0; na * nb];
    for i in 0..pa {
        for j in 0..pb {
            for k in 0..qa {
                for l in 0..qb {
                    out[(i + k) * nb + j + l] += p.get(i, j) * q.get(k, l);
                }
            }
        }
    }
    let origin = (p.origin().0 + q.origin().0, p.origin().1 + q.origin().1);
    (origin, na, nb, out)
}

/// Synthetic GB/FR-like desk-scale scenario, calibrated.
pub struct DeskScale {
    pub spec: ScenarioSpec,
    pub inputs: ScenarioInputs,
    pub study: Study,
}

pub fn desk_scale(seed: u64) -> DeskScale {
    let mut spec = gb_fr_like(DataConfig {
        demand_csv: "demand.csv".into(),
        wind_csv: "wind.csv".into(),
    });
    let series = ScenarioSeries::synthetic(seed, 5 * 8760).unwrap();
    let inputs = ScenarioInputs::new(&spec, &series).unwrap();
    calibrate_scenario(&mut spec, &inputs).unwrap();
    let study = prepare_study(&spec, &inputs).unwrap();
    DeskScale { spec, inputs, study }
}
