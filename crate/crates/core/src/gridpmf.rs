//! Probability mass functions on regular MW grids.
//!
//! A [`Pmf1`] places mass `masses[k]` at `origin + k * step`. A [`Pmf2`] does
//! the same on a square grid shared by both axes, stored row-major with the
//! first (system A) axis as rows.
//!
//! Off-grid values are deposited by linear (bilinear in 2D) interpolation onto
//! the neighbouring grid points, which conserves mass and the first moment.

use rustfft::num_complex::Complex;
use rustfft::{FftDirection, FftPlanner};

use crate::{Error, Result};

/// Accepted deviation of total mass from one.
pub const NORM_TOL: f64 = 1e-9;

/// Fractional index distance below which a value counts as on-grid.
const SNAP: f64 = 1e-12;

/// Above this many multiply-adds, 1D convolution switches to the FFT path.
const DIRECT_1D_LIMIT: usize = 1 << 22;

fn check_step(step: f64) -> Result<()> {
    if step.is_finite() && step > 0.0 {
        Ok(())
    } else {
        Err(Error::input(format!("grid step must be positive, got {step}")))
    }
}

fn check_masses(masses: &[f64]) -> Result<()> {
    match masses.iter().position(|m| !m.is_finite() || *m < 0.0) {
        Some(k) => Err(Error::InvalidMass(format!("mass {} at index {k}", masses[k]))),
        None => Ok(()),
    }
}

pub(crate) fn same_step(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs())
}

fn ensure_same_step(a: f64, b: f64) -> Result<()> {
    if same_step(a, b) {
        Ok(())
    } else {
        Err(Error::StepMismatch { left: a, right: b })
    }
}

/// Splits a fractional grid position into `(index, weight on index + 1)`.
fn split_position(pos: f64) -> (i64, f64) {
    let k = pos.floor();
    let frac = pos - k;
    if frac <= SNAP {
        (k as i64, 0.0)
    } else if frac >= 1.0 - SNAP {
        (k as i64 + 1, 0.0)
    } else {
        (k as i64, frac)
    }
}

/// Grid-aligned origin one padding cell below `min`.
fn padded_origin(min: f64, step: f64) -> f64 {
    ((min / step).floor() - 1.0) * step
}

fn padded_len(origin: f64, max: f64, step: f64) -> usize {
    ((max - origin) / step).ceil() as usize + 2
}

/// One-dimensional pmf on a regular grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf1 {
    origin: f64,
    step: f64,
    masses: Vec<f64>,
}

impl Pmf1 {
    pub fn new(origin: f64, step: f64, masses: Vec<f64>) -> Result<Self> {
        check_step(step)?;
        if !origin.is_finite() {
            return Err(Error::input("grid origin must be finite"));
        }
        if masses.is_empty() {
            return Err(Error::InvalidMass("empty mass vector".into()));
        }
        check_masses(&masses)?;
        Ok(Self { origin, step, masses })
    }

    /// Unit mass at `value`.
    pub fn delta(value: f64, step: f64) -> Result<Self> {
        Self::new(value, step, vec![1.0])
    }

    pub fn zeros(origin: f64, step: f64, len: usize) -> Result<Self> {
        Self::new(origin, step, vec![0.0; len.max(1)])
    }

    /// Builds a pmf from weighted points on a zero-anchored grid, sized to the
    /// support plus one empty cell on each side.
    pub fn from_points<I>(step: f64, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        check_step(step)?;
        let points: Vec<(f64, f64)> = points.into_iter().collect();
        if points.is_empty() {
            return Err(Error::input("no points to deposit"));
        }
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &(v, _) in &points {
            if !v.is_finite() {
                return Err(Error::input(format!("non-finite point value {v}")));
            }
            lo = lo.min(v);
            hi = hi.max(v);
        }
        let origin = padded_origin(lo, step);
        let mut pmf = Self::zeros(origin, step, padded_len(origin, hi, step))?;
        for (v, p) in points {
            pmf.add_point_mass(v, p)?;
        }
        Ok(pmf)
    }

    pub fn origin(&self) -> f64 {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Grid value of index `k`.
    pub fn value(&self, k: usize) -> f64 {
        self.origin + k as f64 * self.step
    }

    /// Last grid value.
    pub fn max_value(&self) -> f64 {
        self.value(self.len() - 1)
    }

    /// Mass at the grid point nearest to `value`, zero when off the grid.
    pub fn mass_at(&self, value: f64) -> f64 {
        let pos = ((value - self.origin) / self.step).round();
        if pos < 0.0 || pos as usize >= self.len() {
            0.0
        } else {
            self.masses[pos as usize]
        }
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        self.masses
            .iter()
            .enumerate()
            .map(|(k, m)| m * self.value(k))
            .sum::<f64>()
            / self.total()
    }

    pub fn variance(&self) -> f64 {
        let mu = self.mean();
        self.masses
            .iter()
            .enumerate()
            .map(|(k, m)| m * (self.value(k) - mu).powi(2))
            .sum::<f64>()
            / self.total()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORM_TOL
    }

    pub fn check_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.total()))
        }
    }

    /// Rescales to unit mass if the total is off by more than [`NORM_TOL`].
    /// Returns the applied correction `total - 1`.
    pub fn renormalize(&mut self) -> Option<f64> {
        let total = self.total();
        if (total - 1.0).abs() <= NORM_TOL || total <= 0.0 {
            return None;
        }
        self.masses.iter_mut().for_each(|m| *m /= total);
        Some(total - 1.0)
    }

    fn extend_to(&mut self, lo: i64, hi: i64) {
        let pre = (-lo).max(0) as usize;
        let len = (hi.max(self.len() as i64 - 1) + pre as i64 + 1) as usize;
        let mut masses = vec![0.0; len];
        masses[pre..pre + self.len()].copy_from_slice(&self.masses);
        self.origin -= pre as f64 * self.step;
        self.masses = masses;
    }

    /// Deposits `prob` at `value`, splitting it linearly between the two
    /// neighbouring grid points. The grid grows if `value` lies outside it.
    pub fn add_point_mass(&mut self, value: f64, prob: f64) -> Result<()> {
        if !(prob >= 0.0) || !prob.is_finite() {
            return Err(Error::InvalidMass(format!("point mass {prob}")));
        }
        if !value.is_finite() {
            return Err(Error::input(format!("non-finite point value {value}")));
        }
        let (k, w) = split_position((value - self.origin) / self.step);
        let hi = k + i64::from(w > 0.0);
        if k < 0 || hi >= self.len() as i64 {
            self.extend_to(k, hi);
            return self.add_point_mass(value, prob);
        }
        let k = k as usize;
        self.masses[k] += prob * (1.0 - w);
        if w > 0.0 {
            self.masses[k + 1] += prob * w;
        }
        Ok(())
    }

    /// Re-deposits every mass onto a zero-anchored grid with `new_step`.
    pub fn regrid(&self, new_step: f64) -> Result<Pmf1> {
        check_step(new_step)?;
        let aligned = (self.origin / self.step).fract().abs() < SNAP;
        if same_step(new_step, self.step) && aligned {
            return Ok(self.clone());
        }
        let origin = (self.origin / new_step).floor() * new_step;
        let len = ((self.max_value() - origin) / new_step).floor() as usize + 2;
        let mut out = Pmf1::zeros(origin, new_step, len)?;
        for (k, &m) in self.masses.iter().enumerate() {
            if m > 0.0 {
                out.add_point_mass(self.value(k), m)?;
            }
        }
        Ok(out.trim(0.0))
    }

    /// Drops leading and trailing cells whose cumulative mass is at most
    /// `eps / 2` on each side.
    pub fn trim(&self, eps: f64) -> Pmf1 {
        let (lo, hi) = trim_bounds(&self.masses, eps);
        Pmf1 {
            origin: self.value(lo),
            step: self.step,
            masses: self.masses[lo..=hi].to_vec(),
        }
    }

    /// Distribution of `X + offset`.
    pub fn shift(&self, offset: f64) -> Pmf1 {
        Pmf1 {
            origin: self.origin + offset,
            ..self.clone()
        }
    }

    /// Distribution of `-X`.
    pub fn reflect(&self) -> Pmf1 {
        let mut masses = self.masses.clone();
        masses.reverse();
        Pmf1 {
            origin: -self.max_value(),
            step: self.step,
            masses,
        }
    }

    /// Distribution of `scale * X` (`scale > 0`), deposited on a zero-anchored
    /// grid with the same step.
    pub fn scale(&self, scale: f64) -> Result<Pmf1> {
        if !(scale > 0.0) || !scale.is_finite() {
            return Err(Error::input(format!("scale must be positive, got {scale}")));
        }
        let pts = self
            .masses
            .iter()
            .enumerate()
            .filter(|(_, m)| **m > 0.0)
            .map(|(k, m)| (scale * self.value(k), *m));
        Pmf1::from_points(self.step, pts).map(|p| p.trim(0.0))
    }

    /// Cumulative probability of the piecewise-constant density obtained by
    /// spreading each mass uniformly over its cell, evaluated at `x`.
    pub fn cell_cdf(&self, x: f64) -> f64 {
        let h = 0.5 * self.step;
        let mut acc = 0.0;
        for (k, &m) in self.masses.iter().enumerate() {
            let c = self.value(k);
            if c + h <= x {
                acc += m;
            } else if c - h < x {
                acc += m * (x - (c - h)) / self.step;
            } else {
                break;
            }
        }
        acc
    }
}

fn trim_bounds(masses: &[f64], eps: f64) -> (usize, usize) {
    let half = 0.5 * eps;
    let n = masses.len();
    let (mut lo, mut acc) = (0, 0.0);
    while lo + 1 < n && acc + masses[lo] <= half {
        acc += masses[lo];
        lo += 1;
    }
    let (mut hi, mut acc) = (n - 1, 0.0);
    while hi > lo && acc + masses[hi] <= half {
        acc += masses[hi];
        hi -= 1;
    }
    (lo, hi)
}

/// Distribution of the sum of two independent variables on equal-step grids.
pub fn convolve1(p: &Pmf1, q: &Pmf1) -> Result<Pmf1> {
    ensure_same_step(p.step, q.step)?;
    let n = p.len() + q.len() - 1;
    let masses = if p.len() * q.len() <= DIRECT_1D_LIMIT {
        let mut out = vec![0.0; n];
        for (i, &a) in p.masses.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            for (o, &b) in out[i..].iter_mut().zip(&q.masses) {
                *o += a * b;
            }
        }
        out
    } else {
        fft_convolve_1d(&p.masses, &q.masses)
    };
    Ok(Pmf1 {
        origin: p.origin + q.origin,
        step: p.step,
        masses,
    })
}

/// Smallest length `>= n` whose prime factors are all in {2, 3, 5, 7}.
fn fft_len(n: usize) -> usize {
    let mut m = n.max(1);
    loop {
        let mut r = m;
        for f in [2, 3, 5, 7] {
            while r.is_multiple_of(f) {
                r /= f;
            }
        }
        if r == 1 {
            return m;
        }
        m += 1;
    }
}

fn fft_convolve_1d(a: &[f64], b: &[f64]) -> Vec<f64> {
    let n = a.len() + b.len() - 1;
    let len = fft_len(n);
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft(len, FftDirection::Forward);
    let inv = planner.plan_fft(len, FftDirection::Inverse);
    let pad = |src: &[f64]| {
        let mut v = vec![Complex::new(0.0, 0.0); len];
        for (d, s) in v.iter_mut().zip(src) {
            d.re = *s;
        }
        v
    };
    let (mut x, mut y) = (pad(a), pad(b));
    fwd.process(&mut x);
    fwd.process(&mut y);
    x.iter_mut().zip(&y).for_each(|(u, v)| *u *= v);
    inv.process(&mut x);
    let scale = 1.0 / len as f64;
    x[..n].iter().map(|c| (c.re * scale).max(0.0)).collect()
}

/// Two-dimensional pmf on a square grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Pmf2 {
    origin: (f64, f64),
    step: f64,
    na: usize,
    nb: usize,
    masses: Vec<f64>,
}

impl Pmf2 {
    /// `masses` is row-major with `na` rows (A axis) of `nb` entries.
    pub fn new(origin: (f64, f64), step: f64, na: usize, nb: usize, masses: Vec<f64>) -> Result<Self> {
        check_step(step)?;
        if !(origin.0.is_finite() && origin.1.is_finite()) {
            return Err(Error::input("grid origin must be finite"));
        }
        if na == 0 || nb == 0 || masses.len() != na * nb {
            return Err(Error::InvalidMass(format!(
                "shape {na}x{nb} does not match {} masses",
                masses.len()
            )));
        }
        check_masses(&masses)?;
        Ok(Self {
            origin,
            step,
            na,
            nb,
            masses,
        })
    }

    pub fn delta(value: (f64, f64), step: f64) -> Result<Self> {
        Self::new(value, step, 1, 1, vec![1.0])
    }

    pub fn zeros(origin: (f64, f64), step: f64, na: usize, nb: usize) -> Result<Self> {
        Self::new(origin, step, na.max(1), nb.max(1), vec![0.0; na.max(1) * nb.max(1)])
    }

    /// Builds a pmf from weighted points on a zero-anchored grid, sized to the
    /// support plus one empty cell on each side.
    pub fn from_points<I>(step: f64, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = ((f64, f64), f64)>,
    {
        check_step(step)?;
        let points: Vec<((f64, f64), f64)> = points.into_iter().collect();
        if points.is_empty() {
            return Err(Error::input("no points to deposit"));
        }
        let mut lo = (f64::INFINITY, f64::INFINITY);
        let mut hi = (f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &((a, b), _) in &points {
            if !(a.is_finite() && b.is_finite()) {
                return Err(Error::input(format!("non-finite point ({a}, {b})")));
            }
            lo = (lo.0.min(a), lo.1.min(b));
            hi = (hi.0.max(a), hi.1.max(b));
        }
        let origin = (padded_origin(lo.0, step), padded_origin(lo.1, step));
        let mut pmf = Self::zeros(
            origin,
            step,
            padded_len(origin.0, hi.0, step),
            padded_len(origin.1, hi.1, step),
        )?;
        for (v, p) in points {
            pmf.add_point_mass(v, p)?;
        }
        Ok(pmf)
    }

    pub fn origin(&self) -> (f64, f64) {
        self.origin
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    /// `(rows, columns)`: number of grid points on the A and B axes.
    pub fn shape(&self) -> (usize, usize) {
        (self.na, self.nb)
    }

    pub fn masses(&self) -> &[f64] {
        &self.masses
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.masses[i * self.nb + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.masses[i * self.nb..(i + 1) * self.nb]
    }

    pub fn value_a(&self, i: usize) -> f64 {
        self.origin.0 + i as f64 * self.step
    }

    pub fn value_b(&self, j: usize) -> f64 {
        self.origin.1 + j as f64 * self.step
    }

    /// Mass at the grid point nearest to `(a, b)`, zero when off the grid.
    pub fn mass_at(&self, a: f64, b: f64) -> f64 {
        let i = ((a - self.origin.0) / self.step).round();
        let j = ((b - self.origin.1) / self.step).round();
        if i < 0.0 || j < 0.0 || i as usize >= self.na || j as usize >= self.nb {
            0.0
        } else {
            self.get(i as usize, j as usize)
        }
    }

    pub fn total(&self) -> f64 {
        self.masses.iter().sum()
    }

    pub fn is_normalized(&self) -> bool {
        (self.total() - 1.0).abs() <= NORM_TOL
    }

    pub fn check_normalized(&self) -> Result<()> {
        if self.is_normalized() {
            Ok(())
        } else {
            Err(Error::NotNormalized(self.total()))
        }
    }

    /// Rescales to unit mass if the total is off by more than [`NORM_TOL`].
    pub fn renormalize(&mut self) -> Option<f64> {
        let total = self.total();
        if (total - 1.0).abs() <= NORM_TOL || total <= 0.0 {
            return None;
        }
        self.masses.iter_mut().for_each(|m| *m /= total);
        Some(total - 1.0)
    }

    pub fn marginal_a(&self) -> Pmf1 {
        let masses = (0..self.na).map(|i| self.row(i).iter().sum()).collect();
        Pmf1 {
            origin: self.origin.0,
            step: self.step,
            masses,
        }
    }

    pub fn marginal_b(&self) -> Pmf1 {
        let mut masses = vec![0.0; self.nb];
        for i in 0..self.na {
            masses.iter_mut().zip(self.row(i)).for_each(|(m, x)| *m += x);
        }
        Pmf1 {
            origin: self.origin.1,
            step: self.step,
            masses,
        }
    }

    pub fn mean(&self) -> (f64, f64) {
        (self.marginal_a().mean(), self.marginal_b().mean())
    }

    fn extend_to(&mut self, (ilo, ihi): (i64, i64), (jlo, jhi): (i64, i64)) {
        let pre_a = (-ilo).max(0) as usize;
        let pre_b = (-jlo).max(0) as usize;
        let na = (ihi.max(self.na as i64 - 1) + pre_a as i64 + 1) as usize;
        let nb = (jhi.max(self.nb as i64 - 1) + pre_b as i64 + 1) as usize;
        if pre_a == 0 && pre_b == 0 && na == self.na && nb == self.nb {
            return;
        }
        let mut masses = vec![0.0; na * nb];
        for i in 0..self.na {
            let dst = (i + pre_a) * nb + pre_b;
            masses[dst..dst + self.nb].copy_from_slice(self.row(i));
        }
        self.origin.0 -= pre_a as f64 * self.step;
        self.origin.1 -= pre_b as f64 * self.step;
        self.na = na;
        self.nb = nb;
        self.masses = masses;
    }

    /// Deposits `prob` at `(a, b)` by bilinear interpolation onto the four
    /// surrounding grid points. The grid grows if needed.
    pub fn add_point_mass(&mut self, (a, b): (f64, f64), prob: f64) -> Result<()> {
        if !(prob >= 0.0) || !prob.is_finite() {
            return Err(Error::InvalidMass(format!("point mass {prob}")));
        }
        if !(a.is_finite() && b.is_finite()) {
            return Err(Error::input(format!("non-finite point ({a}, {b})")));
        }
        let (i, wa) = split_position((a - self.origin.0) / self.step);
        let (j, wb) = split_position((b - self.origin.1) / self.step);
        let (i_hi, j_hi) = (i + i64::from(wa > 0.0), j + i64::from(wb > 0.0));
        if i < 0 || j < 0 || i_hi >= self.na as i64 || j_hi >= self.nb as i64 {
            self.extend_to((i, i_hi), (j, j_hi));
            return self.add_point_mass((a, b), prob);
        }
        let (i, j) = (i as usize, j as usize);
        let nb = self.nb;
        self.masses[i * nb + j] += prob * (1.0 - wa) * (1.0 - wb);
        if wa > 0.0 {
            self.masses[(i + 1) * nb + j] += prob * wa * (1.0 - wb);
        }
        if wb > 0.0 {
            self.masses[i * nb + j + 1] += prob * (1.0 - wa) * wb;
        }
        if wa > 0.0 && wb > 0.0 {
            self.masses[(i + 1) * nb + j + 1] += prob * wa * wb;
        }
        Ok(())
    }

    /// Distribution of `(X + da, Y + db)`.
    pub fn shift(&self, (da, db): (f64, f64)) -> Pmf2 {
        Pmf2 {
            origin: (self.origin.0 + da, self.origin.1 + db),
            ..self.clone()
        }
    }

    /// Distribution of `(Y, X)`.
    pub fn swap_axes(&self) -> Pmf2 {
        let mut masses = vec![0.0; self.masses.len()];
        for i in 0..self.na {
            for j in 0..self.nb {
                masses[j * self.na + i] = self.get(i, j);
            }
        }
        Pmf2 {
            origin: (self.origin.1, self.origin.0),
            step: self.step,
            na: self.nb,
            nb: self.na,
            masses,
        }
    }

    /// Drops boundary rows and columns whose cumulative marginal mass is at
    /// most `eps / 4` on each of the four sides.
    pub fn trim(&self, eps: f64) -> Pmf2 {
        let (ilo, ihi) = trim_bounds(self.marginal_a().masses(), 0.5 * eps);
        let (jlo, jhi) = trim_bounds(self.marginal_b().masses(), 0.5 * eps);
        let nb = jhi - jlo + 1;
        let mut masses = Vec::with_capacity((ihi - ilo + 1) * nb);
        for i in ilo..=ihi {
            masses.extend_from_slice(&self.row(i)[jlo..=jhi]);
        }
        Pmf2 {
            origin: (self.value_a(ilo), self.value_b(jlo)),
            step: self.step,
            na: ihi - ilo + 1,
            nb,
            masses,
        }
    }
}

/// Product measure of two independent marginals: `masses[i][j] = a[i] * b[j]`.
pub fn outer(pa: &Pmf1, pb: &Pmf1) -> Result<Pmf2> {
    ensure_same_step(pa.step, pb.step)?;
    let mut masses = Vec::with_capacity(pa.len() * pb.len());
    for &a in &pa.masses {
        masses.extend(pb.masses.iter().map(|b| a * b));
    }
    Ok(Pmf2 {
        origin: (pa.origin, pb.origin),
        step: pa.step,
        na: pa.len(),
        nb: pb.len(),
        masses,
    })
}

/// Distribution of `(-X, -Y)`.
pub fn reflect2(p: &Pmf2) -> Pmf2 {
    let mut masses = p.masses.clone();
    masses.reverse();
    Pmf2 {
        origin: (-p.value_a(p.na - 1), -p.value_b(p.nb - 1)),
        step: p.step,
        na: p.na,
        nb: p.nb,
        masses,
    }
}

// In-place 2D transform of a row-major `rows x cols` buffer.
fn fft2(planner: &mut FftPlanner<f64>, buf: &mut [Complex<f64>], rows: usize, cols: usize, dir: FftDirection) {
    let row_fft = planner.plan_fft(cols, dir);
    let mut scratch = vec![Complex::new(0.0, 0.0); row_fft.get_inplace_scratch_len()];
    row_fft.process_with_scratch(buf, &mut scratch);

    let col_fft = planner.plan_fft(rows, dir);
    let mut scratch = vec![Complex::new(0.0, 0.0); col_fft.get_inplace_scratch_len()];
    let mut col = vec![Complex::new(0.0, 0.0); rows];
    for j in 0..cols {
        for (i, c) in col.iter_mut().enumerate() {
            *c = buf[i * cols + j];
        }
        col_fft.process_with_scratch(&mut col, &mut scratch);
        for (i, c) in col.iter().enumerate() {
            buf[i * cols + j] = *c;
        }
    }
}

fn padded_complex(p: &Pmf2, rows: usize, cols: usize) -> Vec<Complex<f64>> {
    let mut buf = vec![Complex::new(0.0, 0.0); rows * cols];
    for i in 0..p.na {
        for (d, s) in buf[i * cols..i * cols + p.nb].iter_mut().zip(p.row(i)) {
            d.re = *s;
        }
    }
    buf
}

/// Distribution of the component-wise sum of two independent 2D variables.
///
/// Computed in the frequency domain on a zero-padded grid large enough that
/// the cyclic convolution equals the linear one.
pub fn convolve2(p: &Pmf2, q: &Pmf2) -> Result<Pmf2> {
    ensure_same_step(p.step, q.step)?;
    let na = p.na + q.na - 1;
    let nb = p.nb + q.nb - 1;
    let (rows, cols) = (fft_len(na), fft_len(nb));

    let mut planner = FftPlanner::<f64>::new();
    let mut x = padded_complex(p, rows, cols);
    fft2(&mut planner, &mut x, rows, cols, FftDirection::Forward);
    {
        let mut y = padded_complex(q, rows, cols);
        fft2(&mut planner, &mut y, rows, cols, FftDirection::Forward);
        x.iter_mut().zip(&y).for_each(|(u, v)| *u *= v);
    }
    fft2(&mut planner, &mut x, rows, cols, FftDirection::Inverse);

    let scale = 1.0 / (rows * cols) as f64;
    let mut masses = Vec::with_capacity(na * nb);
    for i in 0..na {
        masses.extend(x[i * cols..i * cols + nb].iter().map(|c| (c.re * scale).max(0.0)));
    }
    Ok(Pmf2 {
        origin: (p.origin.0 + q.origin.0, p.origin.1 + q.origin.1),
        step: p.step,
        na,
        nb,
        masses,
    })
}
