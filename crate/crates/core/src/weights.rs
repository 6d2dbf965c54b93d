//! Muckenhoupt weights: ball averages, A_q characteristics, reverse Hölder
//! exponents and doubling constants.
//!
//! All characteristics are maxima over a finite [`BallFamily`], hence lower
//! estimates of the true supremum over every ball.

use crate::error::{invalid, Error, Result};
use crate::quad;
use crate::report::{AuditReport, AuditRow};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Default relative tolerance for comparing two quadrature values.
pub const TOL_QUAD: f64 = 1e-6;

/// Axis-aligned box in R^n; bounds may be infinite.
#[derive(Debug, Clone, PartialEq)]
pub struct Region {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl Region {
    pub fn interval(a: f64, b: f64) -> Result<Self> {
        Self::boxed(vec![a], vec![b])
    }

    pub fn boxed(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() || lo.len() > 2 {
            return invalid("region must have matching bounds in dimension 1 or 2");
        }
        if lo.iter().zip(&hi).any(|(a, b)| a.is_nan() || b.is_nan() || a >= b) {
            return invalid("region bounds must satisfy lo < hi");
        }
        Ok(Self { lo, hi })
    }

    /// All of R^n.
    pub fn whole(n: usize) -> Self {
        Self { lo: vec![f64::NEG_INFINITY; n], hi: vec![f64::INFINITY; n] }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.iter().chain(&self.hi).all(|v| v.is_finite())
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter().enumerate().all(|(k, v)| *v >= self.lo[k] && *v <= self.hi[k])
    }

    /// Smallest side length (infinite for unbounded regions).
    pub fn min_side(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).fold(f64::INFINITY, f64::min)
    }

    /// Largest distance from `x` to a point of the region.
    pub fn diameter_from(&self, x: &[f64]) -> f64 {
        x.iter()
            .enumerate()
            .map(|(k, v)| (v - self.lo[k]).abs().max((self.hi[k] - v).abs()).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}

/// Quadrature rule attached to a weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rule {
    Midpoint,
    Trapezoid,
    Analytic,
}

#[derive(Debug, Clone, PartialEq)]
pub enum WeightKind {
    /// `scale * |x - center|^alpha`
    Power { alpha: f64, center: Vec<f64>, scale: f64 },
    /// Piecewise constant (midpoint) cell values or piecewise linear (trapezoid) node values.
    Sampled { cells: Vec<usize>, values: Vec<f64> },
}

/// A non-negative spatial weight.
#[derive(Debug, Clone, PartialEq)]
pub struct Weight {
    kind: WeightKind,
    domain: Region,
    rule: Rule,
}

impl Weight {
    /// `|x - center|^alpha` on `domain`, integrated in closed form.
    ///
    /// Local integrability of the requested power is checked when the weight
    /// is integrated, so reciprocal and dual powers can share one handle.
    pub fn power(alpha: f64, center: Vec<f64>, domain: Region) -> Result<Self> {
        if !alpha.is_finite() || center.len() != domain.dim() || center.iter().any(|c| !c.is_finite()) {
            return invalid("power weight needs a finite exponent and a center matching the domain");
        }
        Ok(Self { kind: WeightKind::Power { alpha, center, scale: 1.0 }, domain, rule: Rule::Analytic })
    }

    pub fn constant(c: f64, domain: Region) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid("constant weight must be positive");
        }
        let center = domain.lo.iter().zip(&domain.hi).map(|(a, b)| if a.is_finite() && b.is_finite() { 0.5 * (a + b) } else { 0.0 }).collect();
        Ok(Self { kind: WeightKind::Power { alpha: 0.0, center, scale: c }, domain, rule: Rule::Analytic })
    }

    /// Grid-sampled weight on a bounded domain.
    ///
    /// Midpoint: one value per cell, `values.len() == prod(cells)`, x fastest.
    /// Trapezoid (1D only): one value per node, `values.len() == cells + 1`.
    pub fn sampled(domain: Region, cells: Vec<usize>, values: Vec<f64>, rule: Rule) -> Result<Self> {
        if !domain.is_bounded() || cells.len() != domain.dim() || cells.iter().any(|&c| c == 0) {
            return invalid("sampled weight needs a bounded domain and positive cell counts");
        }
        let expected = match rule {
            Rule::Midpoint => cells.iter().product::<usize>(),
            Rule::Trapezoid if cells.len() == 1 => cells[0] + 1,
            _ => return invalid("sampled weights use midpoint, or trapezoid in one dimension"),
        };
        if values.len() != expected {
            return invalid(format!("expected {expected} samples, got {}", values.len()));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return invalid("samples must be finite and non-negative");
        }
        Ok(Self { kind: WeightKind::Sampled { cells, values }, domain, rule })
    }

    /// Sample `f` at cell centers (midpoint) or nodes (trapezoid).
    pub fn from_fn(domain: Region, cells: Vec<usize>, rule: Rule, f: impl Fn(&[f64]) -> f64) -> Result<Self> {
        if !domain.is_bounded() || cells.len() != domain.dim() {
            return invalid("sampled weight needs a bounded domain");
        }
        let h: Vec<f64> = (0..cells.len()).map(|k| (domain.hi[k] - domain.lo[k]) / cells[k] as f64).collect();
        let values = match (rule, cells.len()) {
            (Rule::Trapezoid, 1) => (0..=cells[0]).map(|i| f(&[domain.lo[0] + i as f64 * h[0]])).collect(),
            (_, 1) => (0..cells[0]).map(|i| f(&[domain.lo[0] + (i as f64 + 0.5) * h[0]])).collect(),
            _ => {
                let mut v = Vec::with_capacity(cells[0] * cells[1]);
                for j in 0..cells[1] {
                    for i in 0..cells[0] {
                        v.push(f(&[domain.lo[0] + (i as f64 + 0.5) * h[0], domain.lo[1] + (j as f64 + 0.5) * h[1]]));
                    }
                }
                v
            }
        };
        Self::sampled(domain, cells, values, rule)
    }

    pub fn kind(&self) -> &WeightKind {
        &self.kind
    }

    pub fn domain(&self) -> &Region {
        &self.domain
    }

    pub fn rule(&self) -> Rule {
        self.rule
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// `c * w`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return invalid("scale factor must be positive");
        }
        let mut out = self.clone();
        match &mut out.kind {
            WeightKind::Power { scale, .. } => *scale *= c,
            WeightKind::Sampled { values, .. } => values.iter_mut().for_each(|v| *v *= c),
        }
        Ok(out)
    }

    /// `factor * w(x0 + r y)` as a weight in `y`.
    pub fn rescaled(&self, x0: &[f64], r: f64, factor: f64) -> Result<Self> {
        if !(r > 0.0 && factor > 0.0) || x0.len() != self.dim() {
            return invalid("rescaling needs r > 0, factor > 0 and a matching base point");
        }
        let map = |v: f64, k: usize| (v - x0[k]) / r;
        let lo = self.domain.lo.iter().enumerate().map(|(k, v)| map(*v, k)).collect();
        let hi = self.domain.hi.iter().enumerate().map(|(k, v)| map(*v, k)).collect();
        let domain = Region { lo, hi };
        let kind = match &self.kind {
            WeightKind::Power { alpha, center, scale } => WeightKind::Power {
                alpha: *alpha,
                center: center.iter().enumerate().map(|(k, v)| map(*v, k)).collect(),
                scale: scale * factor * r.powf(*alpha),
            },
            WeightKind::Sampled { cells, values } => WeightKind::Sampled {
                cells: cells.clone(),
                values: values.iter().map(|v| v * factor).collect(),
            },
        };
        Ok(Self { kind, domain, rule: self.rule })
    }

    /// Pointwise value; `+inf` at the center of a negative power.
    pub fn eval(&self, x: &[f64]) -> f64 {
        match &self.kind {
            WeightKind::Power { alpha, center, scale } => {
                if *alpha == 0.0 {
                    return *scale;
                }
                let d = dist(x, center);
                scale * d.powf(*alpha)
            }
            WeightKind::Sampled { cells, values } => {
                let h: Vec<f64> = (0..cells.len()).map(|k| (self.domain.hi[k] - self.domain.lo[k]) / cells[k] as f64).collect();
                if self.rule == Rule::Trapezoid {
                    let s = ((x[0] - self.domain.lo[0]) / h[0]).clamp(0.0, cells[0] as f64);
                    let i = (s.floor() as usize).min(cells[0] - 1);
                    let f = s - i as f64;
                    return values[i] * (1.0 - f) + values[i + 1] * f;
                }
                let idx: Vec<usize> = (0..cells.len())
                    .map(|k| (((x[k] - self.domain.lo[k]) / h[k]).floor().max(0.0) as usize).min(cells[k] - 1))
                    .collect();
                if cells.len() == 1 { values[idx[0]] } else { values[idx[1] * cells[0] + idx[0]] }
            }
        }
    }

    /// `(∫_{B ∩ D} w^p, |B ∩ D|)`.
    pub fn ball_integral(&self, x0: &[f64], r: f64, p: f64) -> Result<(f64, f64)> {
        if x0.len() != self.dim() || !(r > 0.0) || x0.iter().any(|v| !v.is_finite()) {
            return invalid("ball needs a finite center of matching dimension and r > 0");
        }
        if self.dim() == 1 {
            let a = (x0[0] - r).max(self.domain.lo[0]);
            let b = (x0[0] + r).min(self.domain.hi[0]);
            if b <= a {
                return Err(Error::EmptyBall);
            }
            return Ok((self.interval_integral(a, b, p)?, b - a));
        }
        let c = [x0[0], x0[1]];
        let (lo, hi) = ([self.domain.lo[0], self.domain.lo[1]], [self.domain.hi[0], self.domain.hi[1]]);
        let nearest = [c[0].clamp(lo[0], hi[0]), c[1].clamp(lo[1], hi[1])];
        if dist(&nearest, &c) >= r {
            return Err(Error::EmptyBall);
        }
        match &self.kind {
            WeightKind::Power { alpha, center, scale } => {
                let e = alpha * p;
                self.check_power(e)?;
                let area = polar_power_integral([c[0], c[1]], 0.0, c, r, lo, hi);
                if e == 0.0 {
                    return Ok((scale.powf(p) * area, area));
                }
                let i = polar_power_integral([center[0], center[1]], e, c, r, lo, hi);
                Ok((scale.powf(p) * i, area))
            }
            WeightKind::Sampled { cells, values } => {
                let h = [(hi[0] - lo[0]) / cells[0] as f64, (hi[1] - lo[1]) / cells[1] as f64];
                let range = |k: usize| {
                    let a = (((c[k] - r - lo[k]) / h[k]).floor().max(0.0)) as usize;
                    let b = (((c[k] + r - lo[k]) / h[k]).ceil().max(0.0) as usize).min(cells[k]);
                    (a.min(cells[k]), b)
                };
                let ((i0, i1), (j0, j1)) = (range(0), range(1));
                let (mut int, mut area) = (0.0, 0.0);
                for j in j0..j1 {
                    for i in i0..i1 {
                        let x = [lo[0] + i as f64 * h[0], lo[0] + (i + 1) as f64 * h[0]];
                        let y = [lo[1] + j as f64 * h[1], lo[1] + (j + 1) as f64 * h[1]];
                        let frac = cell_disk_fraction(x, y, c, r);
                        if frac == 0.0 {
                            continue;
                        }
                        let a = frac * h[0] * h[1];
                        int += a * sample_power(values[j * cells[0] + i], p)?;
                        area += a;
                    }
                }
                if area <= 0.0 {
                    return Err(Error::EmptyBall);
                }
                Ok((int, area))
            }
        }
    }

    /// `∫_a^b w^p` on an interval inside the domain (one dimension).
    pub fn interval_integral(&self, a: f64, b: f64, p: f64) -> Result<f64> {
        if self.dim() != 1 {
            return invalid("interval integrals are one-dimensional");
        }
        let (a, b) = (a.max(self.domain.lo[0]), b.min(self.domain.hi[0]));
        if b <= a {
            return Ok(0.0);
        }
        match &self.kind {
            WeightKind::Power { alpha, center, scale } => {
                let e = alpha * p;
                self.check_power(e)?;
                let g = |y: f64| if e == 0.0 { y } else { y.signum() * y.abs().powf(e + 1.0) / (e + 1.0) };
                Ok(scale.powf(p) * (g(b - center[0]) - g(a - center[0])))
            }
            WeightKind::Sampled { cells, values } => {
                let (lo, n) = (self.domain.lo[0], cells[0]);
                let h = (self.domain.hi[0] - lo) / n as f64;
                let i0 = (((a - lo) / h).floor().max(0.0) as usize).min(n - 1);
                let i1 = (((b - lo) / h).ceil() as usize).clamp(i0 + 1, n);
                let mut s = 0.0;
                for i in i0..i1 {
                    let (ca, cb) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
                    let (xa, xb) = (ca.max(a), cb.min(b));
                    if xb <= xa {
                        continue;
                    }
                    if self.rule == Rule::Trapezoid {
                        let lin = |x: f64| values[i] + (values[i + 1] - values[i]) * (x - ca) / h;
                        if p == 1.0 {
                            s += 0.5 * (lin(xa) + lin(xb)) * (xb - xa);
                        } else {
                            if p < 0.0 && values[i].min(values[i + 1]) < 1e-300 {
                                return Err(Error::NonIntegrable { exponent: p, dim: 1 });
                            }
                            s += quad::composite_gl(xa, xb, 1, |x| lin(x).powf(p));
                        }
                    } else {
                        s += (xb - xa) * sample_power(values[i], p)?;
                    }
                }
                Ok(s)
            }
        }
    }

    /// `∫_a^b w^p f dx` in one dimension, graded toward a power singularity.
    pub fn integrate_with(&self, a: f64, b: f64, p: f64, f: impl Fn(f64) -> f64) -> Result<f64> {
        if self.dim() != 1 {
            return invalid("weighted line integrals are one-dimensional");
        }
        let (a, b) = (a.max(self.domain.lo[0]), b.min(self.domain.hi[0]));
        if b <= a {
            return Ok(0.0);
        }
        match &self.kind {
            WeightKind::Power { alpha, center, scale } => {
                let e = alpha * p;
                self.check_power(e)?;
                Ok(scale.powf(p) * quad::singular_power_integral(a, b, center[0], e, &f))
            }
            WeightKind::Sampled { cells, values } => {
                let (lo, n) = (self.domain.lo[0], cells[0]);
                let h = (self.domain.hi[0] - lo) / n as f64;
                let mut s = 0.0;
                for i in 0..n {
                    let (ca, cb) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
                    let (xa, xb) = (ca.max(a), cb.min(b));
                    if xb <= xa {
                        continue;
                    }
                    if self.rule == Rule::Trapezoid {
                        if p < 0.0 && values[i].min(values[i + 1]) < 1e-300 {
                            return Err(Error::NonIntegrable { exponent: p, dim: 1 });
                        }
                        let lin = |x: f64| values[i] + (values[i + 1] - values[i]) * (x - ca) / h;
                        s += quad::composite_gl(xa, xb, 1, |x| lin(x).powf(p) * f(x));
                    } else {
                        let wp = sample_power(values[i], p)?;
                        s += wp * quad::composite_gl(xa, xb, 1, &f);
                    }
                }
                Ok(s)
            }
        }
    }

    fn check_power(&self, e: f64) -> Result<()> {
        if e <= -(self.dim() as f64) {
            Err(Error::NonIntegrable { exponent: e, dim: self.dim() })
        } else {
            Ok(())
        }
    }

    /// Essential infimum of `w` over `B ∩ D`.
    pub fn ess_inf(&self, x0: &[f64], r: f64) -> Result<f64> {
        let _ = self.ball_integral(x0, r, 0.0)?;
        match &self.kind {
            WeightKind::Power { alpha, center, scale } => {
                if *alpha == 0.0 {
                    return Ok(*scale);
                }
                let d = if *alpha > 0.0 { self.nearest_dist(center, x0, r) } else { self.farthest_dist(center, x0, r) };
                Ok(scale * d.powf(*alpha))
            }
            WeightKind::Sampled { cells, values } => {
                let mut m = f64::INFINITY;
                if self.dim() == 1 {
                    let lo = self.domain.lo[0];
                    let h = (self.domain.hi[0] - lo) / cells[0] as f64;
                    let (a, b) = ((x0[0] - r).max(lo), (x0[0] + r).min(self.domain.hi[0]));
                    for i in 0..cells[0] {
                        let (ca, cb) = (lo + i as f64 * h, lo + (i + 1) as f64 * h);
                        let (xa, xb) = (ca.max(a), cb.min(b));
                        if xb <= xa {
                            continue;
                        }
                        m = m.min(if self.rule == Rule::Trapezoid { self.eval(&[xa]).min(self.eval(&[xb])) } else { values[i] });
                    }
                } else {
                    let (lo, hi) = (&self.domain.lo, &self.domain.hi);
                    let h = [(hi[0] - lo[0]) / cells[0] as f64, (hi[1] - lo[1]) / cells[1] as f64];
                    for j in 0..cells[1] {
                        for i in 0..cells[0] {
                            let x = [lo[0] + i as f64 * h[0], lo[0] + (i + 1) as f64 * h[0]];
                            let y = [lo[1] + j as f64 * h[1], lo[1] + (j + 1) as f64 * h[1]];
                            if cell_disk_fraction(x, y, [x0[0], x0[1]], r) > 0.0 {
                                m = m.min(values[j * cells[0] + i]);
                            }
                        }
                    }
                }
                Ok(m)
            }
        }
    }

    // distance from `c` to the closest point of B_r(x0) ∩ D
    fn nearest_dist(&self, c: &[f64], x0: &[f64], r: f64) -> f64 {
        if self.dim() == 1 {
            let (a, b) = ((x0[0] - r).max(self.domain.lo[0]), (x0[0] + r).min(self.domain.hi[0]));
            return (c[0] - c[0].clamp(a, b)).abs();
        }
        // alternating projections (Dykstra) onto the disk and the box
        let mut x = c.to_vec();
        let (mut p, mut q) = (vec![0.0; 2], vec![0.0; 2]);
        for _ in 0..400 {
            let y: Vec<f64> = (0..2).map(|k| (x[k] + p[k]).clamp(self.domain.lo[k], self.domain.hi[k])).collect();
            p = (0..2).map(|k| x[k] + p[k] - y[k]).collect();
            let z0: Vec<f64> = (0..2).map(|k| y[k] + q[k]).collect();
            let d = dist(&z0, x0);
            let z: Vec<f64> = if d <= r { z0.clone() } else { (0..2).map(|k| x0[k] + (z0[k] - x0[k]) * r / d).collect() };
            q = (0..2).map(|k| z0[k] - z[k]).collect();
            x = z;
        }
        dist(&x, c)
    }

    // distance from `c` to the farthest point of B_r(x0) ∩ D
    fn farthest_dist(&self, c: &[f64], x0: &[f64], r: f64) -> f64 {
        if self.dim() == 1 {
            let (a, b) = ((x0[0] - r).max(self.domain.lo[0]), (x0[0] + r).min(self.domain.hi[0]));
            return (c[0] - a).abs().max((c[0] - b).abs());
        }
        let mut best: f64 = 0.0;
        let inside = |p: &[f64]| self.domain.contains(p) && dist(p, x0) <= r * (1.0 + 1e-12);
        let n = 4096;
        for k in 0..n {
            let t = 2.0 * PI * k as f64 / n as f64;
            let p = [x0[0] + r * t.cos(), x0[1] + r * t.sin()];
            let pc = [p[0].clamp(self.domain.lo[0], self.domain.hi[0]), p[1].clamp(self.domain.lo[1], self.domain.hi[1])];
            if inside(&pc) {
                best = best.max(dist(&pc, c));
            }
        }
        for &cx in &[self.domain.lo[0], self.domain.hi[0]] {
            for &cy in &[self.domain.lo[1], self.domain.hi[1]] {
                if inside(&[cx, cy]) {
                    best = best.max(dist(&[cx, cy], c));
                }
            }
        }
        best
    }
}

fn sample_power(v: f64, p: f64) -> Result<f64> {
    if p == 0.0 {
        return Ok(1.0);
    }
    if p < 0.0 && v < 1e-300 {
        return Err(Error::NonIntegrable { exponent: p, dim: 0 });
    }
    Ok(if p == 1.0 { v } else { v.powf(p) })
}

pub(crate) fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Fraction of the cell `[x0,x1] × [y0,y1]` inside the closed disk.
pub(crate) fn cell_disk_fraction(x: [f64; 2], y: [f64; 2], c: [f64; 2], r: f64) -> f64 {
    let nx = c[0].clamp(x[0], x[1]) - c[0];
    let ny = c[1].clamp(y[0], y[1]) - c[1];
    if nx * nx + ny * ny >= r * r {
        return 0.0;
    }
    let fx = (x[0] - c[0]).abs().max((x[1] - c[0]).abs());
    let fy = (y[0] - c[1]).abs().max((y[1] - c[1]).abs());
    if fx * fx + fy * fy <= r * r {
        return 1.0;
    }
    let m = 16;
    let mut inside = 0;
    for j in 0..m {
        for i in 0..m {
            let px = x[0] + (i as f64 + 0.5) / m as f64 * (x[1] - x[0]) - c[0];
            let py = y[0] + (j as f64 + 0.5) / m as f64 * (y[1] - y[0]) - c[1];
            if px * px + py * py <= r * r {
                inside += 1;
            }
        }
    }
    inside as f64 / (m * m) as f64
}

/// `∫_{B_r(x0) ∩ box} |x - c|^e dx` in the plane, in polar coordinates about `c`.
fn polar_power_integral(c: [f64; 2], e: f64, x0: [f64; 2], r: f64, lo: [f64; 2], hi: [f64; 2]) -> f64 {
    let inside_box = (0..2).all(|k| x0[k] - r >= lo[k] && x0[k] + r <= hi[k]);
    if inside_box && c == x0 {
        return 2.0 * PI * r.powf(e + 2.0) / (e + 2.0);
    }
    let d = [x0[0] - c[0], x0[1] - c[1]];
    let dn = d[0].hypot(d[1]);
    let mut br = vec![0.0, 2.0 * PI];
    let mut push = |px: f64, py: f64| {
        if px != 0.0 || py != 0.0 {
            br.push(py.atan2(px).rem_euclid(2.0 * PI));
        }
    };
    if dn > r {
        let phi = d[1].atan2(d[0]);
        let a = (r / dn).asin();
        push((phi + a).cos(), (phi + a).sin());
        push((phi - a).cos(), (phi - a).sin());
    }
    for &cx in &[lo[0], hi[0]] {
        for &cy in &[lo[1], hi[1]] {
            if cx.is_finite() && cy.is_finite() {
                push(cx - c[0], cy - c[1]);
            }
        }
    }
    for k in 0..2 {
        let j = 1 - k;
        for &v in &[lo[k], hi[k]] {
            if !v.is_finite() {
                continue;
            }
            let s2 = r * r - (v - x0[k]).powi(2);
            if s2 < 0.0 {
                continue;
            }
            let s = s2.sqrt();
            for w in [x0[j] - s, x0[j] + s] {
                let mut p = [0.0; 2];
                p[k] = v - c[k];
                p[j] = w - c[j];
                push(p[0], p[1]);
            }
        }
    }
    br.sort_by(|a, b| a.partial_cmp(b).unwrap());
    br.dedup_by(|a, b| (*a - *b).abs() < 1e-14);
    let dc = [c[0] - x0[0], c[1] - x0[1]];
    let dc2 = dc[0] * dc[0] + dc[1] * dc[1];
    let radial = |t: f64| {
        let u = [t.cos(), t.sin()];
        let b = dc[0] * u[0] + dc[1] * u[1];
        let disc = b * b - (dc2 - r * r);
        if disc <= 0.0 {
            return 0.0;
        }
        let s = disc.sqrt();
        let (mut rl, mut rh) = ((-b - s).max(0.0), -b + s);
        for k in 0..2 {
            if u[k] > 0.0 {
                rh = rh.min((hi[k] - c[k]) / u[k]);
                rl = rl.max((lo[k] - c[k]) / u[k]);
            } else if u[k] < 0.0 {
                rh = rh.min((lo[k] - c[k]) / u[k]);
                rl = rl.max((hi[k] - c[k]) / u[k]);
            } else if c[k] < lo[k] || c[k] > hi[k] {
                return 0.0;
            }
        }
        if rh <= rl {
            return 0.0;
        }
        (rh.powf(e + 2.0) - rl.powf(e + 2.0)) / (e + 2.0)
    };
    br.windows(2).map(|w| quad::tanh_sinh(w[0], w[1], radial)).sum()
}

/// Finite set of balls: every center paired with every radius.
#[derive(Debug, Clone, PartialEq)]
pub struct BallFamily {
    centers: Vec<Vec<f64>>,
    radii: Vec<f64>,
}

impl BallFamily {
    pub fn new(centers: Vec<Vec<f64>>, radii: Vec<f64>) -> Result<Self> {
        if centers.is_empty() || radii.is_empty() {
            return invalid("ball family needs at least one center and one radius");
        }
        let n = centers[0].len();
        if n == 0 || centers.iter().any(|c| c.len() != n || c.iter().any(|v| !v.is_finite())) {
            return invalid("ball centers must be finite points of one dimension");
        }
        if radii[0] <= 0.0 || radii.windows(2).any(|w| w[1] <= w[0]) || radii.iter().any(|r| !r.is_finite()) {
            return invalid("radii must be positive and strictly increasing");
        }
        Ok(Self { centers, radii })
    }

    pub fn centered(center: Vec<f64>, radii: Vec<f64>) -> Result<Self> {
        Self::new(vec![center], radii)
    }

    /// `k` log-spaced radii from `r_min` to `r_max` inclusive.
    pub fn log_radii(r_min: f64, r_max: f64, k: usize) -> Vec<f64> {
        if k == 1 {
            return vec![r_max];
        }
        let (a, b) = (r_min.ln(), r_max.ln());
        (0..k).map(|i| (a + (b - a) * i as f64 / (k - 1) as f64).exp()).collect()
    }

    /// 32 log-spaced radii in `[L/1024, L/2]` over a lattice of `per_axis` nodes per axis.
    pub fn default_for(domain: &Region, per_axis: usize) -> Result<Self> {
        if !domain.is_bounded() || per_axis == 0 {
            return invalid("default family needs a bounded domain");
        }
        let l = domain.min_side();
        let axis = |k: usize| -> Vec<f64> {
            if per_axis == 1 {
                return vec![0.5 * (domain.lo[k] + domain.hi[k])];
            }
            (0..per_axis).map(|i| domain.lo[k] + (domain.hi[k] - domain.lo[k]) * i as f64 / (per_axis - 1) as f64).collect()
        };
        let centers = if domain.dim() == 1 {
            axis(0).into_iter().map(|x| vec![x]).collect()
        } else {
            let (xs, ys) = (axis(0), axis(1));
            ys.iter().flat_map(|y| xs.iter().map(move |x| vec![*x, *y])).collect()
        };
        Self::new(centers, Self::log_radii(l / 1024.0, l / 2.0, 32))
    }

    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn radii(&self) -> &[f64] {
        &self.radii
    }

    pub fn dim(&self) -> usize {
        self.centers[0].len()
    }

    /// All `(center, radius)` pairs, centers outermost.
    pub fn balls(&self) -> Vec<(&[f64], f64)> {
        self.centers.iter().flat_map(|c| self.radii.iter().map(move |r| (c.as_slice(), *r))).collect()
    }

    pub fn len(&self) -> usize {
        self.centers.len() * self.radii.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Dimension and budget data for the weight hypothesis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightContext {
    pub n: usize,
    pub n0: usize,
    pub m0: f64,
}

impl WeightContext {
    pub fn new(n: usize, m0: f64) -> Result<Self> {
        if n == 0 || !(m0 >= 1.0) {
            return invalid("context needs n >= 1 and M0 >= 1");
        }
        Ok(Self { n, n0: n.max(2), m0 })
    }

    pub fn half_n0(&self) -> f64 {
        self.n0 as f64 / 2.0
    }
}

/// Mean of `w^p` over `B_r(x0) ∩ D`.
pub fn ball_average(w: &Weight, x0: &[f64], r: f64, p: f64) -> Result<f64> {
    let (i, m) = w.ball_integral(x0, r, p)?;
    Ok(i / m)
}

fn check_family(w: &Weight, fam: &BallFamily) -> Result<()> {
    if fam.dim() != w.dim() {
        return invalid("ball family and weight dimensions differ");
    }
    Ok(())
}

// per-ball values, order preserved, errors surfaced deterministically
fn per_ball<T: Send>(fam: &BallFamily, f: impl Fn(&[f64], f64) -> Result<T> + Sync) -> Result<Vec<T>> {
    fam.balls().into_par_iter().map(|(c, r)| f(c, r)).collect::<Vec<_>>().into_iter().collect()
}

fn max_of(v: &[f64]) -> f64 {
    v.iter().fold(f64::NEG_INFINITY, |a, b| if b.is_nan() || *b > a { *b } else { a })
}

/// Single-ball A_q quantity `(w)_B (w^{-1/(q-1)})_B^{q-1}`, or `(w)_B / essinf_B w` for q = 1.
pub fn aq_ball(w: &Weight, q: f64, x0: &[f64], r: f64) -> Result<f64> {
    if !(q >= 1.0) {
        return invalid("A_q needs q >= 1");
    }
    let avg = ball_average(w, x0, r, 1.0)?;
    if q == 1.0 {
        let inf = w.ess_inf(x0, r)?;
        return Ok(if inf > 0.0 { avg / inf } else { f64::INFINITY });
    }
    let dual = ball_average(w, x0, r, -1.0 / (q - 1.0))?;
    Ok(avg * dual.powf(q - 1.0))
}

/// Lower estimate of `[w]_{A_q}` as a max over `fam`.
pub fn aq_characteristic(w: &Weight, q: f64, fam: &BallFamily) -> Result<f64> {
    check_family(w, fam)?;
    let v = per_ball(fam, |c, r| aq_ball(w, q, c, r))?;
    Ok(max_of(&v))
}

/// Audit of `[β^{-1}]_{A_{1+2/n0}} <= M0` with the dual and A_2 identities.
pub fn check_beta_condition(beta: &Weight, ctx: &WeightContext, fam: &BallFamily) -> Result<AuditReport> {
    check_beta_condition_tol(beta, ctx, fam, TOL_QUAD)
}

pub fn check_beta_condition_tol(beta: &Weight, ctx: &WeightContext, fam: &BallFamily, tol: f64) -> Result<AuditReport> {
    check_family(beta, fam)?;
    if ctx.n != beta.dim() {
        return invalid("context dimension differs from the weight dimension");
    }
    let k = ctx.half_n0();
    let v = per_ball(fam, |c, r| {
        let inv = ball_average(beta, c, r, -1.0)?;
        let bar = ball_average(beta, c, r, k)?;
        let one = ball_average(beta, c, r, 1.0)?;
        // [β^{-1}]_{A_{1+2/n0}}, [β^{n0/2}]_{A_{1+n0/2}}, [β]_{A_2}
        Ok((inv * bar.powf(1.0 / k), bar * inv.powf(k), one * inv))
    })?;
    let est1 = max_of(&v.iter().map(|t| t.0).collect::<Vec<_>>());
    let est2 = max_of(&v.iter().map(|t| t.1).collect::<Vec<_>>());
    let est_a2 = max_of(&v.iter().map(|t| t.2).collect::<Vec<_>>());
    let mut rep = AuditReport::new("beta_condition", "weights/beta-inverse-aq-budget");
    rep.push(AuditRow::new("beta_inverse_aq", est1, ctx.m0, est1, Some(ctx.m0), est1 <= ctx.m0 * (1.0 + tol)));
    let dual = est1.powf(k);
    let gap = (est2 - dual).abs();
    rep.push(AuditRow::new("duality_identity", est2, dual, gap / est2.abs().max(f64::MIN_POSITIVE), Some(tol), gap <= tol * est2.abs()));
    rep.push(AuditRow::new("a2_dominated", est_a2, est1, est_a2 / est1, Some(1.0 + tol), est_a2 <= est1 * (1.0 + tol)));
    rep.note("n0", ctx.n0 as f64);
    rep.note("m0", ctx.m0);
    rep.note("balls", fam.len() as f64);
    Ok(rep)
}

/// Geometric candidate grid `{2^{-k} γ_max}` below the integrability bound of `w^{1+γ}`.
pub fn default_gamma_grid(w: &Weight) -> Vec<f64> {
    let mut gmax: f64 = 2.0;
    if let WeightKind::Power { alpha, .. } = w.kind() {
        if *alpha < 0.0 {
            gmax = gmax.min(0.9 * (-(w.dim() as f64) / alpha - 1.0));
        }
    }
    (0..8).rev().map(|k| gmax * 0.5f64.powi(k)).collect()
}

/// Largest candidate γ with `((w^{1+γ})_B)^{1/(1+γ)} <= N (w)_B` on every ball; 0 if none.
pub fn reverse_holder_gamma(w: &Weight, fam: &BallFamily, budget: f64, candidates: &[f64]) -> Result<f64> {
    check_family(w, fam)?;
    if !(budget >= 1.0) {
        return invalid("reverse Hölder budget must be >= 1");
    }
    let mut sorted: Vec<f64> = candidates.iter().copied().filter(|g| *g > 0.0 && g.is_finite()).collect();
    sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
    for g in sorted {
        let ok = per_ball(fam, |c, r| {
            let hi = ball_average(w, c, r, 1.0 + g)?.powf(1.0 / (1.0 + g));
            let lo = ball_average(w, c, r, 1.0)?;
            Ok(hi <= budget * lo * (1.0 + 1e-12))
        });
        if let Ok(v) = ok {
            if v.into_iter().all(|b| b) {
                return Ok(g);
            }
        }
    }
    Ok(0.0)
}

/// `η = 1 - (1-θ)^{1+n0/2} M0^{-n0/2}`.
pub fn eta(theta: f64, ctx: &WeightContext) -> f64 {
    let k = ctx.half_n0();
    1.0 - (1.0 - theta).powf(1.0 + k) * ctx.m0.powf(-k)
}

/// Nested test pairs `(S1, S2)`: sub-balls of relative volume `ratio` at several offsets.
pub(crate) fn sub_balls(c: &[f64], r: f64, ratio: f64) -> Vec<(Vec<f64>, f64)> {
    let n = c.len();
    let r1 = r * ratio.powf(1.0 / n as f64);
    let mut out = Vec::new();
    for axis in 0..n {
        for s in [-1.0, -0.5, 0.0, 0.5, 1.0] {
            if axis > 0 && s == 0.0 {
                continue;
            }
            let mut x = c.to_vec();
            x[axis] += s * (r - r1);
            out.push((x, r1));
        }
    }
    out
}

/// Doubling constant estimate for `w^p` plus the nested-set bound with explicit η.
pub fn doubling_report(w: &Weight, p: f64, fam: &BallFamily, theta: f64, ctx: &WeightContext) -> Result<AuditReport> {
    check_family(w, fam)?;
    if !(theta > 0.0 && theta < 1.0) {
        return invalid("theta must lie in (0, 1)");
    }
    let v = per_ball(fam, |c, r| {
        let (small, _) = w.ball_integral(c, r, p)?;
        let (big, _) = w.ball_integral(c, 2.0 * r, p)?;
        let (whole, m2) = w.ball_integral(c, r, p)?;
        let mut worst: f64 = 0.0;
        for (x, r1) in sub_balls(c, r, theta) {
            let (part, m1) = match w.ball_integral(&x, r1, p) {
                Err(Error::EmptyBall) => continue,
                r => r?,
            };
            if m1 <= theta * m2 * (1.0 + 1e-12) {
                worst = worst.max(part / whole);
            }
        }
        Ok((big / small, worst))
    })?;
    let n1 = max_of(&v.iter().map(|t| t.0).collect::<Vec<_>>());
    let worst = max_of(&v.iter().map(|t| t.1).collect::<Vec<_>>());
    let e = eta(theta, ctx);
    let mut rep = AuditReport::new("doubling", "weights/doubling-and-nested-sets");
    let lebesgue = 2f64.powi(w.dim() as i32);
    rep.push(AuditRow::new("doubling_constant", n1, lebesgue, n1, None, n1.is_finite()));
    rep.push(AuditRow::new("nested_set_eta", worst, e, worst / e, Some(1.0), worst <= e * (1.0 + TOL_QUAD)));
    rep.note("theta", theta);
    rep.note("eta", e);
    rep.note("p", p);
    rep.note("n0", ctx.n0 as f64);
    rep.note("m0", ctx.m0);
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sqrt_weight() -> Weight {
        Weight::power(0.5, vec![0.0], Region::interval(-1.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn power_averages_match_antiderivative() {
        let w = sqrt_weight();
        assert_relative_eq!(ball_average(&w, &[0.0], 1.0, 1.0).unwrap(), 2.0 / 3.0, max_relative = 1e-15);
        assert_relative_eq!(ball_average(&w, &[0.0], 1.0, -1.0).unwrap(), 2.0, max_relative = 1e-15);
        let one = Weight::constant(1.0, Region::interval(-1.0, 1.0).unwrap()).unwrap();
        assert_eq!(ball_average(&one, &[0.3], 0.2, 1.0).unwrap(), 1.0);
    }

    #[test]
    fn errors_for_bad_balls_and_powers() {
        let w = sqrt_weight();
        assert_eq!(ball_average(&w, &[5.0], 1.0, 1.0), Err(Error::EmptyBall));
        assert!(matches!(ball_average(&w, &[0.0], 1.0, -2.0), Err(Error::NonIntegrable { .. })));
    }

    #[test]
    fn a2_of_sqrt_weight_on_centered_balls() {
        let w = sqrt_weight();
        let fam = BallFamily::centered(vec![0.0], BallFamily::log_radii(0.01, 1.0, 12)).unwrap();
        assert_relative_eq!(aq_characteristic(&w, 2.0, &fam).unwrap(), 4.0 / 3.0, max_relative = 1e-12);
        let off = BallFamily::new(vec![vec![-0.5], vec![0.0], vec![0.3]], BallFamily::log_radii(0.01, 1.0, 12)).unwrap();
        let v = aq_characteristic(&w, 2.0, &off).unwrap();
        assert!(v >= 4.0 / 3.0 - 1e-12 && v.is_finite());
    }

    #[test]
    fn identity_weight_is_exactly_one() {
        let w = Weight::constant(1.0, Region::interval(-1.0, 1.0).unwrap()).unwrap();
        let fam = BallFamily::default_for(w.domain(), 9).unwrap();
        for q in [1.0, 2.0, 3.0] {
            assert_eq!(aq_characteristic(&w, q, &fam).unwrap(), 1.0);
        }
    }

    #[test]
    fn a1_branch_uses_essential_infimum() {
        // |x|^{-1/2}: avg over (-r, r) is 2 r^{-1/2}, inf is r^{-1/2}
        let w = Weight::power(-0.5, vec![0.0], Region::interval(-1.0, 1.0).unwrap()).unwrap();
        let fam = BallFamily::centered(vec![0.0], vec![0.25, 0.5]).unwrap();
        assert_relative_eq!(aq_characteristic(&w, 1.0, &fam).unwrap(), 2.0, max_relative = 1e-14);
        assert_eq!(aq_characteristic(&sqrt_weight(), 1.0, &fam).unwrap(), f64::INFINITY);
    }

    #[test]
    fn beta_condition_examples() {
        let d = Region::interval(-1.0, 1.0).unwrap();
        let ctx = WeightContext::new(1, 1.0).unwrap();
        let fam = BallFamily::default_for(&d, 9).unwrap();
        let rep = check_beta_condition(&Weight::constant(1.0, d.clone()).unwrap(), &ctx, &fam).unwrap();
        assert!(rep.pass());
        assert_eq!(rep.row("beta_inverse_aq").unwrap().lhs, 1.0);
        let ctx10 = WeightContext::new(1, 10.0).unwrap();
        let w = Weight::power(0.1, vec![0.0], d.clone()).unwrap();
        let rep = check_beta_condition(&w, &ctx10, &fam).unwrap();
        assert!(rep.pass(), "{rep:?}");
        let bad = Weight::power(-3.0, vec![0.0], d).unwrap();
        assert!(matches!(check_beta_condition(&bad, &ctx10, &fam), Err(Error::NonIntegrable { .. })));
    }

    #[test]
    fn sub_balls_outside_the_domain_are_skipped() {
        let d = Region::interval(0.0, 1.0).unwrap();
        let fam = BallFamily::default_for(&d, 9).unwrap();
        let w = Weight::power(0.2, vec![0.5], d).unwrap();
        let rep = doubling_report(&w, 1.0, &fam, 0.5, &WeightContext::new(1, 4.0).unwrap()).unwrap();
        assert!(rep.row("doubling_constant").unwrap().constant.is_finite());
    }

    #[test]
    fn doubling_examples() {
        let d = Region::interval(-1.0, 1.0).unwrap();
        let ctx = WeightContext::new(1, 1.0).unwrap();
        let fam = BallFamily::centered(vec![0.0], BallFamily::log_radii(0.01, 0.5, 8)).unwrap();
        let one = Weight::constant(1.0, d.clone()).unwrap();
        let rep = doubling_report(&one, 1.0, &fam, 0.5, &ctx).unwrap();
        assert_eq!(rep.row("doubling_constant").unwrap().constant, 2.0);
        assert!(rep.pass());
        assert_eq!(eta(0.5, &WeightContext::new(2, 1.0).unwrap()), 0.75);
        let rep = doubling_report(&sqrt_weight(), 1.0, &fam, 0.5, &ctx).unwrap();
        assert_relative_eq!(rep.row("doubling_constant").unwrap().constant, 2f64.powf(1.5), max_relative = 1e-13);
    }

    #[test]
    fn reverse_holder_examples() {
        let d = Region::interval(-1.0, 1.0).unwrap();
        let fam = BallFamily::default_for(&d, 9).unwrap();
        let grid: Vec<f64> = (1..=20).map(|k| k as f64 * 0.1).collect();
        let one = Weight::constant(1.0, d.clone()).unwrap();
        assert_relative_eq!(reverse_holder_gamma(&one, &fam, 1.0, &grid).unwrap(), 2.0);
        assert_relative_eq!(reverse_holder_gamma(&sqrt_weight(), &fam, 2.0, &grid).unwrap(), 2.0);
        let spike = Weight::from_fn(d, vec![200], Rule::Midpoint, |x| if x[0].abs() < 0.006 { 1e4 } else { 1.0 }).unwrap();
        let g = reverse_holder_gamma(&spike, &fam, 2.0, &grid).unwrap();
        assert!(g < 0.5, "{g}");
    }

    #[test]
    fn two_dimensional_power_weight_matches_radial_formula() {
        let w = Weight::power(0.5, vec![0.0, 0.0], Region::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap()).unwrap();
        // centered disk: avg |x|^a = 2 r^a / (2 + a)
        assert_relative_eq!(ball_average(&w, &[0.0, 0.0], 0.5, 1.0).unwrap(), 2.0 * 0.5f64.sqrt() / 2.5, max_relative = 1e-13);
        // off-center disk clipped by the box, compared against a fine sampled grid
        let fine = Weight::from_fn(w.domain().clone(), vec![800, 800], Rule::Midpoint, |x| x[0].hypot(x[1]).sqrt()).unwrap();
        let a = ball_average(&w, &[0.7, 0.2], 0.6, 1.0).unwrap();
        let b = ball_average(&fine, &[0.7, 0.2], 0.6, 1.0).unwrap();
        assert_relative_eq!(a, b, max_relative = 1e-3);
        let area = w.ball_integral(&[0.9, 0.9], 0.5, 0.0).unwrap().1;
        let fine_area = fine.ball_integral(&[0.9, 0.9], 0.5, 0.0).unwrap().1;
        assert_relative_eq!(area, fine_area, max_relative = 1e-4);
    }

    #[test]
    fn trapezoid_and_midpoint_agree_on_smooth_weight() {
        let d = Region::interval(0.0, 1.0).unwrap();
        let t = Weight::from_fn(d.clone(), vec![400], Rule::Trapezoid, |x| 1.0 + x[0] * x[0]).unwrap();
        let m = Weight::from_fn(d, vec![400], Rule::Midpoint, |x| 1.0 + x[0] * x[0]).unwrap();
        let exact = 1.0 + 1.0 / 3.0;
        assert_relative_eq!(ball_average(&t, &[0.5], 0.5, 1.0).unwrap(), exact, max_relative = 1e-5);
        assert_relative_eq!(ball_average(&m, &[0.5], 0.5, 1.0).unwrap(), exact, max_relative = 1e-5);
    }
}
