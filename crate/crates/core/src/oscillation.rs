//! Mean oscillation of the weight and partial (per time slice) mean
//! oscillation of the coefficient, with the smallness gate.

use crate::error::{invalid, Error, Result};
use crate::field::{CoefficientField, Grid};
use crate::geometry::{height, SpaceTimePoint};
use crate::report::{AuditReport, AuditRow};
use crate::weights::{ball_average, BallFamily, Weight};
use rayon::prelude::*;

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationConfig {
    pub r0: f64,
    pub delta: f64,
    /// every `center_stride`-th node (and level) is a center
    pub center_stride: usize,
    pub radii: Vec<f64>,
}

impl OscillationConfig {
    pub fn new(r0: f64, delta: f64, center_stride: usize, radii: Vec<f64>) -> Result<Self> {
        if !(r0 > 0.0 && r0 < 1.0) || !(delta >= 0.0) || center_stride == 0 {
            return invalid("oscillation config needs R0 in (0,1), delta >= 0, stride >= 1");
        }
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0 && *r < r0)) {
            return invalid("radius grid must be non-empty and inside (0, R0)");
        }
        Ok(Self { r0, delta, center_stride, radii })
    }

    /// 24 log-spaced radii from two grid cells up to just below `R0`.
    pub fn for_grid(grid: &Grid, r0: f64, delta: f64, center_stride: usize) -> Result<Self> {
        let r_min = 2.0 * grid.h();
        if !(r_min < r0) {
            return invalid("R0 must exceed two grid cells");
        }
        Self::new(r0, delta, center_stride, BallFamily::log_radii(r_min, r0 * (1.0 - 1e-9), 24))
    }
}

// products of averages near 1 leave rounding residue of a few ulps
const ROUNDING_FLOOR: f64 = 8.0 * f64::EPSILON;

/// `(1/β(B)) ∫_B |β - (β)_B|² β^{-1}`, via the identity `(β)_B (β^{-1})_B - 1`.
pub fn theta_beta_ms(beta: &Weight, x0: &[f64], r: f64) -> Result<f64> {
    let v = ball_average(beta, x0, r, 1.0)? * ball_average(beta, x0, r, -1.0)? - 1.0;
    Ok(if v <= ROUNDING_FLOOR { 0.0 } else { v })
}

fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Mean over `Q_{r,β}(z0) ∩ Ω_T` of `|A - (A)_{B_r(x0) ∩ Ω}(t)|²`, with
/// `Ω = mask ∩ grid`. Face values are constant on `[x_i, x_{i+1}] × (t_{k-1}, t_k]`.
pub fn theta_a_ms(a: &CoefficientField, grid: &Grid, beta: &Weight, z0: &SpaceTimePoint, r: f64, mask: (f64, f64)) -> Result<f64> {
    a.check_faces(grid)?;
    let x0 = z0.x[0];
    let (xa, xb) = ((x0 - r).max(mask.0).max(grid.x_lo), (x0 + r).min(mask.1).min(grid.x_hi));
    let ht = height(beta, &z0.x, r)?;
    let (ta, tb) = (z0.t - ht, z0.t);
    let (mut num, mut den) = (0.0, 0.0);
    for k in 1..=grid.nt {
        let wt = overlap(grid.t(k - 1), grid.t(k), ta, tb);
        if wt == 0.0 {
            continue;
        }
        let cells: Vec<(f64, f64)> = (0..grid.nx)
            .filter_map(|i| {
                let l = overlap(grid.x(i), grid.x(i + 1), xa, xb);
                (l > 0.0).then(|| (l, a.scalar(k, i)))
            })
            .collect();
        let len: f64 = cells.iter().map(|c| c.0).sum();
        if len == 0.0 {
            continue;
        }
        den += wt * len;
        let first = cells[0].1;
        if cells.iter().all(|c| c.1 == first) {
            continue;
        }
        let mean = cells.iter().map(|c| c.0 * c.1).sum::<f64>() / len;
        num += wt * cells.iter().map(|c| c.0 * (c.1 - mean).powi(2)).sum::<f64>();
    }
    if den == 0.0 {
        return Err(Error::EmptyRegion);
    }
    Ok(num / den)
}

/// Largest value and its location.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Peak {
    value: f64,
    x: f64,
    t: f64,
    r: f64,
}

fn peak_of(v: Vec<Peak>) -> Peak {
    v.into_iter().fold(Peak { value: 0.0, x: f64::NAN, t: f64::NAN, r: f64::NAN }, |a, b| if b.value > a.value { b } else { a })
}

/// Supremum of `sqrt(Θ_β)` over centers `xs` and `radii`.
pub fn theta_beta_sup(beta: &Weight, centers: &[Vec<f64>], radii: &[f64]) -> Result<(f64, Vec<f64>, f64)> {
    let pairs: Vec<(usize, f64)> = (0..centers.len()).flat_map(|c| radii.iter().map(move |r| (c, *r))).collect();
    let vals = pairs
        .par_iter()
        .map(|(c, r)| theta_beta_ms(beta, &centers[*c], *r).map(|v| (v.sqrt(), *c, *r)))
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let best = vals.into_iter().fold((0.0, usize::MAX, f64::NAN), |a, b| if b.0 > a.0 { b } else { a });
    let at = centers.get(best.1).cloned().unwrap_or_default();
    Ok((best.0, at, best.2))
}

/// Gate `sup sqrt(Θ_A) + sup sqrt(Θ_β) < δ` over grid-node centers.
pub fn oscillation_supremum(a: &CoefficientField, grid: &Grid, beta: &Weight, cfg: &OscillationConfig, mask: (f64, f64)) -> Result<AuditReport> {
    let s = cfg.center_stride;
    let xs: Vec<f64> = (0..=grid.nx).step_by(s).map(|i| grid.x(i)).filter(|x| *x >= mask.0 && *x <= mask.1).collect();
    let ks: Vec<usize> = (1..=grid.nt).step_by(s).chain(std::iter::once(grid.nt)).collect();
    if xs.is_empty() {
        return invalid("no centers inside the mask");
    }
    let jobs: Vec<(f64, usize, f64)> = xs.iter().flat_map(|x| ks.iter().flat_map(move |k| cfg.radii.iter().map(move |r| (*x, *k, *r)))).collect();
    let a_vals = jobs
        .par_iter()
        .map(|(x, k, r)| {
            let z = SpaceTimePoint::new(vec![*x], grid.t(*k));
            match theta_a_ms(a, grid, beta, &z, *r, mask) {
                Ok(v) => Ok(Peak { value: v.sqrt(), x: *x, t: z.t, r: *r }),
                Err(Error::EmptyRegion) => Ok(Peak { value: 0.0, x: *x, t: z.t, r: *r }),
                Err(e) => Err(e),
            }
        })
        .collect::<Vec<_>>()
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    let pa = peak_of(a_vals);
    let centers: Vec<Vec<f64>> = xs.iter().map(|x| vec![*x]).collect();
    let (sb, bx, br) = theta_beta_sup(beta, &centers, &cfg.radii)?;
    let sum = pa.value + sb;
    let pass = sum < cfg.delta || sum == 0.0;
    let mut rep = AuditReport::new("oscillation", "oscillation/smallness-gate");
    rep.push(AuditRow::info("theta_a_sup", pa.value, 0.0, pa.value));
    rep.push(AuditRow::info("theta_beta_sup", sb, 0.0, sb));
    rep.push(AuditRow::new("smallness_gate", sum, cfg.delta, sum, Some(cfg.delta), pass));
    rep.note("theta_a_peak_x", pa.x);
    rep.note("theta_a_peak_t", pa.t);
    rep.note("theta_a_peak_r", pa.r);
    rep.note("theta_beta_peak_x", bx.first().copied().unwrap_or(f64::NAN));
    rep.note("theta_beta_peak_r", br);
    rep.note("r0", cfg.r0);
    rep.note("centers", (xs.len() * ks.len()) as f64);
    rep.note("radii", cfg.radii.len() as f64);
    rep.tag("gate", if pass { "pass" } else { "fail" });
    Ok(rep)
}
