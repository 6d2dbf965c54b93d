//! Manufactured solution `u* = sin(πx) e^{-t}` on `(0,1)` for the weight
//! `β = |x - 1/2|^α`, with the flux `F` chosen so that `β u*_t - u*_xx = F_x`.

use crate::error::Result;
use crate::field::{CoefficientField, FaceField, Grid, SolutionField};
use crate::solver::solve_ivbp;
use crate::weights::{Region, Weight};
use std::f64::consts::PI;

pub fn exact(x: f64, t: f64) -> f64 {
    (PI * x).sin() * (-t).exp()
}

/// `G` with `G' = -|x - 1/2|^α sin(πx)`, odd about `1/2`.
fn g_term(alpha: f64, x: f64) -> f64 {
    let xx = x - 0.5;
    let (ax, sg) = (xx.abs(), xx.signum());
    if ax == 0.0 {
        return 0.0;
    }
    // cos(πX) expanded in powers of X, integrated term by term against |X|^α
    let mut sum = 0.0;
    let mut coef = 1.0; // (-1)^k π^{2k} / (2k)!
    for k in 0..60 {
        let e = alpha + 2.0 * k as f64 + 1.0;
        let term = coef * ax.powf(e) / e;
        sum += term;
        if term.abs() < 1e-18 * sum.abs().max(1e-300) {
            break;
        }
        let kk = 2.0 * k as f64;
        coef *= -PI * PI / ((kk + 1.0) * (kk + 2.0));
    }
    -sg * sum
}

/// Flux `F(x,t) = e^{-t}(-π cos(πx) + G(x))`.
pub fn flux(alpha: f64, x: f64, t: f64) -> f64 {
    (-t).exp() * (-PI * (PI * x).cos() + g_term(alpha, x))
}

pub fn weight(alpha: f64) -> Result<Weight> {
    Weight::power(alpha, vec![0.5], Region::interval(0.0, 1.0)?)
}

/// Grid with `nx` intervals on `(0,1)` and `τ = h²` up to `t_end`.
pub fn grid(nx: usize, t_end: f64) -> Result<Grid> {
    let h = 1.0 / nx as f64;
    let nt = (t_end / (h * h)).round() as usize;
    Grid::new(0.0, 1.0, nx, 0.0, t_end / nt as f64, nt)
}

/// Solution, weight and forcing of the manufactured problem.
pub struct Manufactured {
    pub beta: Weight,
    pub a: CoefficientField,
    pub f: FaceField,
    pub u: SolutionField,
}

pub fn solve(alpha: f64, nx: usize, t_end: f64) -> Result<Manufactured> {
    let g = grid(nx, t_end)?;
    let beta = weight(alpha)?;
    let a = CoefficientField::on_faces(&g, 0.5, |_, _| 1.0)?;
    let f = FaceField::from_fn(&g, |x, t| flux(alpha, x, t));
    let init: Vec<f64> = (0..g.nodes()).map(|i| exact(g.x(i), 0.0)).collect();
    let u = solve_ivbp(&beta, &a, &f, &g, &init)?;
    Ok(Manufactured { beta, a, f, u })
}

/// Space-time discrete L² error against the exact solution.
pub fn l2_error(u: &SolutionField) -> f64 {
    let g = &u.grid;
    let mut s = 0.0;
    for k in 1..=g.nt {
        for i in 0..g.nodes() {
            let (a, b) = g.dual_cell(i);
            let e = u.get(k, i) - exact(g.x(i), g.t(k));
            s += g.tau * (b - a) * e * e;
        }
    }
    s.sqrt()
}

/// Observed orders `log2(e_j / e_{j+1})` over dyadic refinements starting at `nx0`.
pub fn convergence_orders(alpha: f64, nx0: usize, levels: usize, t_end: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let errs = (0..levels)
        .map(|j| solve(alpha, nx0 << j, t_end).map(|m| l2_error(&m.u)))
        .collect::<Result<Vec<_>>>()?;
    let orders = errs.windows(2).map(|w| (w[0] / w[1]).log2()).collect();
    Ok((errs, orders))
}

/// Seeded smooth flux `Σ_j c_j sin(jπx + φ_j) cos(ω_j t)` with `j = 1..=modes`.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothFlux {
    terms: Vec<(f64, f64, f64, f64)>,
}

impl SmoothFlux {
    pub fn seeded(seed: u64, modes: usize) -> Self {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let terms = (1..=modes)
            .map(|j| {
                let c = rng.random_range(-1.0..1.0) / j as f64;
                (c, j as f64 * PI, rng.random_range(0.0..2.0 * PI), rng.random_range(0.0..10.0))
            })
            .collect();
        Self { terms }
    }

    pub fn eval(&self, x: f64, t: f64) -> f64 {
        self.terms.iter().map(|(c, k, ph, w)| c * (k * x + ph).sin() * (w * t).cos()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unweighted_flux_matches_closed_form() {
        for x in [0.0, 0.13, 0.5, 0.77, 1.0] {
            let closed = (PI * PI - 1.0) * (-0.3f64).exp() * (-(PI * x).cos() / PI);
            assert!((flux(0.0, x, 0.3) - closed).abs() < 1e-13);
        }
    }

    #[test]
    fn weighted_flux_has_the_right_derivative() {
        let alpha = 0.2;
        for x in [0.1, 0.3, 0.62, 0.9] {
            let d = 1e-5;
            let fx = (flux(alpha, x + d, 0.0) - flux(alpha, x - d, 0.0)) / (2.0 * d);
            let want = (PI * PI - (x - 0.5f64).abs().powf(alpha)) * (PI * x).sin();
            assert!((fx - want).abs() < 1e-6, "{fx} {want}");
        }
    }

    #[test]
    fn second_order_for_unit_weight() {
        let (_, orders) = convergence_orders(0.0, 16, 3, 0.1).unwrap();
        assert!(orders.iter().all(|o| *o >= 1.9), "{orders:?}");
    }
}
