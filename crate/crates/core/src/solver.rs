//! Conservative implicit scheme for `β(x) u_t - (A u_x)_x = F_x` in one
//! space dimension, plus the frozen-coefficient companion solve.
//!
//! Row `i` of step `k -> k+1`:
//! `(β_i/τ)(u_i^{k+1} - u_i^k) = [D(A D u)]_i + (F_{i+1/2} - F_{i-1/2})/h`
//! with `β_i` the average of β over the dual cell of node `i`.

use crate::error::{invalid, Error, Result};
use crate::field::{check_forcing, CoefficientField, FaceField, Grid, SolutionField};
use crate::geometry::{CylinderKind, WeightedCylinder};
use crate::weights::Weight;

/// Time-stepping weight: 1 is backward Euler, 1/2 is Crank-Nicolson.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub theta: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { theta: 1.0 }
    }
}

/// Tridiagonal solve by forward elimination. `lower[0]` and `upper[n-1]` are ignored.
pub fn thomas(lower: &[f64], diag: &[f64], upper: &[f64], rhs: &mut [f64], step: usize) -> Result<()> {
    let n = diag.len();
    let mut c = vec![0.0; n];
    let mut pivot = diag[0];
    if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
        return Err(Error::SingularSystem { step });
    }
    c[0] = upper[0] / pivot;
    rhs[0] /= pivot;
    for i in 1..n {
        pivot = diag[i] - lower[i] * c[i - 1];
        if !(pivot.abs() > 1e-300) || !pivot.is_finite() {
            return Err(Error::SingularSystem { step });
        }
        c[i] = if i + 1 < n { upper[i] / pivot } else { 0.0 };
        rhs[i] = (rhs[i] - lower[i] * rhs[i - 1]) / pivot;
    }
    for i in (0..n - 1).rev() {
        rhs[i] -= c[i] * rhs[i + 1];
    }
    Ok(())
}

/// Inputs of one sweep over the time levels of `grid`.
struct Sweep<'a> {
    grid: &'a Grid,
    beta: &'a [f64],
    /// flux coefficient on faces at level k
    a: &'a dyn Fn(usize, usize) -> f64,
    /// forcing on faces at level k
    f: &'a dyn Fn(usize, usize) -> f64,
    /// Dirichlet values (left, right) at level k
    bc: &'a dyn Fn(usize) -> (f64, f64),
    theta: f64,
}

fn sweep(s: &Sweep, initial: &[f64]) -> Result<Vec<f64>> {
    let g = s.grid;
    let (n, h, tau, th) = (g.nodes(), g.h(), g.tau, s.theta);
    if initial.len() != n {
        return invalid("initial data does not match the grid");
    }
    if s.beta.iter().any(|b| !(*b > 0.0) || !b.is_finite()) {
        return invalid("cell-averaged beta must be positive and finite");
    }
    let mut out = Vec::with_capacity(n * (g.nt + 1));
    out.extend_from_slice(initial);
    let m = n - 2;
    let (mut lo, mut di, mut up, mut rhs) = (vec![0.0; m], vec![0.0; m], vec![0.0; m], vec![0.0; m]);
    let h2 = h * h;
    for k in 1..=g.nt {
        let prev = &out[(k - 1) * n..k * n];
        let (bl, br) = (s.bc)(k);
        for j in 0..m {
            let i = j + 1;
            let (aw, ae) = ((s.a)(k, i - 1), (s.a)(k, i));
            let bt = s.beta[i] / tau;
            lo[j] = -th * aw / h2;
            up[j] = -th * ae / h2;
            di[j] = bt + th * (aw + ae) / h2;
            let div_f = ((s.f)(k, i) - (s.f)(k, i - 1)) / h;
            let mut r = bt * prev[i] + th * div_f;
            if th < 1.0 {
                let (aw0, ae0) = ((s.a)(k - 1, i - 1), (s.a)(k - 1, i));
                let lap = (ae0 * (prev[i + 1] - prev[i]) - aw0 * (prev[i] - prev[i - 1])) / h2;
                let div_f0 = ((s.f)(k - 1, i) - (s.f)(k - 1, i - 1)) / h;
                r += (1.0 - th) * (lap + div_f0);
            }
            rhs[j] = r;
        }
        rhs[0] -= lo[0] * bl;
        rhs[m - 1] -= up[m - 1] * br;
        thomas(&lo, &di, &up, &mut rhs, k)?;
        out.push(bl);
        out.extend_from_slice(&rhs);
        out.push(br);
    }
    Ok(out)
}

/// Solves with zero lateral Dirichlet data. The boundary entries of `initial` are overwritten by 0.
pub fn solve_ivbp(beta: &Weight, a: &CoefficientField, f: &FaceField, grid: &Grid, initial: &[f64]) -> Result<SolutionField> {
    solve_ivbp_with(beta, a, f, grid, initial, SolverOptions::default())
}

pub fn solve_ivbp_with(beta: &Weight, a: &CoefficientField, f: &FaceField, grid: &Grid, initial: &[f64], opts: SolverOptions) -> Result<SolutionField> {
    if beta.dim() != 1 {
        return invalid("the solver is one-dimensional");
    }
    if !(opts.theta >= 0.5 && opts.theta <= 1.0) {
        return invalid("theta must lie in [1/2, 1]");
    }
    a.check_faces(grid)?;
    a.check_ellipticity(a.nu)?;
    check_forcing(f, grid)?;
    let cells = grid.beta_cells(beta)?;
    let mut init = initial.to_vec();
    if init.len() == grid.nodes() {
        init[0] = 0.0;
        init[grid.nx] = 0.0;
    }
    let s = Sweep {
        grid,
        beta: &cells,
        a: &|k, i| a.scalar(k, i),
        f: &|k, i| f.get(k, i),
        bc: &|_| (0.0, 0.0),
        theta: opts.theta,
    };
    SolutionField::new(grid.clone(), sweep(&s, &init)?)
}

/// Node and level window of `u`'s grid covered by a cylinder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Window {
    pub i_lo: usize,
    pub i_hi: usize,
    pub k_lo: usize,
    pub k_hi: usize,
}

/// Snaps a cylinder to the nodes and levels of `grid`, clipping to the grid.
pub fn window(grid: &Grid, cyl: &WeightedCylinder) -> Result<Window> {
    if cyl.center.x.len() != 1 {
        return invalid("frozen solves are one-dimensional");
    }
    let (h, x0, r) = (grid.h(), cyl.center.x[0], cyl.radius);
    let left = if cyl.kind == CylinderKind::UpperHalf { x0 } else { x0 - r };
    let eps = 1e-9;
    let i_lo = ((left - grid.x_lo) / h - eps).ceil().max(0.0) as usize;
    let i_hi = (((x0 + r - grid.x_lo) / h + eps).floor() as isize).min(grid.nx as isize);
    let (ta, tb) = cyl.time_span();
    let k_lo = ((ta - grid.t_start) / grid.tau - eps).ceil().max(0.0) as usize;
    let k_hi = (((tb - grid.t_start) / grid.tau + eps).floor() as isize).min(grid.nt as isize);
    if i_hi < i_lo as isize + 2 || k_hi < k_lo as isize + 1 {
        return invalid("cylinder covers fewer than 3 nodes or 1 time step of the grid");
    }
    Ok(Window { i_lo, i_hi: i_hi as usize, k_lo, k_hi: k_hi as usize })
}

/// Solves `β̄ v_t - (Ā(t) v_x)_x = 0` on the cylinder with data from `u`.
///
/// `a_bar[k]` is used on `(t_{k-1}, t_k]` of `u`'s grid. Time steps are refined
/// `refine` times; lateral data is linear in time between levels of `u`.
/// The upper-half variant pins `v = 0` at its flat end `x = x0`.
pub fn solve_frozen(beta_bar: f64, a_bar: &[f64], cyl: &WeightedCylinder, u: &SolutionField, refine: usize) -> Result<SolutionField> {
    if !(beta_bar > 0.0) || !beta_bar.is_finite() {
        return invalid("beta_bar must be positive");
    }
    if a_bar.len() != u.grid.nt + 1 || a_bar.iter().any(|a| !(*a > 0.0) || !a.is_finite()) {
        return invalid("a_bar must hold one positive value per level of u");
    }
    let refine = refine.max(1);
    let w = window(&u.grid, cyl)?;
    let g = &u.grid;
    let sub = Grid::new(g.x(w.i_lo), g.x(w.i_hi), w.i_hi - w.i_lo, g.t(w.k_lo), g.tau / refine as f64, (w.k_hi - w.k_lo) * refine)?;
    let half = cyl.kind == CylinderKind::UpperHalf;
    let initial: Vec<f64> = (w.i_lo..=w.i_hi).map(|i| if half && i == w.i_lo { 0.0 } else { u.get(w.k_lo, i) }).collect();
    let lerp = |i: usize, s: usize| {
        let (kk, frac) = (w.k_lo + s / refine, (s % refine) as f64 / refine as f64);
        if frac == 0.0 {
            u.get(kk, i)
        } else {
            (1.0 - frac) * u.get(kk, i) + frac * u.get(kk + 1, i)
        }
    };
    let beta = vec![beta_bar; sub.nodes()];
    let coef = |s: usize| a_bar[w.k_lo + (s + refine - 1) / refine];
    let sw = Sweep {
        grid: &sub,
        beta: &beta,
        a: &|s, _| coef(s.max(1)),
        f: &|_, _| 0.0,
        bc: &|s| (if half { 0.0 } else { lerp(w.i_lo, s) }, lerp(w.i_hi, s)),
        theta: 1.0,
    };
    let values = sweep(&sw, &initial)?;
    SolutionField::new(sub.clone(), values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::SpaceTimePoint;
    use crate::weights::Region;

    fn unit() -> Weight {
        Weight::constant(1.0, Region::interval(0.0, 1.0).unwrap()).unwrap()
    }

    #[test]
    fn thomas_solves_a_small_system() {
        let (lo, di, up) = ([0.0, -1.0, -1.0], [2.0, 2.0, 2.0], [-1.0, -1.0, 0.0]);
        let mut r = [1.0, 0.0, 1.0];
        thomas(&lo, &di, &up, &mut r, 0).unwrap();
        for v in r {
            assert!((v - 1.0).abs() < 1e-15);
        }
        let mut r = [1.0, 1.0];
        assert_eq!(thomas(&[0.0, 1.0], &[1.0, 1.0], &[1.0, 0.0], &mut r, 7), Err(Error::SingularSystem { step: 7 }));
    }

    #[test]
    fn zero_data_gives_zero_solution() {
        let g = Grid::new(0.0, 1.0, 16, 0.0, 0.01, 10).unwrap();
        let a = CoefficientField::on_faces(&g, 0.5, |_, _| 1.0).unwrap();
        let u = solve_ivbp(&unit(), &a, &FaceField::zeros(&g), &g, &vec![0.0; 17]).unwrap();
        assert!(u.values.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn nonnegative_data_stays_nonnegative() {
        let g = Grid::new(0.0, 1.0, 32, 0.0, 0.001, 50).unwrap();
        let beta = Weight::power(0.5, vec![0.5], Region::interval(0.0, 1.0).unwrap()).unwrap();
        let a = CoefficientField::on_faces(&g, 0.25, |x, _| 1.0 + 0.5 * (8.0 * x).sin()).unwrap();
        let init: Vec<f64> = (0..33).map(|i| if (10..20).contains(&i) { 1.0 } else { 0.0 }).collect();
        let u = solve_ivbp(&beta, &a, &FaceField::zeros(&g), &g, &init).unwrap();
        assert!(u.values.iter().all(|v| *v >= 0.0));
    }

    #[test]
    fn caloric_polynomial_is_reproduced() {
        let g = Grid::new(0.0, 1.0, 20, 0.0, 0.01, 40).unwrap();
        let u = SolutionField::from_fn(g.clone(), |x, t| x * x + 2.0 * t).unwrap();
        let beta = unit();
        let cyl = WeightedCylinder::new(&beta, SpaceTimePoint::new(vec![0.5], 0.3), 0.3, CylinderKind::Backward).unwrap();
        let v = solve_frozen(1.0, &vec![1.0; 41], &cyl, &u, 3).unwrap();
        for k in 0..=v.grid.nt {
            for i in 0..v.grid.nodes() {
                let (x, t) = (v.grid.x(i), v.grid.t(k));
                assert!((v.get(k, i) - x * x - 2.0 * t).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn doubled_capacity_runs_at_half_speed() {
        let data = |x: f64, _t: f64| (std::f64::consts::PI * x).sin() + x;
        let g2 = Grid::new(0.0, 1.0, 16, 0.0, 0.02, 10).unwrap();
        let g1 = Grid::new(0.0, 1.0, 16, 0.0, 0.01, 10).unwrap();
        let u2 = SolutionField::from_fn(g2, data).unwrap();
        let u1 = SolutionField::from_fn(g1, data).unwrap();
        let beta = unit();
        let c2 = WeightedCylinder::new(&beta, SpaceTimePoint::new(vec![0.5], 0.2), 0.5, CylinderKind::Backward).unwrap();
        let c1 = WeightedCylinder::new(&beta, SpaceTimePoint::new(vec![0.5], 0.1), 0.5, CylinderKind::Backward).unwrap();
        // both windows span every level of their grid
        let v2 = solve_frozen(2.0, &vec![1.0; 11], &c2, &u2, 1);
        let v1 = solve_frozen(1.0, &vec![1.0; 11], &c1, &u1, 1);
        let (v2, v1) = (v2.unwrap(), v1.unwrap());
        assert_eq!(v2.values.len(), v1.values.len());
        for (a, b) in v2.values.iter().zip(&v1.values) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn half_cylinder_pins_the_flat_end() {
        let g = Grid::new(0.0, 1.0, 20, 0.0, 0.01, 20).unwrap();
        let u = SolutionField::from_fn(g, |x, t| x + t).unwrap();
        let beta = unit();
        let cyl = WeightedCylinder::new(&beta, SpaceTimePoint::new(vec![0.0], 0.2), 0.5, CylinderKind::UpperHalf).unwrap();
        let v = solve_frozen(1.0, &vec![1.0; 21], &cyl, &u, 2).unwrap();
        for k in 0..=v.grid.nt {
            assert_eq!(v.get(k, 0), 0.0);
            assert!((v.get(k, v.grid.nx) - (0.5 + v.grid.t(k))).abs() < 1e-12);
        }
    }
}
