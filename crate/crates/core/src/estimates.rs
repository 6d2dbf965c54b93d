//! Discrete norms and the audits of the local and global estimates.
//!
//! Integrals treat node values as constant on dual cells and face values as
//! constant on grid cells; level `k` covers `(t_{k-1}, t_k]`. Boxes are
//! intersected exactly with these cells.

use crate::error::{invalid, Error, Result};
use crate::field::{CoefficientField, FaceField, Grid, SolutionField};
use crate::geometry::{height, CylinderKind, SpaceTimePoint, WeightedCylinder};
use crate::oscillation::{theta_a_ms, theta_beta_ms};
use crate::report::{num, AuditReport, AuditRow, Table};
use crate::solver::solve_frozen;
use crate::weights::{ball_average, Weight};
use serde_json::{Map, Value};

fn overlap(a: f64, b: f64, c: f64, d: f64) -> f64 {
    (b.min(d) - a.max(c)).max(0.0)
}

/// Axis-aligned space-time box `[xa, xb] × [ta, tb]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Boxed {
    pub xa: f64,
    pub xb: f64,
    pub ta: f64,
    pub tb: f64,
}

impl Boxed {
    pub fn of(cyl: &WeightedCylinder) -> Self {
        let (x0, r) = (cyl.center.x[0], cyl.radius);
        let xa = if cyl.kind == CylinderKind::UpperHalf { x0 } else { x0 - r };
        let (ta, tb) = cyl.time_span();
        Self { xa, xb: x0 + r, ta, tb }
    }

    pub fn whole(g: &Grid) -> Self {
        Self { xa: g.x_lo, xb: g.x_hi, ta: g.t_start, tb: g.t_end() }
    }

    fn contains(&self, other: &Boxed) -> bool {
        other.xa >= self.xa && other.xb <= self.xb && other.ta >= self.ta && other.tb <= self.tb
    }
}

/// Spatial weights of nodes (`faces = false`) or faces over `[xa, xb]`.
fn space_weights(g: &Grid, xa: f64, xb: f64, faces: bool) -> Vec<f64> {
    if faces {
        (0..g.nx).map(|i| overlap(g.x(i), g.x(i + 1), xa, xb)).collect()
    } else {
        (0..g.nodes()).map(|i| {
            let (a, b) = g.dual_cell(i);
            overlap(a, b, xa, xb)
        }).collect()
    }
}

fn time_weights(g: &Grid, ta: f64, tb: f64) -> Vec<f64> {
    let mut w = vec![0.0; g.nt + 1];
    for k in 1..=g.nt {
        w[k] = overlap(g.t(k - 1), g.t(k), ta, tb);
    }
    w
}

/// `∫∫_box f` for node (`faces = false`) or face data `f(k, i)`, plus the box measure inside the grid.
pub fn box_integral(g: &Grid, bx: &Boxed, faces: bool, f: impl Fn(usize, usize) -> f64) -> (f64, f64) {
    let sw = space_weights(g, bx.xa, bx.xb, faces);
    let tw = time_weights(g, bx.ta, bx.tb);
    let (mut s, mut m) = (0.0, 0.0);
    for (k, wt) in tw.iter().enumerate().filter(|(_, w)| **w > 0.0) {
        for (i, ws) in sw.iter().enumerate().filter(|(_, w)| **w > 0.0) {
            s += wt * ws * f(k, i);
            m += wt * ws;
        }
    }
    (s, m)
}

fn beta_masses(g: &Grid, beta: &Weight, xa: f64, xb: f64) -> Result<Vec<f64>> {
    (0..g.nodes())
        .map(|i| {
            let (a, b) = g.dual_cell(i);
            let (lo, hi) = (a.max(xa), b.min(xb));
            if hi > lo { beta.interval_integral(lo, hi, 1.0) } else { Ok(0.0) }
        })
        .collect()
}

/// `sup_{t_k ∈ [ta, tb]} ∫_{[xa,xb]} u(t_k)² β`.
fn sup_energy(u: &SolutionField, beta: &Weight, bx: &Boxed) -> Result<f64> {
    let g = &u.grid;
    let bm = beta_masses(g, beta, bx.xa, bx.xb)?;
    let tol = 1e-9 * g.tau;
    Ok((0..=g.nt)
        .filter(|k| g.t(*k) >= bx.ta - tol && g.t(*k) <= bx.tb + tol)
        .map(|k| bm.iter().enumerate().map(|(i, m)| m * u.get(k, i).powi(2)).sum::<f64>())
        .fold(0.0, f64::max))
}

fn grad_sq(u: &SolutionField) -> impl Fn(usize, usize) -> f64 + '_ {
    move |k, i| u.grad(k, i).powi(2)
}

/// Backward cylinder `Q_{ρ,β}(z0)`.
pub fn backward(beta: &Weight, z0: &SpaceTimePoint, rho: f64) -> Result<WeightedCylinder> {
    WeightedCylinder::new(beta, z0.clone(), rho, CylinderKind::Backward)
}

/// Energy audit on `Q_{3r/2} ⊂ Q_{2r}`: improved and basic Caccioppoli forms.
pub fn energy_audit(u: &SolutionField, beta: &Weight, f: &FaceField, inner: &WeightedCylinder, outer: &WeightedCylinder, budget: f64) -> Result<AuditReport> {
    let (bi, bo) = (Boxed::of(inner), Boxed::of(outer));
    if !(inner.radius < outer.radius) || !bo.contains(&bi) {
        return invalid("inner cylinder must lie strictly inside the outer one");
    }
    let g = &u.grid;
    let r = outer.radius / 2.0;
    let sup = sup_energy(u, beta, &bi)?;
    let (gi, _) = box_integral(g, &bi, true, grad_sq(u));
    let lhs = sup + gi;
    let (u2, _) = box_integral(g, &bo, false, |k, i| u.get(k, i).powi(2));
    let (f2, _) = box_integral(g, &bo, true, |k, i| f.get(k, i).powi(2));
    let rhs = u2 / (r * r) + f2;
    let n_emp = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    // basic form: u²[1 + r^{-2} + β/(r² Ψ(2r))]
    let cells = g.beta_cells(beta)?;
    let psi2 = height(beta, &outer.center.x, outer.radius)? / (outer.radius * outer.radius);
    let (ub, _) = box_integral(g, &bo, false, |k, i| u.get(k, i).powi(2) * (1.0 + 1.0 / (r * r) + cells[i] / (r * r * psi2)));
    let rhs_basic = ub + f2;
    let n_basic = if lhs == 0.0 { 0.0 } else { lhs / rhs_basic };
    let mut rep = AuditReport::new("energy", "energy/caccioppoli-improved");
    rep.push(AuditRow::budgeted("improved_caccioppoli", lhs, rhs, n_emp, budget));
    rep.push(AuditRow::budgeted("basic_caccioppoli", lhs, rhs_basic, n_basic, budget));
    rep.note("sup_energy", sup);
    rep.note("gradient_energy", gi);
    rep.note("r", r);
    Ok(rep)
}

/// The pair `(Q_{3r/2}, Q_{2r})` about `z0`.
pub fn caccioppoli_pair(beta: &Weight, z0: &SpaceTimePoint, r: f64) -> Result<(WeightedCylinder, WeightedCylinder)> {
    Ok((backward(beta, z0, 1.5 * r)?, backward(beta, z0, 2.0 * r)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    Interior,
    Boundary,
}

/// Poincaré-type audit with the oscillation term moved to the left.
pub fn poincare_audit(u: &SolutionField, beta: &Weight, f: &FaceField, cyl: &WeightedCylinder, variant: Variant, budget: f64) -> Result<AuditReport> {
    let g = &u.grid;
    let bx = Boxed::of(cyl);
    let theta = theta_beta_ms(beta, &cyl.center.x, cyl.radius)?;
    if budget * theta >= 1.0 {
        return Err(Error::GateFailed(format!("N_budget * theta_beta = {} >= 1", budget * theta)));
    }
    let mean = match variant {
        Variant::Interior => {
            let (s, m) = box_integral(g, &bx, false, |k, i| u.get(k, i));
            if m == 0.0 {
                return Err(Error::EmptyRegion);
            }
            s / m
        }
        Variant::Boundary => 0.0,
    };
    let (lhs, _) = box_integral(g, &bx, false, |k, i| (u.get(k, i) - mean).powi(2));
    let (gr, _) = box_integral(g, &bx, true, grad_sq(u));
    let (f2, _) = box_integral(g, &bx, true, |k, i| f.get(k, i).powi(2));
    let r = cyl.radius;
    let rhs = r * r * (gr + f2) + theta * lhs;
    let n_emp = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    let mut rep = AuditReport::new(
        "poincare",
        match variant {
            Variant::Interior => "energy/poincare-interior",
            Variant::Boundary => "energy/poincare-boundary",
        },
    );
    rep.push(AuditRow::budgeted("poincare", lhs, rhs, n_emp, budget));
    rep.note("theta_beta", theta);
    rep.note("scaled_by_r2", if gr + f2 > 0.0 { lhs / (gr + f2) } else { 0.0 });
    Ok(rep)
}

/// Lipschitz audit of a frozen solution `v` on `Q_r ⊂ Q_{2r}` (cylinders of `beta`).
pub fn lipschitz_audit(v: &SolutionField, beta: &Weight, beta_bar: f64, z0: &SpaceTimePoint, r: f64, budget: f64) -> Result<AuditReport> {
    let g = &v.grid;
    let inner = Boxed::of(&backward(beta, z0, r)?);
    let outer = Boxed::of(&backward(beta, z0, 2.0 * r)?);
    let tol = 1e-9 * (g.h() + g.tau);
    let in_t = |k: usize| g.t(k) >= inner.ta - tol && g.t(k) <= inner.tb + tol;
    let (mut vt, mut vx) = (0.0f64, 0.0f64);
    for k in 1..=g.nt {
        if !in_t(k) {
            continue;
        }
        for i in 0..g.nodes() {
            if g.x(i) >= inner.xa - tol && g.x(i) <= inner.xb + tol {
                vt = vt.max(v.dt(k, i).abs());
            }
        }
        for i in 0..g.nx {
            if g.x(i) >= inner.xa - tol && g.x(i + 1) <= inner.xb + tol {
                vx = vx.max(v.grad(k, i).abs());
            }
        }
    }
    let (s, m) = box_integral(g, &outer, true, grad_sq(v));
    let rhs = if m > 0.0 { (s / m).sqrt() } else { 0.0 };
    let lhs = r * beta_bar * vt + vx;
    let n_emp = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    let mut rep = AuditReport::new("lipschitz", "frozen/lipschitz-interior");
    rep.push(AuditRow::budgeted("lipschitz", lhs, rhs, n_emp, budget));
    rep.note("sup_time_derivative", vt);
    rep.note("sup_gradient", vx);
    Ok(rep)
}

/// Ball averages `(β)_B` and per-level `(A)_{B ∩ Ω}(t)` used by the frozen problem.
pub fn frozen_coefficients(beta: &Weight, a: &CoefficientField, g: &Grid, x0: f64, rho: f64) -> Result<(f64, Vec<f64>)> {
    a.check_faces(g)?;
    let bb = ball_average(beta, &[x0], rho, 1.0)?;
    let sw = space_weights(g, x0 - rho, x0 + rho, true);
    let len: f64 = sw.iter().sum();
    if len == 0.0 {
        return Err(Error::EmptyRegion);
    }
    let abar = (0..=g.nt).map(|k| sw.iter().enumerate().map(|(i, w)| w * a.scalar(k, i)).sum::<f64>() / len).collect();
    Ok((bb, abar))
}

/// Gradient gap between `u` and the frozen solution with `u`'s data.
///
/// `v` solves on `Q_R(z0)`, the gap is measured on `Q_{R/2}(z0)`, and `u`,
/// `F` are first divided by `λ = (avg_{Q_R} |∇u|²)^{1/2}`.
pub fn freeze_compare(u: &SolutionField, beta: &Weight, a: &CoefficientField, f: &FaceField, z0: &SpaceTimePoint, big_r: f64, refine: usize) -> Result<AuditReport> {
    let g = &u.grid;
    let outer = backward(beta, z0, big_r)?;
    let inner = backward(beta, z0, big_r / 2.0)?;
    let (bo, bi) = (Boxed::of(&outer), Boxed::of(&inner));
    let (s, m) = box_integral(g, &bo, true, grad_sq(u));
    if m == 0.0 {
        return Err(Error::EmptyRegion);
    }
    let mut rep = AuditReport::new("freeze_compare", "frozen/gradient-comparison");
    let lambda = (s / m).sqrt();
    if lambda == 0.0 {
        rep.push(AuditRow::info("gradient_gap", 0.0, 0.0, 0.0));
        rep.note("lambda", 0.0);
        return Ok(rep);
    }
    if !lambda.is_finite() {
        return Err(Error::PreconditionFailed("gradient average is not finite".into()));
    }
    let un = u.scaled(1.0 / lambda);
    let (bb, abar) = frozen_coefficients(beta, a, g, z0.x[0], big_r)?;
    let v = solve_frozen(bb, &abar, &outer, &un, refine)?;
    let w = crate::solver::window(g, &outer)?;
    let refine = refine.max(1);
    // v levels aligned with u levels k = k_lo + s/refine
    let gap = |k: usize, i: usize| -> f64 {
        if k < w.k_lo || k > w.k_hi || i < w.i_lo || i >= w.i_hi {
            return f64::NAN;
        }
        (un.grad(k, i) - v.grad((k - w.k_lo) * refine, i - w.i_lo)).powi(2)
    };
    let (gs, gm) = box_integral(g, &bi, true, gap);
    if !(gm > 0.0) || !gs.is_finite() {
        return Err(Error::PreconditionFailed("inner cylinder is not covered by the frozen window".into()));
    }
    let eps = (gs / gm).sqrt();
    let theta_a = match theta_a_ms(a, g, beta, z0, big_r, (g.x_lo, g.x_hi)) {
        Ok(v) => v,
        Err(Error::EmptyRegion) => 0.0,
        Err(e) => return Err(e),
    };
    let theta_b = theta_beta_ms(beta, &z0.x, big_r)?;
    let (fs, fm) = box_integral(g, &bo, true, |k, i| f.get(k, i).powi(2));
    let f_avg = fs / fm / (lambda * lambda);
    let delta = (theta_a + theta_b + f_avg).sqrt();
    rep.push(AuditRow::info("gradient_gap", eps, delta, if delta > 0.0 { eps / delta } else { f64::INFINITY }));
    rep.note("lambda", lambda);
    rep.note("epsilon", eps);
    rep.note("delta", delta);
    rep.note("theta_a", theta_a);
    rep.note("theta_beta", theta_b);
    rep.note("forcing", f_avg);
    rep.note("beta_bar", bb);
    Ok(rep)
}

/// Discrete norms of a solution.
#[derive(Debug, Clone, PartialEq)]
pub struct NormReport {
    pub p: f64,
    pub u_lp: f64,
    pub grad_lp: f64,
    /// `‖A ∇u + F‖_{L^p}`, standing in for the negative norm of `β u_t`
    pub proxy_lp: f64,
    pub f_lp: f64,
    pub u_l2_beta: f64,
    pub sup_energy: f64,
    pub ratio: f64,
    pub budget: f64,
    pub energy_bound_holds: bool,
}

impl NormReport {
    pub fn pass(&self) -> bool {
        self.ratio <= self.budget && self.energy_bound_holds
    }

    pub fn to_value(&self) -> Value {
        let mut m = Map::new();
        for (k, v) in [
            ("p", self.p),
            ("u_lp", self.u_lp),
            ("grad_lp", self.grad_lp),
            ("proxy_lp", self.proxy_lp),
            ("f_lp", self.f_lp),
            ("u_l2_beta", self.u_l2_beta),
            ("sup_energy", self.sup_energy),
            ("ratio", self.ratio),
            ("budget", self.budget),
        ] {
            m.insert(k.into(), num(v));
        }
        m.insert("energy_bound_holds".into(), Value::Bool(self.energy_bound_holds));
        m.insert("pass".into(), Value::Bool(self.pass()));
        Value::Object(m)
    }
}

/// `W^{1,p}`-type norms and their ratio against `‖F‖_{L^p}`.
pub fn apriori_ratio(u: &SolutionField, beta: &Weight, a: &CoefficientField, f: &FaceField, p: f64, budget: f64) -> Result<NormReport> {
    if !(p >= 2.0) {
        return invalid("p must be at least 2");
    }
    let g = &u.grid;
    a.check_faces(g)?;
    let all = Boxed::whole(g);
    let lp = |s: f64| s.powf(1.0 / p);
    let u_lp = lp(box_integral(g, &all, false, |k, i| u.get(k, i).abs().powf(p)).0);
    let grad_lp = lp(box_integral(g, &all, true, |k, i| u.grad(k, i).abs().powf(p)).0);
    let proxy_lp = lp(box_integral(g, &all, true, |k, i| (a.scalar(k, i) * u.grad(k, i) + f.get(k, i)).abs().powf(p)).0);
    let f_lp = lp(box_integral(g, &all, true, |k, i| f.get(k, i).abs().powf(p)).0);
    let cells = g.beta_cells(beta)?;
    let u_l2_beta = box_integral(g, &all, false, |k, i| cells[i] * u.get(k, i).powi(2)).0.sqrt();
    let sup = sup_energy(u, beta, &all)?;
    let ratio = if f_lp == 0.0 { 0.0 } else { (u_lp + grad_lp + proxy_lp) / f_lp };
    // testing the scheme with u itself: ν ‖∇u‖_2 ≤ ‖F‖_2
    let g2 = box_integral(g, &all, true, grad_sq(u)).0.sqrt();
    let f2 = box_integral(g, &all, true, |k, i| f.get(k, i).powi(2)).0.sqrt();
    let energy_bound_holds = a.nu * g2 <= f2 * (1.0 + 1e-10) + 1e-300;
    Ok(NormReport { p, u_lp, grad_lp, proxy_lp, f_lp, u_l2_beta, sup_energy: sup, ratio, budget, energy_bound_holds })
}

/// Ratios over a refinement sweep and their relative spread `(max - min) / min`.
pub fn refinement_spread(ratios: &[f64]) -> f64 {
    let lo = ratios.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = ratios.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if lo > 0.0 { (hi - lo) / lo } else if hi == 0.0 { 0.0 } else { f64::INFINITY }
}

/// Time-shift audit with shift `m τ` and cutoff `φ`.
///
/// `lhs = ∫ ‖(u(t+h) - u(t)) φ‖²_{L²(β)} dt`,
/// `rhs = 2 h^{1/2} ‖A∇u + F‖_{L²} ‖u φ²‖_{L² W^{1,2}}`.
pub fn time_shift_audit(u: &SolutionField, beta: &Weight, a: &CoefficientField, f: &FaceField, phi: impl Fn(f64) -> f64, m: usize, budget: f64) -> Result<AuditReport> {
    let g = &u.grid;
    if m == 0 || m > g.nt {
        return invalid("shift must be between 1 and nt steps");
    }
    let hs = m as f64 * g.tau;
    let cells = g.beta_cells(beta)?;
    let ph: Vec<f64> = (0..g.nodes()).map(|i| phi(g.x(i))).collect();
    let mut lhs = 0.0;
    for k in 0..=(g.nt - m) {
        // level k stands for (t_k, t_k + τ]
        for i in 0..g.nodes() {
            let (xa, xb) = g.dual_cell(i);
            let d = (u.get(k + m, i) - u.get(k, i)) * ph[i];
            lhs += g.tau * (xb - xa) * cells[i] * d * d;
        }
    }
    let all = Boxed::whole(g);
    let proxy = box_integral(g, &all, true, |k, i| (a.scalar(k, i) * u.grad(k, i) + f.get(k, i)).powi(2)).0.sqrt();
    let w = |k: usize, i: usize| u.get(k, i) * ph[i] * ph[i];
    let l2 = box_integral(g, &all, false, |k, i| w(k, i).powi(2)).0;
    let h1 = box_integral(g, &all, true, |k, i| ((w(k, i + 1) - w(k, i)) / g.h()).powi(2)).0;
    let wnorm = (l2 + h1).sqrt();
    let rhs = 2.0 * hs.sqrt() * proxy * wnorm;
    let c = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    let mut rep = AuditReport::new("time_shift", "energy/time-shift");
    rep.push(AuditRow::budgeted("time_shift", lhs, rhs, c, budget));
    let literal = 2.0 * hs.sqrt() * proxy * wnorm * wnorm;
    rep.push(AuditRow::info("time_shift_squared_form", lhs, literal, if lhs == 0.0 { 0.0 } else { lhs / literal }));
    rep.note("shift", hs);
    rep.note("proxy", proxy);
    Ok(rep)
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Shift sweep over `h = τ, 2τ, 4τ, ...` with the fitted exponent of `lhs` in `h`.
pub fn time_shift_sweep(u: &SolutionField, beta: &Weight, a: &CoefficientField, f: &FaceField, phi: impl Fn(f64) -> f64 + Copy, shifts: &[usize], budget: f64) -> Result<(Table, f64, bool)> {
    let mut t = Table::new(&["shift", "lhs", "rhs", "constant"]);
    let (mut xs, mut ys, mut ok) = (vec![], vec![], true);
    for &m in shifts {
        let rep = time_shift_audit(u, beta, a, f, phi, m, budget)?;
        let row = &rep.rows[0];
        ok &= row.pass;
        let hs = m as f64 * u.grid.tau;
        t.push(vec![hs.into(), row.lhs.into(), row.rhs.into(), row.constant.into()]);
        xs.push(hs);
        ys.push(row.lhs);
    }
    Ok((t, loglog_slope(&xs, &ys), ok))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::manufactured;
    use crate::weights::Region;

    fn z(x: f64, t: f64) -> SpaceTimePoint {
        SpaceTimePoint::new(vec![x], t)
    }

    #[test]
    fn zero_field_passes_everything() {
        let g = manufactured::grid(16, 0.2).unwrap();
        let beta = manufactured::weight(0.0).unwrap();
        let u = SolutionField::from_fn(g.clone(), |_, _| 0.0).unwrap();
        let f = FaceField::zeros(&g);
        let a = CoefficientField::on_faces(&g, 0.5, |_, _| 1.0).unwrap();
        let (i, o) = caccioppoli_pair(&beta, &z(0.5, 0.2), 0.2).unwrap();
        let e = energy_audit(&u, &beta, &f, &i, &o, 1.0).unwrap();
        assert!(e.pass() && e.rows[0].lhs == 0.0);
        let r = apriori_ratio(&u, &beta, &a, &f, 2.0, 1.0).unwrap();
        assert_eq!(r.ratio, 0.0);
        let t = time_shift_audit(&u, &beta, &a, &f, |_| 1.0, 1, 1.0).unwrap();
        assert_eq!((t.rows[0].lhs, t.rows[0].rhs), (0.0, 0.0));
        let fc = freeze_compare(&u, &beta, &a, &f, &z(0.5, 0.2), 0.4, 2).unwrap();
        assert_eq!(fc.rows[0].lhs, 0.0);
    }

    #[test]
    fn energy_constant_is_homogeneous() {
        let m = manufactured::solve(0.2, 32, 0.2).unwrap();
        let (i, o) = caccioppoli_pair(&m.beta, &z(0.5, 0.2), 0.2).unwrap();
        let n1 = energy_audit(&m.u, &m.beta, &m.f, &i, &o, 10.0).unwrap().rows[0].constant;
        let n2 = energy_audit(&m.u.scaled(-7.5), &m.beta, &m.f.scaled(-7.5), &i, &o, 10.0).unwrap().rows[0].constant;
        assert!((n1 - n2).abs() <= 1e-10 * n1);
        assert!(energy_audit(&m.u, &m.beta, &m.f, &o, &i, 10.0).is_err());
    }

    #[test]
    fn poincare_constant_and_gate() {
        let g = manufactured::grid(16, 0.2).unwrap();
        let beta = manufactured::weight(0.0).unwrap();
        let u = SolutionField::from_fn(g.clone(), |_, _| 3.0).unwrap();
        let cyl = backward(&beta, &z(0.5, 0.2), 0.3).unwrap();
        let rep = poincare_audit(&u, &beta, &FaceField::zeros(&g), &cyl, Variant::Interior, 10.0).unwrap();
        assert!(rep.rows[0].lhs.abs() < 1e-25);
        let rough = Weight::power(0.9, vec![0.5], Region::interval(0.0, 1.0).unwrap()).unwrap();
        let cyl = backward(&rough, &z(0.5, 0.2), 0.3).unwrap();
        let err = poincare_audit(&u, &rough, &FaceField::zeros(&g), &cyl, Variant::Interior, 10.0);
        assert!(matches!(err, Err(Error::GateFailed(_))));
    }

    #[test]
    fn lipschitz_of_constant_and_caloric_data() {
        let g = Grid::new(0.0, 1.0, 40, 0.0, 0.0025, 80).unwrap();
        let beta = manufactured::weight(0.0).unwrap();
        let v = SolutionField::from_fn(g.clone(), |_, _| 2.0).unwrap();
        let rep = lipschitz_audit(&v, &beta, 1.0, &z(0.5, 0.2), 0.2, 10.0).unwrap();
        assert_eq!(rep.rows[0].lhs, 0.0);
        let mut last: Option<f64> = None;
        for nx in [20, 40, 80] {
            let g = Grid::new(0.0, 1.0, nx, 0.0, 0.2 / nx as f64, nx).unwrap();
            let v = SolutionField::from_fn(g, |x, t| x * x + 2.0 * t).unwrap();
            let n = lipschitz_audit(&v, &beta, 1.0, &z(0.5, 0.2), 0.2, 10.0).unwrap().rows[0].constant;
            if let Some(p) = last {
                assert!(((n - p) / p).abs() < 0.1);
            }
            last = Some(n);
        }
    }

    #[test]
    fn frozen_gap_is_discretization_only_for_constant_coefficients() {
        let g = manufactured::grid(32, 0.2).unwrap();
        let beta = manufactured::weight(0.0).unwrap();
        let a = CoefficientField::on_faces(&g, 0.5, |_, _| 1.0).unwrap();
        let f = FaceField::zeros(&g);
        let init: Vec<f64> = (0..g.nodes()).map(|i| (std::f64::consts::PI * g.x(i)).sin()).collect();
        let u = crate::solver::solve_ivbp(&beta, &a, &f, &g, &init).unwrap();
        let same = freeze_compare(&u, &beta, &a, &f, &z(0.5, 0.2), 0.4, 1).unwrap();
        assert!(same.notes["epsilon"] < 1e-12);
        let finer = freeze_compare(&u, &beta, &a, &f, &z(0.5, 0.2), 0.4, 4).unwrap();
        assert!(finer.notes["epsilon"] < 1e-2);
        assert!((finer.notes["lambda"] - same.notes["lambda"]).abs() < 1e-15);
    }

    #[test]
    fn slope_fit_recovers_power() {
        let x = [1.0, 2.0, 4.0];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(0.7)).collect();
        assert!((loglog_slope(&x, &y) - 0.7).abs() < 1e-12);
        assert!(refinement_spread(&[1.0, 1.05, 0.98]) < 0.1);
    }
}
