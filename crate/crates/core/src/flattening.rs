//! Boundary flattening in the plane: `Φ(x', xⁿ) = (x', xⁿ - φ(x'))`.
//!
//! Coefficients push forward by congruence with `∇Φ`, weights by composition
//! with `Φ^{-1}`. Since `det ∇Φ = 1`, integrals are preserved.

use crate::error::{invalid, Error, Result};
use crate::field::CoefficientField;
use crate::geometry::height;
use crate::oscillation::theta_beta_ms;
use crate::report::{AuditReport, AuditRow, Table};
use crate::weights::{check_beta_condition, BallFamily, Region, Rule, Weight, WeightContext};
use rayon::prelude::*;
use std::f64::consts::PI;

/// Closed-form boundary profile with a Lipschitz bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ChartKind {
    /// `φ(s) = δ (s - base)`.
    Affine { base: f64 },
    /// `φ(s) = δ w e^{1/2} (1 - e^{-(s-base)²/(2w²)})`, with `sup |φ'| = δ` at `|s - base| = w`.
    Cup { base: f64, width: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryChart {
    pub delta: f64,
    pub kind: ChartKind,
}

impl BoundaryChart {
    pub fn new(delta: f64, kind: ChartKind) -> Result<Self> {
        if !(0.0..1.0).contains(&delta) {
            return invalid("chart Lipschitz bound must lie in [0, 1)");
        }
        match kind {
            ChartKind::Affine { base } if !base.is_finite() => invalid("chart base must be finite"),
            ChartKind::Cup { base, width } if !base.is_finite() || !(width > 0.0 && width.is_finite()) => {
                invalid("cup chart needs a finite base and positive width")
            }
            _ => Ok(Self { delta, kind }),
        }
    }

    pub fn flat() -> Self {
        Self { delta: 0.0, kind: ChartKind::Affine { base: 0.0 } }
    }

    pub fn affine(delta: f64) -> Result<Self> {
        Self::new(delta, ChartKind::Affine { base: 0.0 })
    }

    pub fn base(&self) -> f64 {
        match self.kind {
            ChartKind::Affine { base } | ChartKind::Cup { base, .. } => base,
        }
    }

    pub fn phi(&self, s: f64) -> f64 {
        match self.kind {
            ChartKind::Affine { base } => self.delta * (s - base),
            ChartKind::Cup { base, width } => {
                let u = (s - base) / width;
                self.delta * width * 0.5f64.exp() * (-(-0.5 * u * u).exp_m1())
            }
        }
    }

    pub fn dphi(&self, s: f64) -> f64 {
        match self.kind {
            ChartKind::Affine { .. } => self.delta,
            ChartKind::Cup { base, width } => {
                let u = (s - base) / width;
                self.delta * 0.5f64.exp() * u * (-0.5 * u * u).exp()
            }
        }
    }

    /// `∇Φ` at a point with tangential coordinate `s`, row-major.
    pub fn jacobian(&self, s: f64) -> [f64; 4] {
        [1.0, 0.0, -self.dphi(s), 1.0]
    }
}

pub fn phi_map(chart: &BoundaryChart, x: [f64; 2]) -> [f64; 2] {
    [x[0], x[1] - chart.phi(x[0])]
}

pub fn phi_inverse(chart: &BoundaryChart, y: [f64; 2]) -> [f64; 2] {
    [y[0], y[1] + chart.phi(y[0])]
}

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

/// Lattice points of the closed unit disk plus `4·per_axis` rim points.
fn unit_disk_samples(per_axis: usize) -> Vec<[f64; 2]> {
    let m = per_axis.max(2);
    let mut pts = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let p = [-1.0 + 2.0 * i as f64 / (m - 1) as f64, -1.0 + 2.0 * j as f64 / (m - 1) as f64];
            if p[0] * p[0] + p[1] * p[1] <= 1.0 {
                pts.push(p);
            }
        }
    }
    let rim = 4 * m;
    pts.extend((0..rim).map(|k| {
        let a = 2.0 * PI * k as f64 / rim as f64;
        [a.cos(), a.sin()]
    }));
    pts
}

fn directions() -> Vec<[f64; 2]> {
    (0..16).map(|k| (PI * k as f64 / 16.0).sin_cos()).map(|(s, c)| [c, s]).collect()
}

/// Checks `B_{r/2}(Φ^{-1}(y0)) ⊂ Φ^{-1}(B_r(y0)) ⊂ B_{2r}(Φ^{-1}(y0))` on lattice
/// samples, and the chain-rule bound `|∇Φᵀ ξ| ≤ 2|ξ|`.
pub fn inclusion_audit(chart: &BoundaryChart, y0: [f64; 2], r: f64, samples: usize) -> Result<AuditReport> {
    if !(r > 0.0 && r.is_finite()) || !y0.iter().all(|v| v.is_finite()) {
        return invalid("inclusion audit needs a finite center and r > 0");
    }
    let x0 = phi_inverse(chart, y0);
    let disk = unit_disk_samples(samples);
    let slack = 1.0 + 1e-12;
    let inner = disk
        .iter()
        .map(|p| dist(phi_map(chart, [x0[0] + 0.5 * r * p[0], x0[1] + 0.5 * r * p[1]]), y0) / r)
        .fold(0.0, f64::max);
    let outer = disk
        .iter()
        .map(|p| dist(phi_inverse(chart, [y0[0] + r * p[0], y0[1] + r * p[1]]), x0) / (2.0 * r))
        .fold(0.0, f64::max);
    let dirs = directions();
    let chain = disk
        .iter()
        .map(|p| {
            let g = chart.jacobian(x0[0] + r * p[0]);
            dirs.iter().map(|d| (d[0] + g[2] * d[1]).hypot(d[1])).fold(0.0, f64::max)
        })
        .fold(0.0, f64::max);
    let mut rep = AuditReport::new("flattening_inclusion", "flattening/inclusion");
    rep.push(AuditRow::new("inner_inclusion", inner, 1.0, inner, Some(1.0), inner <= slack));
    rep.push(AuditRow::new("outer_inclusion", outer, 1.0, outer, Some(1.0), outer <= slack));
    rep.push(AuditRow::new("chain_rule", chain, 2.0, chain, Some(2.0), chain <= 2.0 * slack));
    rep.note("delta", chart.delta);
    rep.note("samples", disk.len() as f64);
    Ok(rep)
}

/// `Ã = ∇Φ A ∇Φᵀ` at every sample, relocated to `Φ(x)`.
///
/// The returned field carries `ν(1-δ)²`, certified on 16 directions per sample.
/// The report holds `N_emp = max |Ã - A|_∞ / δ` against `budget`.
pub fn pushforward_coefficients(chart: &BoundaryChart, a: &CoefficientField, budget: f64) -> Result<(CoefficientField, AuditReport)> {
    if a.dim != 2 {
        return invalid("flattening needs a planar coefficient field");
    }
    let nu_t = a.nu * (1.0 - chart.delta).powi(2);
    let np = a.points.len();
    let dirs = directions();
    let mut values = Vec::with_capacity(a.values.len());
    let (mut b_max, mut cert) = (0.0f64, f64::INFINITY);
    for k in 0..a.times.len() {
        for j in 0..np {
            let m = a.matrix(k, j);
            let g = chart.jacobian(a.points[j][0]);
            let t = congruence(&g, m);
            for d in &dirs {
                let q = t[0] * d[0] * d[0] + (t[1] + t[2]) * d[0] * d[1] + t[3] * d[1] * d[1];
                cert = cert.min(q / nu_t);
                if q < nu_t * (1.0 - 1e-12) {
                    return Err(Error::EllipticityViolation {
                        index: k * np + j,
                        detail: format!("<Ãξ,ξ> = {q} below {nu_t}"),
                    });
                }
            }
            for (ti, mi) in t.iter().zip(m) {
                b_max = b_max.max((ti - mi).abs());
            }
            values.extend_from_slice(&t);
        }
    }
    let points = a.points.iter().map(|p| phi_map(chart, [p[0], p[1]]).to_vec()).collect();
    let out = CoefficientField::new(2, points, a.times.clone(), values, nu_t)?;
    let n_emp = if b_max == 0.0 { 0.0 } else { b_max / chart.delta };
    let mut rep = AuditReport::new("flattening_coefficients", "flattening/b-matrix");
    rep.push(AuditRow::budgeted("b_matrix", b_max, chart.delta, n_emp, budget));
    rep.push(AuditRow::new("ellipticity_certificate", cert, 1.0, cert, Some(1.0), cert >= 1.0 - 1e-12));
    rep.note("delta", chart.delta);
    rep.note("nu_tilde", nu_t);
    Ok((out, rep))
}

/// `G M Gᵀ` for 2×2 row-major matrices.
fn congruence(g: &[f64; 4], m: &[f64]) -> [f64; 4] {
    let gm = [
        g[0] * m[0] + g[1] * m[2],
        g[0] * m[1] + g[1] * m[3],
        g[2] * m[0] + g[3] * m[2],
        g[2] * m[1] + g[3] * m[3],
    ];
    [
        gm[0] * g[0] + gm[1] * g[1],
        gm[0] * g[2] + gm[1] * g[3],
        gm[2] * g[0] + gm[3] * g[1],
        gm[2] * g[2] + gm[3] * g[3],
    ]
}

/// `B = Ã - A` in closed form, for reference.
pub fn b_matrix(chart: &BoundaryChart, s: f64, m: &[f64]) -> [f64; 4] {
    let p = chart.dphi(s);
    [0.0, -p * m[0], -p * m[0], p * p * m[0] - p * (m[1] + m[2])]
}

/// `β̃ = β ∘ Φ^{-1}` sampled at cell midpoints of `domain`.
pub fn pushforward_weight(chart: &BoundaryChart, beta: &Weight, domain: &Region, cells: usize) -> Result<Weight> {
    if beta.dim() != 2 || domain.dim() != 2 {
        return invalid("flattening needs a planar weight");
    }
    Weight::from_fn(domain.clone(), vec![cells, cells], Rule::Midpoint, |y| {
        let x = phi_inverse(chart, [y[0], y[1]]);
        beta.eval(&x)
    })
}

/// Largest `Θ_β` over a ball family.
pub fn theta_sup(beta: &Weight, fam: &BallFamily) -> Result<f64> {
    let balls: Vec<(&Vec<f64>, f64)> = fam.centers().iter().flat_map(|c| fam.radii().iter().map(move |r| (c, *r))).collect();
    let v: Result<Vec<f64>> = balls.par_iter().map(|(c, r)| theta_beta_ms(beta, c, *r)).collect();
    Ok(v?.into_iter().fold(0.0, f64::max))
}

/// Compares `[β̃^{-1}]_{A_{1+2/n0}}` with `2^{n+2} M0`, after checking β against `M0`.
/// `Θ_β̃` and `N1² = Θ_β̃ / δ²` are reported for information.
pub fn pushforward_weight_audit(
    chart: &BoundaryChart,
    beta: &Weight,
    ctx: &WeightContext,
    fam: &BallFamily,
    domain: &Region,
    cells: usize,
) -> Result<AuditReport> {
    let pre = check_beta_condition(beta, ctx, fam)?;
    if !pre.pass() {
        return Err(Error::PreconditionFailed("β exceeds the M0 budget before flattening".into()));
    }
    let before = pre.row("beta_inverse_aq").map(|r| r.constant).unwrap_or(f64::NAN);
    let tilde = pushforward_weight(chart, beta, domain, cells)?;
    let after = check_beta_condition(&tilde, ctx, fam)?;
    let est = after.row("beta_inverse_aq").map(|r| r.constant).unwrap_or(f64::NAN);
    let budget = 2f64.powi(ctx.n as i32 + 2) * ctx.m0;
    let theta = theta_sup(&tilde, fam)?;
    let mut rep = AuditReport::new("flattening_weight", "flattening/pushforward-weight");
    rep.push(AuditRow::info("original_aq", before, ctx.m0, before));
    rep.push(AuditRow::budgeted("pushforward_aq", est, budget, est, budget));
    let d2 = chart.delta * chart.delta;
    rep.push(AuditRow::info("pushforward_oscillation", theta, d2, if d2 > 0.0 { theta / d2 } else { 0.0 }));
    rep.note("delta", chart.delta);
    rep.note("inflation", est / before);
    rep.note("cells", cells as f64);
    Ok(rep)
}

/// Least-squares slope of `log y` against `log x` over positive pairs.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = x.iter().zip(y).filter(|(a, b)| **a > 0.0 && **b > 0.0).map(|(a, b)| (a.ln(), b.ln())).collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let n = pts.len() as f64;
    let (mx, my) = (pts.iter().map(|p| p.0).sum::<f64>() / n, pts.iter().map(|p| p.1).sum::<f64>() / n);
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// Outcome of a δ-sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct DeltaSweep {
    pub table: Table,
    pub b_exponent: f64,
    pub theta_exponent: f64,
    pub aq_pass: bool,
}

/// Sweeps affine charts of slope δ over `A` and over `β = |x|^δ`, whose
/// oscillation is itself of order δ².
pub fn delta_sweep(deltas: &[f64], a: &CoefficientField, m0: f64, cells: usize, per_axis: usize) -> Result<DeltaSweep> {
    let domain = Region::boxed(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let h = 2.0 / cells as f64;
    let centers = BallFamily::default_for(&domain, per_axis)?.centers().to_vec();
    let fam = BallFamily::new(centers, BallFamily::log_radii(4.0 * h, 1.0, 8))?;
    let ctx = WeightContext::new(2, m0)?;
    let rows: Result<Vec<(f64, f64, f64, f64, bool)>> = deltas
        .par_iter()
        .map(|&d| {
            let chart = BoundaryChart::affine(d)?;
            let (_, crep) = pushforward_coefficients(&chart, a, f64::INFINITY)?;
            let b = crep.row("b_matrix").map(|r| r.lhs).unwrap_or(f64::NAN);
            let beta = Weight::power(d, vec![0.0, 0.0], Region::whole(2))?;
            let wrep = pushforward_weight_audit(&chart, &beta, &ctx, &fam, &domain, cells)?;
            let theta = wrep.row("pushforward_oscillation").map(|r| r.lhs).unwrap_or(f64::NAN);
            let aq = wrep.row("pushforward_aq").cloned().ok_or_else(|| Error::InvalidInput("missing row".into()))?;
            Ok((d, b, theta, aq.constant, aq.pass))
        })
        .collect();
    let rows = rows?;
    let mut table = Table::new(&["delta", "b_norm", "theta_beta_tilde", "aq_tilde", "aq_budget"]);
    let budget = 16.0 * m0;
    for r in &rows {
        table.push(vec![r.0.into(), r.1.into(), r.2.into(), r.3.into(), budget.into()]);
    }
    let ds: Vec<f64> = rows.iter().map(|r| r.0).collect();
    Ok(DeltaSweep {
        b_exponent: loglog_fit(&ds, &rows.iter().map(|r| r.1).collect::<Vec<_>>()),
        theta_exponent: loglog_fit(&ds, &rows.iter().map(|r| r.2).collect::<Vec<_>>()),
        aq_pass: rows.iter().all(|r| r.4),
        table,
    })
}

/// First `ρ = R 2^{-j} / (2Λ)` with `Φ^{-1}(B⁺_{2Λρ}(Φ(x0))) ⊂ B_R(x0)` on lattice
/// samples and `h̃(2Λρ) ≤ t0`.
pub fn rho_search(chart: &BoundaryChart, x0: [f64; 2], big_r: f64, lambda: f64, t0: f64, beta_tilde: &Weight, samples: usize) -> Result<Option<f64>> {
    if !(big_r > 0.0 && lambda >= 1.0 && t0 > 0.0) {
        return invalid("ρ search needs R > 0, Λ >= 1 and t0 > 0");
    }
    let y0 = phi_map(chart, x0);
    let half: Vec<[f64; 2]> = unit_disk_samples(samples).into_iter().filter(|p| p[1] >= 0.0).collect();
    for j in 0..60 {
        let rho = big_r * 0.5f64.powi(j) / (2.0 * lambda);
        let s = 2.0 * lambda * rho;
        let inside = half.iter().all(|p| dist(phi_inverse(chart, [y0[0] + s * p[0], y0[1] + s * p[1]]), x0) < big_r);
        if inside && height(beta_tilde, &y0, s)? <= t0 {
            return Ok(Some(rho));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn identity_field(points: Vec<Vec<f64>>) -> CoefficientField {
        let n = points.len();
        let values = (0..n).flat_map(|_| [1.0, 0.0, 0.0, 1.0]).collect();
        CoefficientField::new(2, points, vec![0.0], values, 0.5).unwrap()
    }

    #[test]
    fn affine_chart_maps_unit_point() {
        let c = BoundaryChart::affine(0.3).unwrap();
        assert_eq!(phi_map(&c, [1.0, 1.0]), [1.0, 0.7]);
        let flat = BoundaryChart::flat();
        assert_eq!(phi_map(&flat, [0.4, -2.0]), [0.4, -2.0]);
        assert_eq!(phi_inverse(&flat, [0.4, -2.0]), [0.4, -2.0]);
    }

    #[test]
    fn charts_with_delta_one_are_rejected() {
        assert!(BoundaryChart::affine(1.0).is_err());
        assert!(BoundaryChart::new(1.2, ChartKind::Cup { base: 0.0, width: 0.5 }).is_err());
    }

    #[test]
    fn round_trip_to_machine_precision() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let charts = [BoundaryChart::affine(0.7).unwrap(), BoundaryChart::new(0.9, ChartKind::Cup { base: 0.2, width: 0.3 }).unwrap()];
        for c in &charts {
            for _ in 0..1000 {
                let x = [rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0)];
                let back = phi_inverse(c, phi_map(c, x));
                assert_eq!(back[0], x[0]);
                assert!((back[1] - x[1]).abs() <= 4.0 * f64::EPSILON * (1.0 + x[1].abs()));
            }
        }
    }

    #[test]
    fn cup_gradient_is_exact_and_bounded() {
        let c = BoundaryChart::new(0.4, ChartKind::Cup { base: 0.1, width: 0.25 }).unwrap();
        assert_eq!(c.phi(0.1), 0.0);
        assert_eq!(c.dphi(0.1), 0.0);
        assert!((c.dphi(0.35) - 0.4).abs() < 1e-15);
        for k in 0..200 {
            let s = -1.0 + 0.01 * k as f64;
            let fd = (c.phi(s + 1e-6) - c.phi(s - 1e-6)) / 2e-6;
            assert!((fd - c.dphi(s)).abs() < 1e-8);
            assert!(c.dphi(s).abs() <= 0.4 + 1e-15);
        }
    }

    #[test]
    fn inclusions_hold_up_to_delta_point_nine() {
        let flat = inclusion_audit(&BoundaryChart::flat(), [0.0, 0.0], 1.0, 21).unwrap();
        assert!(flat.pass());
        assert!((flat.row("inner_inclusion").unwrap().lhs - 0.5).abs() < 1e-15);
        assert!((flat.row("outer_inclusion").unwrap().lhs - 0.5).abs() < 1e-15);
        for c in [BoundaryChart::affine(0.9).unwrap(), BoundaryChart::new(0.9, ChartKind::Cup { base: 0.0, width: 0.1 }).unwrap()] {
            let rep = inclusion_audit(&c, [0.05, 0.3], 0.4, 41).unwrap();
            assert!(rep.pass(), "{}", rep.to_json());
        }
    }

    #[test]
    fn b_matrix_matches_closed_form_for_identity() {
        for d in [0.05, 0.1, 0.2] {
            let c = BoundaryChart::affine(d).unwrap();
            let a = identity_field(vec![vec![0.3, 0.1], vec![-0.5, 0.2]]);
            let (t, rep) = pushforward_coefficients(&c, &a, 2.0).unwrap();
            let want = [1.0, -d, -d, 1.0 + d * d];
            for j in 0..2 {
                for (g, w) in t.matrix(0, j).iter().zip(&want) {
                    assert!((g - w).abs() < 1e-15);
                }
            }
            let b = b_matrix(&c, 0.3, &[1.0, 0.0, 0.0, 1.0]);
            assert_eq!(b, [0.0, -d, -d, d * d]);
            assert!((rep.row("b_matrix").unwrap().constant - 1.0).abs() < 1e-12);
            assert!(rep.pass());
        }
    }

    #[test]
    fn flat_chart_leaves_coefficients_and_symmetry() {
        let vals = vec![1.5, 0.3, 0.3, 0.8];
        let a = CoefficientField::new(2, vec![vec![0.0, 0.0]], vec![0.0], vals.clone(), 0.4).unwrap();
        let (t, rep) = pushforward_coefficients(&BoundaryChart::flat(), &a, 1.0).unwrap();
        assert_eq!(t.matrix(0, 0), &vals[..]);
        assert_eq!(rep.row("b_matrix").unwrap().lhs, 0.0);
        let c = BoundaryChart::new(0.5, ChartKind::Cup { base: 0.0, width: 0.2 }).unwrap();
        let b = CoefficientField::new(2, vec![vec![0.2, 0.0]], vec![0.0], vals, 0.4).unwrap();
        let (t, _) = pushforward_coefficients(&c, &b, 10.0).unwrap();
        let m = t.matrix(0, 0);
        assert_eq!(m[1], m[2]);
    }

    #[test]
    fn pushforward_weight_stays_within_budget() {
        let domain = Region::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
        let fam = BallFamily::new(BallFamily::default_for(&domain, 5).unwrap().centers().to_vec(), BallFamily::log_radii(0.1, 1.0, 6)).unwrap();
        let ctx = WeightContext::new(2, 2.0).unwrap();
        let beta = Weight::power(0.1, vec![0.0, 0.0], Region::whole(2)).unwrap();
        let c = BoundaryChart::new(0.2, ChartKind::Cup { base: 0.3, width: 0.4 }).unwrap();
        let rep = pushforward_weight_audit(&c, &beta, &ctx, &fam, &domain, 48).unwrap();
        assert!(rep.pass(), "{}", rep.to_json());
        let flat = pushforward_weight_audit(&BoundaryChart::flat(), &beta, &ctx, &fam, &domain, 48).unwrap();
        let (a, b) = (flat.row("original_aq").unwrap().lhs, flat.row("pushforward_aq").unwrap().lhs);
        assert!((a - b).abs() < 1e-2 * a, "{a} {b}");
    }

    #[test]
    fn rho_search_finds_a_scale() {
        let c = BoundaryChart::new(0.3, ChartKind::Cup { base: 0.0, width: 0.3 }).unwrap();
        let w = Weight::constant(1.0, Region::whole(2)).unwrap();
        let rho = rho_search(&c, [0.0, 0.0], 0.5, 2.0, 0.01, &w, 11).unwrap().unwrap();
        assert!(rho > 0.0 && 4.0 * rho * 4.0 * rho <= 0.01 * (1.0 + 1e-12));
    }

    #[test]
    fn delta_sweep_exponents() {
        let pts: Vec<Vec<f64>> = (0..9).map(|k| vec![-1.0 + 0.25 * k as f64, 0.0]).collect();
        let vals = pts.iter().flat_map(|p| [1.2 + 0.3 * p[0], 0.2, 0.1, 0.9]).collect();
        let a = CoefficientField::new(2, pts, vec![0.0], vals, 0.5).unwrap();
        let s = delta_sweep(&[0.05, 0.1, 0.2], &a, 2.0, 48, 5).unwrap();
        assert!(s.b_exponent >= 0.9, "{}", s.b_exponent);
        assert!(s.theta_exponent >= 1.8, "{}", s.theta_exponent);
        assert!(s.aq_pass);
    }
}
