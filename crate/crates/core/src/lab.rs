//! Weighted functional inequalities checked on closed-form test functions.

use crate::error::{invalid, Error, Result};
use crate::estimates::loglog_slope;
use crate::quad::composite_gl;
use crate::report::{AuditReport, AuditRow, Table};
use crate::weights::{aq_characteristic, BallFamily, Weight, WeightKind};
use rand::{Rng, SeedableRng};
use std::f64::consts::PI;

/// Closed-form function of one variable with its exact derivative.
#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `Σ c_j x^j`
    Polynomial(Vec<f64>),
    /// `offset + amplitude · sin(k π x + phase)`
    Trig { offset: f64, amplitude: f64, k: f64, phase: f64 },
    /// `pieces[j]` on `[breaks[j-1], breaks[j])`; needs `pieces.len() = breaks.len() + 1`
    Piecewise { breaks: Vec<f64>, pieces: Vec<Vec<f64>> },
}

fn poly(c: &[f64], x: f64) -> f64 {
    c.iter().rev().fold(0.0, |s, a| s * x + a)
}

fn poly_d(c: &[f64], x: f64) -> f64 {
    c.iter().enumerate().skip(1).rev().fold(0.0, |s, (j, a)| s * x + j as f64 * a)
}

impl TestFunction {
    pub fn piecewise(breaks: Vec<f64>, pieces: Vec<Vec<f64>>) -> Result<Self> {
        if pieces.len() != breaks.len() + 1 || breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return invalid("piecewise function needs increasing breaks and one more piece");
        }
        Ok(Self::Piecewise { breaks, pieces })
    }

    fn piece(breaks: &[f64], x: f64) -> usize {
        breaks.iter().take_while(|b| x >= **b).count()
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(c) => poly(c, x),
            Self::Trig { offset, amplitude, k, phase } => offset + amplitude * (k * PI * x + phase).sin(),
            Self::Piecewise { breaks, pieces } => poly(&pieces[Self::piece(breaks, x)], x),
        }
    }

    pub fn grad(&self, x: f64) -> f64 {
        match self {
            Self::Polynomial(c) => poly_d(c, x),
            Self::Trig { amplitude, k, phase, .. } => amplitude * k * PI * (k * PI * x + phase).cos(),
            Self::Piecewise { breaks, pieces } => poly_d(&pieces[Self::piece(breaks, x)], x),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Self::Polynomial(p) => Self::Polynomial(p.iter().map(|a| a * c).collect()),
            Self::Trig { offset, amplitude, k, phase } => Self::Trig { offset: offset * c, amplitude: amplitude * c, k: *k, phase: *phase },
            Self::Piecewise { breaks, pieces } => Self::Piecewise { breaks: breaks.clone(), pieces: pieces.iter().map(|p| p.iter().map(|a| a * c).collect()).collect() },
        }
    }

    fn breaks(&self) -> Vec<f64> {
        match self {
            Self::Piecewise { breaks, .. } => breaks.clone(),
            _ => vec![],
        }
    }

    /// Largest relative finite-difference mismatch of the gradient at seeded points of `[a, b]`.
    pub fn gradient_check(&self, a: f64, b: f64, samples: usize, seed: u64) -> f64 {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let br = self.breaks();
        let mut worst = 0.0f64;
        for _ in 0..samples {
            let x: f64 = rng.random_range(a..b);
            let scale = (b - a).abs().max(1.0);
            let d = 1e-5 * scale;
            if br.iter().any(|c| (c - x).abs() < 2.0 * d) {
                continue;
            }
            // fourth-order central difference
            let fd = (-self.eval(x + 2.0 * d) + 8.0 * self.eval(x + d) - 8.0 * self.eval(x - d) + self.eval(x - 2.0 * d)) / (12.0 * d);
            let ex = self.grad(x);
            let size = ex.abs().max(self.eval(x).abs() / scale).max(1.0);
            worst = worst.max((fd - ex).abs() / size);
        }
        worst
    }
}

const PANELS: usize = 64;

/// `∫_a^b w^p f` (or `∫ f` without a weight), split at `breaks` and on 64 panels.
fn integrate(w: Option<&Weight>, p: f64, a: f64, b: f64, breaks: &[f64], f: impl Fn(f64) -> f64 + Copy) -> Result<f64> {
    let mut cuts = vec![a];
    cuts.extend(breaks.iter().copied().filter(|c| *c > a && *c < b));
    cuts.push(b);
    let mut s = 0.0;
    for seg in cuts.windows(2) {
        let h = (seg[1] - seg[0]) / PANELS as f64;
        for j in 0..PANELS {
            let (lo, hi) = (seg[0] + j as f64 * h, seg[0] + (j + 1) as f64 * h);
            s += match w {
                Some(w) => w.integrate_with(lo, hi, p, f)?,
                None => composite_gl(lo, hi, 1, f),
            };
        }
    }
    Ok(s)
}

fn clip(w: &Weight, a: f64, b: f64) -> Result<(f64, f64)> {
    let (lo, hi) = (a.max(w.domain().lo()[0]), b.min(w.domain().hi()[0]));
    if !(hi > lo) {
        return Err(Error::EmptyBall);
    }
    Ok((lo, hi))
}

/// One-ball values of the `L^{2/(q-γ)}` vs `L²(μ)` comparison.
fn lq_sides(g: &TestFunction, mu: &Weight, q: f64, gamma: f64, x0: f64, r: f64) -> Result<(f64, f64)> {
    let (a, b) = clip(mu, x0 - r, x0 + r)?;
    let br = g.breaks();
    let s = 2.0 / (q - gamma);
    let lhs = (integrate(None, 0.0, a, b, &br, |x| g.eval(x).abs().powf(s))? / (b - a)).powf(1.0 / s);
    let mass = mu.interval_integral(a, b, 1.0)?;
    let rhs = (integrate(Some(mu), 1.0, a, b, &br, |x| g.eval(x).powi(2))? / mass).sqrt();
    Ok((lhs, rhs))
}

/// `(avg |g|^{2/(q-γ)})^{(q-γ)/2} ≤ N ((1/μ(B)) ∫ g² μ)^{1/2}` over the dilations `r, r/2, r/4`.
#[allow(clippy::too_many_arguments)]
pub fn weighted_lq_control_audit(g: &TestFunction, mu: &Weight, q: f64, x0: f64, r: f64, gamma: f64, m0: f64, spread_tol: f64) -> Result<AuditReport> {
    if !(q > 1.0 && q <= 2.0) || !(gamma > 0.0 && gamma < q - 1.0) || !(r > 0.0) || mu.dim() != 1 {
        return invalid("need q in (1,2], gamma in (0, q-1), r > 0 and a one-dimensional weight");
    }
    let fam = BallFamily::default_for(mu.domain(), 16)?;
    let aq = aq_characteristic(mu, q, &fam)?;
    if !(aq <= m0 * (1.0 + 1e-6)) {
        return Err(Error::GateFailed(format!("[mu]_A_{q} estimate {aq} exceeds {m0}")));
    }
    let margin = match aq_characteristic(mu, q - gamma, &fam) {
        Ok(v) if v.is_finite() => v,
        _ => return Err(Error::GateFailed(format!("gamma {gamma} exceeds the reverse Hoelder margin"))),
    };
    let mut rep = AuditReport::new("weighted_lq_control", "lab/weighted-lq-control");
    let mut ns = vec![];
    for (j, rr) in [r, 0.5 * r, 0.25 * r].iter().enumerate() {
        let (lhs, rhs) = lq_sides(g, mu, q, gamma, x0, *rr)?;
        let n = if lhs == 0.0 { 0.0 } else { lhs / rhs };
        ns.push(n);
        rep.push(AuditRow::new(format!("dilation_{j}"), lhs, rhs, n, None, n.is_finite()));
    }
    let spread = crate::estimates::refinement_spread(&ns);
    rep.push(AuditRow::new("dilation_spread", ns[0], ns[ns.len() - 1], spread, Some(spread_tol), spread <= spread_tol));
    rep.note("aq", aq);
    rep.note("aq_minus_gamma", margin);
    Ok(rep)
}

/// Case of the weighted embedding: one-dimensional, or radial in `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EmbeddingCase {
    pub dim: usize,
}

impl EmbeddingCase {
    /// Exponent `s` of the right-hand side.
    pub fn exponent(&self, gamma: f64) -> Result<f64> {
        let n = self.dim as f64;
        if self.dim == 0 || !(gamma > 0.0 && gamma < 2.0 / n) {
            return Err(Error::GateFailed(format!("gamma {gamma} outside (0, 2/n) for n = {}", self.dim)));
        }
        Ok(if self.dim >= 3 { 2.0 * n / (n * (1.0 + gamma) - 2.0) } else { 2.0 * (1.0 + gamma) / gamma })
    }
}

/// `(1/β(B_1)) ∫_{B_1} g² β ≤ N (avg_{B_1} |g|^s)^{2/s}` about `x0`.
///
/// For `dim >= 2` `g` is a radial profile and β must be a power weight centered at `x0`.
pub fn weighted_embedding_audit(g: &TestFunction, beta: &Weight, case: EmbeddingCase, gamma: f64, x0: f64) -> Result<AuditReport> {
    let s = case.exponent(gamma)?;
    let br = g.breaks();
    let (lhs, rhs) = if case.dim == 1 {
        let (a, b) = clip(beta, x0 - 1.0, x0 + 1.0)?;
        let mass = beta.interval_integral(a, b, 1.0)?;
        let lhs = integrate(Some(beta), 1.0, a, b, &br, |x| g.eval(x).powi(2))? / mass;
        let rhs = (integrate(None, 0.0, a, b, &br, |x| g.eval(x).abs().powf(s))? / (b - a)).powf(2.0 / s);
        (lhs, rhs)
    } else {
        let (alpha, scale) = match beta.kind() {
            WeightKind::Power { alpha, center, scale } if center.iter().all(|c| *c == x0) => (*alpha, *scale),
            _ => return invalid("radial mode needs a power weight centered at x0"),
        };
        let nm1 = case.dim as f64 - 1.0;
        let e = alpha + nm1;
        if e <= -1.0 {
            return Err(Error::NonIntegrable { exponent: alpha, dim: case.dim });
        }
        let mass = scale * crate::quad::singular_power_integral(0.0, 1.0, 0.0, e, &|_| 1.0);
        let lhs = scale * crate::quad::singular_power_integral(0.0, 1.0, 0.0, e, &|r| g.eval(r).powi(2)) / mass;
        let vol = 1.0 / (nm1 + 1.0);
        let avg = integrate(None, 0.0, 0.0, 1.0, &br, |r| g.eval(r).abs().powf(s) * r.powf(nm1))? / vol;
        (lhs, avg.powf(2.0 / s))
    };
    let n = if lhs == 0.0 { 0.0 } else { lhs / rhs };
    let mut rep = AuditReport::new("weighted_embedding", "lab/weighted-embedding");
    rep.push(AuditRow::new("embedding", lhs, rhs, n, None, n.is_finite()));
    rep.note("exponent", s);
    rep.note("dim", case.dim as f64);
    Ok(rep)
}

/// Separable space-time test function `g(x) · p(t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeTest {
    pub space: TestFunction,
    /// polynomial coefficients in t
    pub time: Vec<f64>,
}

/// Averages entering the interpolation inequality on `B × (t0, t1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterpolationSides {
    pub lhs: f64,
    pub u2: f64,
    pub grad2: f64,
}

pub fn interpolation_sides(u: &SpaceTimeTest, beta: &Weight, x0: f64, r: f64, t: (f64, f64), upper_half: bool) -> Result<InterpolationSides> {
    if !(t.1 > t.0) || !(r > 0.0) {
        return invalid("need r > 0 and a non-empty time interval");
    }
    let (a, b) = clip(beta, if upper_half { x0 } else { x0 - r }, x0 + r)?;
    let br = u.space.breaks();
    let p2 = composite_gl(t.0, t.1, 4, |s| poly(&u.time, s).powi(2)) / (t.1 - t.0);
    let len = b - a;
    let beta_avg = beta.interval_integral(a, b, 1.0)? / len;
    let wu2 = integrate(Some(beta), 1.0, a, b, &br, |x| u.space.eval(x).powi(2))? / len * p2;
    let u2 = integrate(None, 0.0, a, b, &br, |x| u.space.eval(x).powi(2))? / len * p2;
    let grad2 = integrate(None, 0.0, a, b, &br, |x| u.space.grad(x).powi(2))? / len * p2;
    Ok(InterpolationSides { lhs: wu2 / beta_avg, u2, grad2 })
}

fn interp_constant(s: &InterpolationSides, r: f64, theta: f64) -> f64 {
    if s.lhs == 0.0 {
        return 0.0;
    }
    s.lhs / (s.u2.powf(1.0 - theta) * (s.u2.powf(theta) + r.powf(2.0 * theta) * s.grad2.powf(theta)))
}

/// Smallest `N(θ)` over `thetas`, and `N` at the proof's `θ = 1 - nγ/2`.
#[allow(clippy::too_many_arguments)]
pub fn interpolation_audit(u: &SpaceTimeTest, beta: &Weight, x0: f64, r: f64, t: (f64, f64), thetas: &[f64], gamma: f64, upper_half: bool) -> Result<AuditReport> {
    if thetas.is_empty() || thetas.iter().any(|th| !(*th > 0.0 && *th < 1.0)) {
        return invalid("theta grid must lie in (0,1)");
    }
    let s = interpolation_sides(u, beta, x0, r, t, upper_half)?;
    let (mut best, mut arg) = (f64::INFINITY, f64::NAN);
    for th in thetas {
        let n = interp_constant(&s, r, *th);
        if n < best {
            best = n;
            arg = *th;
        }
    }
    let proof_theta = 1.0 - beta.dim() as f64 * gamma / 2.0;
    let mut rep = AuditReport::new("interpolation", if upper_half { "lab/interpolation-upper-half" } else { "lab/interpolation" });
    rep.push(AuditRow::new("interpolation", s.lhs, s.u2, best, None, best.is_finite()));
    if proof_theta > 0.0 && proof_theta < 1.0 {
        rep.note("proof_theta", proof_theta);
        rep.note("proof_theta_constant", interp_constant(&s, r, proof_theta));
    }
    rep.note("best_theta", arg);
    Ok(rep)
}

/// Log-log slope in `r` of `r^{2θ} (avg|∇u|²)^θ / (avg u²)^θ` over `radii`.
pub fn interpolation_r_sweep(u: &SpaceTimeTest, beta: &Weight, x0: f64, radii: &[f64], t: (f64, f64), theta: f64, upper_half: bool) -> Result<(Table, f64)> {
    let mut table = Table::new(&["r", "zero_order", "gradient_term", "constant"]);
    let (mut xs, mut ys) = (vec![], vec![]);
    for r in radii {
        let s = interpolation_sides(u, beta, x0, *r, t, upper_half)?;
        let zero = s.u2.powf(theta);
        let grad = r.powf(2.0 * theta) * s.grad2.powf(theta);
        table.push(vec![(*r).into(), zero.into(), grad.into(), interp_constant(&s, *r, theta).into()]);
        xs.push(*r);
        ys.push(grad / zero);
    }
    Ok((table, loglog_slope(&xs, &ys)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::weights::Region;

    fn sym() -> Region {
        Region::interval(-1.0, 1.0).unwrap()
    }

    #[test]
    fn gradients_match_finite_differences() {
        let fs = [
            TestFunction::Polynomial(vec![1.0, -2.0, 0.5, 3.0]),
            TestFunction::Trig { offset: 0.3, amplitude: 2.0, k: 32.0, phase: 0.1 },
            TestFunction::piecewise(vec![0.0], vec![vec![0.0, -1.0], vec![0.0, 1.0, 2.0]]).unwrap(),
        ];
        for f in &fs {
            assert!(f.gradient_check(-1.0, 1.0, 200, 9) < 1e-6);
        }
    }

    #[test]
    fn constants_give_unit_constants() {
        let one = TestFunction::Polynomial(vec![1.0]);
        let unit = Weight::constant(1.0, sym()).unwrap();
        let rep = weighted_lq_control_audit(&one, &unit, 2.0, 0.0, 1.0, 0.5, 1.5, 0.1).unwrap();
        assert!((rep.rows[0].constant - 1.0).abs() < 1e-12);
        let b = Weight::power(0.2, vec![0.0], sym()).unwrap();
        let rep = weighted_embedding_audit(&one, &b, EmbeddingCase { dim: 1 }, 0.5, 0.0).unwrap();
        assert!((rep.rows[0].constant - 1.0).abs() < 1e-12);
    }

    #[test]
    fn lq_control_on_sqrt_weight_matches_moments() {
        let g = TestFunction::Polynomial(vec![0.0, 1.0]);
        let mu = Weight::power(0.5, vec![0.0], sym()).unwrap();
        let (q, gam) = (2.0, 0.1);
        let rep = weighted_lq_control_audit(&g, &mu, q, 0.0, 1.0, gam, 2.0, 1e-6).unwrap();
        // avg |x|^s over (-1,1) = 1/(s+1); ∫ x² |x|^{1/2} / ∫ |x|^{1/2} = 1.5/3.5
        let s = 2.0 / (q - gam);
        let lhs = (1.0 / (s + 1.0)) .powf(1.0 / s);
        let rhs = (1.5f64 / 3.5).sqrt();
        assert!((rep.rows[0].lhs - lhs).abs() < 1e-9 * lhs);
        assert!((rep.rows[0].rhs - rhs).abs() < 1e-9 * rhs);
        // both sides are homogeneous of degree one under dilation about 0
        assert!(rep.pass());
        let err = weighted_lq_control_audit(&g, &mu, q, 0.0, 1.0, gam, 1.0, 1e-6);
        assert!(matches!(err, Err(Error::GateFailed(_))));
    }

    #[test]
    fn embedding_oracle_and_invariance() {
        let g = TestFunction::Polynomial(vec![1.0, 1.0]);
        let b = Weight::power(0.2, vec![0.0], sym()).unwrap();
        let gam = 0.5;
        let rep = weighted_embedding_audit(&g, &b, EmbeddingCase { dim: 1 }, gam, 0.0).unwrap();
        // ∫(1+x)²|x|^{0.2} / ∫|x|^{0.2} = 1 + 1.2/3.2
        let lhs = 1.0 + 1.2 / 3.2;
        let s = 2.0 * (1.0 + gam) / gam;
        let rhs = (2f64.powf(s + 1.0) / (s + 1.0) / 2.0).powf(2.0 / s);
        assert!((rep.rows[0].lhs - lhs).abs() < 1e-9);
        assert!((rep.rows[0].rhs - rhs).abs() < 1e-9 * rhs);
        let scaled = weighted_embedding_audit(&g.scaled(3.0), &b.scaled(7.0).unwrap(), EmbeddingCase { dim: 1 }, gam, 0.0).unwrap();
        assert!((scaled.rows[0].constant - rep.rows[0].constant).abs() < 1e-10 * rep.rows[0].constant);
        assert!(matches!(weighted_embedding_audit(&g, &b, EmbeddingCase { dim: 1 }, 2.5, 0.0), Err(Error::GateFailed(_))));
        let osc = TestFunction::Trig { offset: 0.0, amplitude: 1.0, k: 32.0, phase: 0.0 };
        assert!(weighted_embedding_audit(&osc, &b, EmbeddingCase { dim: 1 }, gam, 0.0).unwrap().pass());
        let radial = weighted_embedding_audit(&g, &b, EmbeddingCase { dim: 3 }, 0.3, 0.0).unwrap();
        assert!(radial.rows[0].constant.is_finite());
    }

    #[test]
    fn unweighted_embedding_is_hoelder() {
        // β ≡ 1: lhs = avg g² ≤ (avg |g|^s)^{2/s}, so N ≤ 1
        let g = TestFunction::Trig { offset: 1.0, amplitude: 0.5, k: 3.0, phase: 0.0 };
        let unit = Weight::constant(1.0, sym()).unwrap();
        let rep = weighted_embedding_audit(&g, &unit, EmbeddingCase { dim: 1 }, 0.5, 0.0).unwrap();
        assert!(rep.rows[0].constant <= 1.0 + 1e-12);
    }

    #[test]
    fn interpolation_examples() {
        let b = Weight::power(0.2, vec![0.0], Region::whole(1)).unwrap();
        let c = SpaceTimeTest { space: TestFunction::Polynomial(vec![2.0]), time: vec![1.0] };
        let rep = interpolation_audit(&c, &Weight::constant(1.0, Region::whole(1)).unwrap(), 0.3, 0.5, (0.0, 1.0), &[0.3, 0.9], 0.5, false).unwrap();
        assert!((rep.rows[0].constant - 1.0).abs() < 1e-12);
        let u = SpaceTimeTest { space: TestFunction::Trig { offset: 0.0, amplitude: 1.0, k: 1.0, phase: 0.0 }, time: vec![1.0, 1.0] };
        for half in [false, true] {
            let rep = interpolation_audit(&u, &b, 0.25, 1.0, (0.0, 1.0), &[0.5, 0.75, 0.9], 0.2, half).unwrap();
            assert!(rep.rows[0].constant.is_finite() && rep.rows[0].constant > 0.0);
        }
        let theta = 0.75;
        let (_, slope) = interpolation_r_sweep(&u, &b, 0.25, &[1.0, 0.5, 0.25], (0.0, 1.0), theta, false).unwrap();
        assert!((slope - 2.0 * theta).abs() < 0.1, "{slope}");
    }
}
