//! Weighted parabolic cylinders, the height map `h_{x0}(r) = r^2 Ψ(r)`, the
//! quasi-distance `ρ_β` and its quasi-triangle constant.

use crate::error::{invalid, Error, Result};
use crate::report::{AuditReport, AuditRow};
use crate::weights::{ball_average, dist, sub_balls, BallFamily, Weight};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

/// Relative slack used by closed membership comparisons.
pub const MEMBERSHIP_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimePoint {
    pub x: Vec<f64>,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Vec<f64>, t: f64) -> Self {
        Self { x, t }
    }

    pub fn is_finite(&self) -> bool {
        self.t.is_finite() && self.x.iter().all(|v| v.is_finite())
    }
}

/// `Ψ_{β,x0}(r) = ((β^{n0/2})_{B_r(x0)})^{2/n0}`.
pub fn psi(beta: &Weight, x0: &[f64], r: f64) -> Result<f64> {
    let k = beta.dim().max(2) as f64 / 2.0;
    let avg = ball_average(beta, x0, r, k)?;
    Ok(if k == 1.0 { avg } else { avg.powf(1.0 / k) })
}

/// `h_{x0}(r) = r^2 Ψ_{β,x0}(r)`.
pub fn height(beta: &Weight, x0: &[f64], r: f64) -> Result<f64> {
    Ok(r * r * psi(beta, x0, r)?)
}

/// Inverse of the strictly increasing height map, by bracketing and bisection.
///
/// Balls may extend past a bounded domain; averages are then taken over the
/// clipped ball, which keeps `h` increasing and unbounded.
pub fn height_inverse(beta: &Weight, x0: &[f64], s: f64) -> Result<f64> {
    if !(s >= 0.0) || !s.is_finite() {
        return invalid("height must be finite and non-negative");
    }
    if s == 0.0 {
        return Ok(0.0);
    }
    let cap = 1e8 * (1.0 + beta.domain().diameter_from(x0).min(1e8));
    let (mut lo, mut hi) = (0.0, 1.0);
    if height(beta, x0, hi)? < s {
        loop {
            lo = hi;
            hi *= 2.0;
            if hi > cap {
                return Err(Error::NoBracket { target: s, reachable: height(beta, x0, lo)? });
            }
            if height(beta, x0, hi)? >= s {
                break;
            }
        }
    } else {
        let mut probe = 0.5;
        for _ in 0..2100 {
            if height(beta, x0, probe)? <= s {
                lo = probe;
                break;
            }
            hi = probe;
            probe *= 0.5;
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if height(beta, x0, mid)? < s {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let (hl, hh) = (height(beta, x0, lo)?, height(beta, x0, hi)?);
    Ok(if (hl - s).abs() < (hh - s).abs() { lo } else { hi })
}

/// `ρ_β(z, z0)`; the height base point is the spatial point of the later event.
pub fn quasi_distance(beta: &Weight, z: &SpaceTimePoint, z0: &SpaceTimePoint) -> Result<f64> {
    if !(z.is_finite() && z0.is_finite()) || z.x.len() != z0.x.len() {
        return invalid("quasi-distance needs finite points of one dimension");
    }
    let spatial = dist(&z.x, &z0.x);
    let base = if z.t <= z0.t { &z0.x } else { &z.x };
    let temporal = height_inverse(beta, base, (z.t - z0.t).abs())?;
    Ok(spatial.max(temporal))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CylinderKind {
    /// `B_r(x0) × (t0 - h, t0]`
    Backward,
    /// `B_r(x0) × (t0 - h/2, t0 + h/2)`
    Centered,
    /// `(B_r(x0) ∩ {x_n > 0}) × (t0 - h, t0]`
    UpperHalf,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeightedCylinder {
    pub center: SpaceTimePoint,
    pub radius: f64,
    pub kind: CylinderKind,
    pub height: f64,
}

impl WeightedCylinder {
    pub fn new(beta: &Weight, center: SpaceTimePoint, radius: f64, kind: CylinderKind) -> Result<Self> {
        if !(radius > 0.0) || !center.is_finite() || center.x.len() != beta.dim() {
            return invalid("cylinder needs r > 0 and a finite center of the weight's dimension");
        }
        let height = height(beta, &center.x, radius)?;
        if !(height > 0.0) {
            return invalid("cylinder height must be positive");
        }
        Ok(Self { center, radius, kind, height })
    }

    /// Closed time extent `[t_lo, t_hi]`.
    pub fn time_span(&self) -> (f64, f64) {
        let t0 = self.center.t;
        match self.kind {
            CylinderKind::Centered => (t0 - 0.5 * self.height, t0 + 0.5 * self.height),
            _ => (t0 - self.height, t0),
        }
    }

    pub fn contains_x(&self, x: &[f64]) -> bool {
        let inside = dist(x, &self.center.x) <= self.radius * (1.0 + MEMBERSHIP_SLACK);
        match self.kind {
            CylinderKind::UpperHalf => inside && *x.last().unwrap() >= 0.0,
            _ => inside,
        }
    }

    /// Closed membership with relative slack.
    pub fn contains(&self, z: &SpaceTimePoint) -> bool {
        let (a, b) = self.time_span();
        let tol = MEMBERSHIP_SLACK * self.height;
        self.contains_x(&z.x) && z.t >= a - tol && z.t <= b + tol
    }
}

/// Quasi-triangle constant `Λ = max{2^{1/(2ζ0)} N2^{1/(n ζ0)}, 2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuasiMetricParams {
    pub lambda: f64,
    pub zeta0: f64,
    pub n2: f64,
}

impl QuasiMetricParams {
    pub fn from_constants(n: usize, zeta0: f64, n2: f64) -> Result<Self> {
        if !(zeta0 > 0.0 && zeta0 < 1.0) || !(n2 >= 1.0) || n == 0 {
            return invalid("need zeta0 in (0,1) and N2 >= 1");
        }
        Ok(Self { lambda: lambda_formula(n, zeta0, n2), zeta0, n2 })
    }

    /// Fit `(ζ0, N2)` from nested sub-ball pairs of `β^{n0/2}` and keep the pair with the smallest Λ.
    pub fn estimate(beta: &Weight, fam: &BallFamily) -> Result<Self> {
        let n = beta.dim();
        let k = n.max(2) as f64 / 2.0;
        let balls = fam.balls();
        let pairs: Vec<Vec<(f64, f64)>> = balls
            .par_iter()
            .map(|(c, r)| {
                let (whole, m2) = beta.ball_integral(c, *r, k)?;
                let mut out = Vec::new();
                for j in 1..=8 {
                    for (x, r1) in sub_balls(c, *r, 0.5f64.powi(j)) {
                        // sub-balls of a clipped ball may miss the domain
                        let (part, m1) = match beta.ball_integral(&x, r1, k) {
                            Err(Error::EmptyBall) => continue,
                            r => r?,
                        };
                        out.push((m1 / m2, part / whole));
                    }
                }
                Ok(out)
            })
            .collect::<Result<Vec<_>>>()?;
        let pairs: Vec<(f64, f64)> = pairs.into_iter().flatten().collect();
        let mut best: Option<Self> = None;
        for i in 1..50 {
            let zeta = i as f64 * 0.02;
            let n2 = pairs.iter().map(|(m, w)| w / m.powf(zeta)).fold(1.0, f64::max);
            let cand = Self { lambda: lambda_formula(n, zeta, n2), zeta0: zeta, n2 };
            if best.is_none_or(|b| cand.lambda < b.lambda) {
                best = Some(cand);
            }
        }
        Ok(best.unwrap())
    }
}

pub fn lambda_formula(n: usize, zeta0: f64, n2: f64) -> f64 {
    (2f64.powf(1.0 / (2.0 * zeta0)) * n2.powf(1.0 / (n as f64 * zeta0))).max(2.0)
}

/// Box from which random events are drawn.
#[derive(Debug, Clone, PartialEq)]
pub struct SampleBox {
    pub x_lo: Vec<f64>,
    pub x_hi: Vec<f64>,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl SampleBox {
    pub fn new(x_lo: Vec<f64>, x_hi: Vec<f64>, t_lo: f64, t_hi: f64) -> Result<Self> {
        if x_lo.len() != x_hi.len() || x_lo.iter().zip(&x_hi).any(|(a, b)| !(a < b)) || !(t_lo < t_hi) {
            return invalid("sample box bounds must be ordered");
        }
        Ok(Self { x_lo, x_hi, t_lo, t_hi })
    }

    fn draw(&self, rng: &mut ChaCha8Rng) -> SpaceTimePoint {
        let x = self.x_lo.iter().zip(&self.x_hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
        SpaceTimePoint::new(x, rng.random_range(self.t_lo..self.t_hi))
    }

    // point near `z` at a log-uniform scale, kept inside the box
    fn draw_near(&self, z: &SpaceTimePoint, rng: &mut ChaCha8Rng) -> SpaceTimePoint {
        let scale = 10f64.powf(rng.random_range(-4.0..0.0));
        let x = z
            .x
            .iter()
            .enumerate()
            .map(|(k, v)| (v + scale * (self.x_hi[k] - self.x_lo[k]) * rng.random_range(-0.5..0.5)).clamp(self.x_lo[k], self.x_hi[k]))
            .collect();
        let t = (z.t + scale * scale * (self.t_hi - self.t_lo) * rng.random_range(-0.5..0.5)).clamp(self.t_lo, self.t_hi);
        SpaceTimePoint::new(x, t)
    }
}

const BATCH: usize = 1000;

/// Monte-Carlo check of `ρ(z0, z̄) <= Λ [ρ(z0, z1) + ρ(z1, z̄)]` on seeded triples.
pub fn quasi_triangle_audit(beta: &Weight, params: &QuasiMetricParams, samples: usize, seed: u64, bx: &SampleBox) -> Result<AuditReport> {
    if samples == 0 {
        return invalid("need at least one sample");
    }
    if bx.x_lo.len() != beta.dim() {
        return invalid("sample box dimension differs from the weight");
    }
    let batches = samples.div_ceil(BATCH);
    let results: Vec<(f64, Option<[SpaceTimePoint; 3]>, usize)> = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = BATCH.min(samples - b * BATCH);
            let (mut worst, mut triple, mut skipped) = (0.0, None, 0);
            for i in 0..count {
                let z0 = bx.draw(&mut rng);
                let (z1, zb) = if i % 2 == 0 {
                    (bx.draw(&mut rng), bx.draw(&mut rng))
                } else {
                    let z1 = bx.draw_near(&z0, &mut rng);
                    let zb = bx.draw_near(&z1, &mut rng);
                    (z1, zb)
                };
                let d = quasi_distance(beta, &zb, &z0)?;
                let s = quasi_distance(beta, &z1, &z0)? + quasi_distance(beta, &zb, &z1)?;
                if s == 0.0 {
                    skipped += 1;
                    continue;
                }
                let ratio = d / s;
                if ratio > worst {
                    worst = ratio;
                    triple = Some([z0, z1, zb]);
                }
            }
            Ok((worst, triple, skipped))
        })
        .collect::<Result<Vec<_>>>()?;
    let (mut worst, mut triple, mut skipped) = (0.0, None, 0);
    for (w, t, s) in results {
        skipped += s;
        if w > worst {
            worst = w;
            triple = t;
        }
    }
    let mut rep = AuditReport::new("quasi_triangle", "geometry/quasi-triangle-inequality");
    rep.push(AuditRow::budgeted("max_triangle_ratio", worst, 1.0, worst, params.lambda));
    rep.note("lambda", params.lambda);
    rep.note("zeta0", params.zeta0);
    rep.note("n2", params.n2);
    rep.note("samples", samples as f64);
    rep.note("degenerate_skipped", skipped as f64);
    rep.tag("seed", seed.to_string());
    if let Some(tr) = triple {
        for (name, z) in ["z0", "z1", "zbar"].iter().zip(tr.iter()) {
            for (k, v) in z.x.iter().enumerate() {
                rep.note(format!("worst_{name}_x{k}"), *v);
            }
            rep.note(format!("worst_{name}_t"), z.t);
        }
    }
    Ok(rep)
}

/// Lattice check of `Q_r ⊂ {ρ <= r} ⊂ C_{2r}` and `ρ <= 2r` on `C_r`.
pub fn cylinder_relations_audit(beta: &Weight, z0: &SpaceTimePoint, r: f64, per_axis: usize) -> Result<AuditReport> {
    if beta.dim() != 1 && beta.dim() != 2 {
        return invalid("cylinder audit supports one or two space dimensions");
    }
    let m = per_axis.max(2);
    let q = WeightedCylinder::new(beta, z0.clone(), r, CylinderKind::Backward)?;
    let c_r = WeightedCylinder::new(beta, z0.clone(), r, CylinderKind::Centered)?;
    let c_2r = WeightedCylinder::new(beta, z0.clone(), 2.0 * r, CylinderKind::Centered)?;
    let spatial = lattice_ball(&z0.x, r, m);
    let lin = |a: f64, b: f64, i: usize| a + (b - a) * i as f64 / (m - 1) as f64;
    let slack = 1.0 + MEMBERSHIP_SLACK;

    // Q_r ⊂ {ρ <= r}
    let (ta, tb) = q.time_span();
    let mut worst_a: f64 = 0.0;
    let mut count = [0usize; 3];
    for x in &spatial {
        for i in 0..m {
            let z = SpaceTimePoint::new(x.clone(), lin(ta, tb, i));
            worst_a = worst_a.max(quasi_distance(beta, &z, z0)? / r);
            count[0] += 1;
        }
    }
    // {ρ <= r} ⊂ C_{2r}: scan a box enclosing the sublevel set
    let mut t_up: f64 = 0.0;
    for x in &spatial {
        t_up = t_up.max(height(beta, x, r)?);
    }
    let mut miss_b = 0usize;
    for x in &spatial {
        for i in 0..m {
            let z = SpaceTimePoint::new(x.clone(), lin(z0.t - q.height, z0.t + t_up, i));
            if quasi_distance(beta, &z, z0)? <= r * slack {
                count[1] += 1;
                if !c_2r.contains(&z) {
                    miss_b += 1;
                }
            }
        }
    }
    // ρ <= 2r on C_r
    let (ca, cb) = c_r.time_span();
    let mut worst_c: f64 = 0.0;
    for x in &spatial {
        for i in 0..m {
            let z = SpaceTimePoint::new(x.clone(), lin(ca, cb, i));
            worst_c = worst_c.max(quasi_distance(beta, &z, z0)? / r);
            count[2] += 1;
        }
    }
    let mut rep = AuditReport::new("cylinder_relations", "geometry/cylinder-quasi-ball-inclusions");
    rep.push(AuditRow::new("backward_in_sublevel", worst_a, 1.0, worst_a, Some(1.0), worst_a <= slack));
    rep.push(AuditRow::new("sublevel_in_centered_double", miss_b as f64, 0.0, miss_b as f64, Some(0.0), miss_b == 0));
    rep.push(AuditRow::new("centered_within_double", worst_c, 2.0, worst_c, Some(2.0), worst_c <= 2.0 * slack));
    rep.note("r", r);
    rep.note("height", q.height);
    rep.note("points_backward", count[0] as f64);
    rep.note("points_sublevel", count[1] as f64);
    rep.note("points_centered", count[2] as f64);
    Ok(rep)
}

fn lattice_ball(x0: &[f64], r: f64, m: usize) -> Vec<Vec<f64>> {
    let lin = |c: f64, i: usize| c - r + 2.0 * r * i as f64 / (m - 1) as f64;
    if x0.len() == 1 {
        return (0..m).map(|i| vec![lin(x0[0], i)]).collect();
    }
    let mut out = Vec::new();
    for j in 0..m {
        for i in 0..m {
            let p = vec![lin(x0[0], i), lin(x0[1], j)];
            if dist(&p, x0) <= r {
                out.push(p);
            }
        }
    }
    out
}
