//! Maximal function over centered weighted cylinders, Vitali selection and
//! the level-set decay experiment. One space dimension.

use crate::error::{invalid, Error, Result};
use crate::field::{FaceField, SolutionField};
use crate::geometry::{height, SpaceTimePoint};
use crate::report::{AuditReport, AuditRow, Table};
use crate::weights::{BallFamily, Weight};
use rayon::prelude::*;

/// Piecewise-constant data on a tensor grid of `nx × nt` cells.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceTimeField {
    pub x_lo: f64,
    pub hx: f64,
    pub nx: usize,
    pub t_lo: f64,
    pub ht: f64,
    pub nt: usize,
    /// cell values, time outermost
    pub values: Vec<f64>,
    // prefix integrals of |g| at cell corners, (nt + 1) × (nx + 1)
    prefix: Vec<f64>,
}

impl SpaceTimeField {
    #[allow(clippy::too_many_arguments)]
    pub fn new(x_lo: f64, x_hi: f64, nx: usize, t_lo: f64, t_hi: f64, nt: usize, values: Vec<f64>) -> Result<Self> {
        if !(x_lo < x_hi) || !(t_lo < t_hi) || nx == 0 || nt == 0 {
            return invalid("space-time field needs a non-empty box");
        }
        if values.len() != nx * nt || values.iter().any(|v| !v.is_finite()) {
            return invalid("field values must be finite and match the cells");
        }
        let (hx, ht) = ((x_hi - x_lo) / nx as f64, (t_hi - t_lo) / nt as f64);
        let mut prefix = vec![0.0; (nt + 1) * (nx + 1)];
        for k in 0..nt {
            let mut row = 0.0;
            for i in 0..nx {
                row += values[k * nx + i].abs() * hx * ht;
                prefix[(k + 1) * (nx + 1) + i + 1] = prefix[k * (nx + 1) + i + 1] + row;
            }
        }
        Ok(Self { x_lo, hx, nx, t_lo, ht, nt, values, prefix })
    }

    /// Face data of levels `1..=nt` on the cells `[x_i, x_{i+1}] × (t_{k-1}, t_k]`.
    pub fn from_faces(f: &FaceField, u_grid: &crate::field::Grid, map: impl Fn(f64) -> f64) -> Result<Self> {
        let g = u_grid;
        if f.nx != g.nx || f.nt != g.nt || g.nt == 0 {
            return invalid("face field does not match the grid");
        }
        let values = (1..=g.nt).flat_map(|k| (0..g.nx).map(move |i| (k, i))).map(|(k, i)| map(f.get(k, i))).collect();
        Self::new(g.x_lo, g.x_hi, g.nx, g.t_start, g.t_end(), g.nt, values)
    }

    /// `|∇u|²` of a solution.
    pub fn grad_sq(u: &SolutionField) -> Result<Self> {
        Self::from_faces(&u.grad_field(), &u.grid, |v| v * v)
    }

    pub fn x_hi(&self) -> f64 {
        self.x_lo + self.nx as f64 * self.hx
    }

    pub fn t_hi(&self) -> f64 {
        self.t_lo + self.nt as f64 * self.ht
    }

    pub fn cell_center(&self, k: usize, i: usize) -> SpaceTimePoint {
        SpaceTimePoint::new(vec![self.x_lo + (i as f64 + 0.5) * self.hx], self.t_lo + (k as f64 + 0.5) * self.ht)
    }

    pub fn l1(&self) -> f64 {
        self.prefix[self.prefix.len() - 1]
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.x_lo, self.x_hi(), self.nx, self.t_lo, self.t_hi(), self.nt, self.values.iter().map(|v| v * c).collect())
    }

    /// Same grid with `values[c] * mask(center of c)`.
    pub fn masked(&self, mask: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let v = (0..self.nt).flat_map(|k| (0..self.nx).map(move |i| (k, i))).map(|(k, i)| {
            let z = self.cell_center(k, i);
            self.values[k * self.nx + i] * mask(z.x[0], z.t)
        });
        Self::new(self.x_lo, self.x_hi(), self.nx, self.t_lo, self.t_hi(), self.nt, v.collect())
    }

    // exact ∫∫ |g| over [x_lo, x] × [t_lo, t]: bilinear in each cell
    fn cumulative(&self, x: f64, t: f64) -> f64 {
        let fx = ((x - self.x_lo) / self.hx).clamp(0.0, self.nx as f64);
        let ft = ((t - self.t_lo) / self.ht).clamp(0.0, self.nt as f64);
        let (i, k) = ((fx.floor() as usize).min(self.nx - 1), (ft.floor() as usize).min(self.nt - 1));
        let (a, b) = (fx - i as f64, ft - k as f64);
        let w = self.nx + 1;
        let p = |kk: usize, ii: usize| self.prefix[kk * w + ii];
        (1.0 - a) * (1.0 - b) * p(k, i) + a * (1.0 - b) * p(k, i + 1) + (1.0 - a) * b * p(k + 1, i) + a * b * p(k + 1, i + 1)
    }

    /// `∫∫ |g|` over `[xa, xb] × [ta, tb]` and the area of that box inside the grid.
    pub fn rect(&self, xa: f64, xb: f64, ta: f64, tb: f64) -> (f64, f64) {
        let w = (xb.min(self.x_hi()) - xa.max(self.x_lo)).max(0.0);
        let h = (tb.min(self.t_hi()) - ta.max(self.t_lo)).max(0.0);
        if w * h == 0.0 {
            return (0.0, 0.0);
        }
        let span = |a: f64, b: f64, lo: f64, d: f64, n: usize| {
            let i0 = (((a - lo) / d).floor().max(0.0) as usize).min(n - 1);
            let i1 = (((b - lo) / d).ceil().max(1.0) as usize).min(n);
            (i0, i1)
        };
        let (i0, i1) = span(xa, xb, self.x_lo, self.hx, self.nx);
        let (k0, k1) = span(ta, tb, self.t_lo, self.ht, self.nt);
        // small boxes: direct cell sums avoid cancellation in the prefix table
        if (i1 - i0) * (k1 - k0) <= 256 {
            let mut s = 0.0;
            for k in k0..k1 {
                let t0 = self.t_lo + k as f64 * self.ht;
                let dt = (tb.min(t0 + self.ht) - ta.max(t0)).max(0.0);
                if dt == 0.0 {
                    continue;
                }
                for i in i0..i1 {
                    let x0 = self.x_lo + i as f64 * self.hx;
                    let dx = (xb.min(x0 + self.hx) - xa.max(x0)).max(0.0);
                    s += self.values[k * self.nx + i].abs() * dx * dt;
                }
            }
            return (s, w * h);
        }
        let s = self.cumulative(xb, tb) - self.cumulative(xa, tb) - self.cumulative(xb, ta) + self.cumulative(xa, ta);
        (s.max(0.0), w * h)
    }
}

/// Centered cylinder `B_ρ(x) × (t - h/2, t + h/2)` with `h = ρ² Ψ_{β,x}(ρ)`.
#[derive(Debug, Clone, PartialEq)]
pub struct CenteredCylinder {
    pub x: f64,
    pub t: f64,
    pub rho: f64,
    pub height: f64,
}

impl CenteredCylinder {
    pub fn new(beta: &Weight, x: f64, t: f64, rho: f64) -> Result<Self> {
        if !(rho > 0.0) || !x.is_finite() || !t.is_finite() {
            return invalid("cylinder needs a finite center and rho > 0");
        }
        Ok(Self { x, t, rho, height: height(beta, &[x], rho)? })
    }

    /// Open cylinders intersect iff both open intervals overlap.
    pub fn intersects(&self, o: &Self) -> bool {
        let (a, b) = (self.x - self.rho, self.x + self.rho);
        let (c, d) = (o.x - o.rho, o.x + o.rho);
        let (p, q) = (self.t - 0.5 * self.height, self.t + 0.5 * self.height);
        let (r, s) = (o.t - 0.5 * o.height, o.t + 0.5 * o.height);
        a < d && c < b && p < s && r < q
    }

    pub fn contains_closed(&self, x: f64, t: f64, slack: f64) -> bool {
        (x - self.x).abs() <= self.rho * (1.0 + slack) && (t - self.t).abs() <= 0.5 * self.height * (1.0 + slack)
    }
}

/// Default radii: 24 log-spaced values from a quarter cell to the spatial extent.
pub fn default_radii(g: &SpaceTimeField) -> Vec<f64> {
    BallFamily::log_radii(0.25 * g.hx, g.x_hi() - g.x_lo, 24)
}

/// Heights `h_x(ρ)` for every cell column and radius.
pub struct MaximalOperator {
    radii: Vec<f64>,
    heights: Vec<Vec<f64>>,
}

impl MaximalOperator {
    pub fn new(g: &SpaceTimeField, beta: &Weight, radii: &[f64]) -> Result<Self> {
        if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
            return invalid("radii must be positive and non-empty");
        }
        let heights = (0..g.nx)
            .into_par_iter()
            .map(|i| {
                let x = g.x_lo + (i as f64 + 0.5) * g.hx;
                radii.iter().map(|r| height(beta, &[x], *r)).collect::<Result<Vec<_>>>()
            })
            .collect::<Vec<_>>()
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { radii: radii.to_vec(), heights })
    }

    fn at_cell(&self, g: &SpaceTimeField, k: usize, i: usize) -> f64 {
        let z = g.cell_center(k, i);
        let (x, t) = (z.x[0], z.t);
        self.radii.iter().zip(&self.heights[i]).fold(0.0, |m, (r, h)| {
            let (s, area) = g.rect(x - r, x + r, t - 0.5 * h, t + 0.5 * h);
            if area > 0.0 { m.max(s / area) } else { m }
        })
    }

    /// `M g` at every cell center, time outermost.
    pub fn on_cells(&self, g: &SpaceTimeField) -> Vec<f64> {
        (0..g.nt * g.nx).into_par_iter().map(|c| self.at_cell(g, c / g.nx, c % g.nx)).collect()
    }
}

/// `max_ρ` of the average of `|g|` over `C_ρ(z) ∩ domain`.
pub fn maximal_function(g: &SpaceTimeField, beta: &Weight, z: &SpaceTimePoint, radii: &[f64]) -> Result<f64> {
    let x = z.x[0];
    let mut best = 0.0f64;
    for r in radii {
        let h = height(beta, &[x], *r)?;
        let (s, area) = g.rect(x - r, x + r, z.t - 0.5 * h, z.t + 0.5 * h);
        if area > 0.0 {
            best = best.max(s / area);
        }
    }
    Ok(best)
}

/// Measure of `{values > λ}` on the cells, restricted by a per-cell area factor.
fn level_measure(vals: &[f64], area: &[f64], lambda: f64) -> f64 {
    vals.iter().zip(area).filter(|(v, _)| **v > lambda).fold(0.0, |s, (_, a)| s + a)
}

pub fn weak_1_1_audit(g: &SpaceTimeField, beta: &Weight, lambdas: &[f64], radii: &[f64], budget: f64) -> Result<AuditReport> {
    if lambdas.iter().any(|l| !(*l > 0.0)) {
        return invalid("levels must be positive");
    }
    let m = MaximalOperator::new(g, beta, radii)?.on_cells(g);
    let area = vec![g.hx * g.ht; m.len()];
    let l1 = g.l1();
    let mut rep = AuditReport::new("weak_1_1", "maximal/weak-type-estimate");
    let mut worst = 0.0f64;
    for (j, l) in lambdas.iter().enumerate() {
        let meas = level_measure(&m, &area, *l);
        let c = if meas == 0.0 { 0.0 } else { l * meas / l1 };
        rep.note(format!("level_{j:02}_lambda"), *l);
        rep.note(format!("level_{j:02}_measure"), meas);
        worst = worst.max(c);
    }
    rep.push(AuditRow::budgeted("weak_type_constant", worst * l1, l1, worst, budget));
    Ok(rep)
}

/// Greedy selection result; `selected[j]` marks kept cylinders.
#[derive(Debug, Clone, PartialEq)]
pub struct CoveringFamily {
    pub cylinders: Vec<CenteredCylinder>,
    pub selected: Vec<bool>,
}

impl CoveringFamily {
    pub fn chosen(&self) -> impl Iterator<Item = &CenteredCylinder> {
        self.cylinders.iter().zip(&self.selected).filter(|(_, s)| **s).map(|(c, _)| c)
    }

    pub fn pairwise_disjoint(&self) -> bool {
        let c: Vec<_> = self.chosen().collect();
        (0..c.len()).all(|a| (a + 1..c.len()).all(|b| !c[a].intersects(c[b])))
    }

    /// Every member meets a selected cylinder of at least its radius.
    pub fn dominated(&self) -> bool {
        self.cylinders.iter().all(|c| self.chosen().any(|s| s.rho >= c.rho && s.intersects(c)))
    }

    /// Lattice check that the 5ρ-dilations cover every member.
    pub fn five_cover(&self, beta: &Weight, per_axis: usize) -> Result<bool> {
        let dil = self.chosen().map(|s| CenteredCylinder::new(beta, s.x, s.t, 5.0 * s.rho)).collect::<Result<Vec<_>>>()?;
        let n = per_axis.max(2);
        for c in &self.cylinders {
            for a in 0..n {
                for b in 0..n {
                    // interior lattice of the open cylinder
                    let fx = -1.0 + 2.0 * (a as f64 + 0.5) / n as f64;
                    let ft = -1.0 + 2.0 * (b as f64 + 0.5) / n as f64;
                    let (x, t) = (c.x + fx * c.rho, c.t + 0.5 * ft * c.height);
                    if !dil.iter().any(|d| d.contains_closed(x, t, 1e-12)) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Greedy Vitali selection by decreasing radius; ties keep input order.
pub fn vitali_select(fam: Vec<CenteredCylinder>) -> CoveringFamily {
    let mut order: Vec<usize> = (0..fam.len()).collect();
    order.sort_by(|a, b| fam[*b].rho.total_cmp(&fam[*a].rho).then(a.cmp(b)));
    let mut selected = vec![false; fam.len()];
    let mut kept: Vec<usize> = Vec::new();
    for j in order {
        if kept.iter().all(|k| !fam[*k].intersects(&fam[j])) {
            selected[j] = true;
            kept.push(j);
        }
    }
    CoveringFamily { cylinders: fam, selected }
}

/// Parameters of the level-set decay experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayParams {
    pub k: f64,
    pub q0: f64,
    pub m_max: usize,
    pub delta_hat: f64,
    /// quasi-triangle constant Λ; the maximal function lives on `Q_{2Λ r}`
    pub lambda: f64,
    pub z0: SpaceTimePoint,
    pub r: f64,
}

fn box_fraction(xa: f64, xb: f64, ta: f64, tb: f64, g: &SpaceTimeField, k: usize, i: usize) -> f64 {
    let (x0, t0) = (g.x_lo + i as f64 * g.hx, g.t_lo + k as f64 * g.ht);
    let w = (xb.min(x0 + g.hx) - xa.max(x0)).max(0.0);
    let h = (tb.min(t0 + g.ht) - ta.max(t0)).max(0.0);
    w * h / (g.hx * g.ht)
}

/// Decay of `|{Q_r : M(|∇u|²) > K^m}|` against the recursion with a fitted `γ1`.
pub fn levelset_decay_audit(u: &SolutionField, f: &FaceField, beta: &Weight, p: &DecayParams, radii: Option<&[f64]>) -> Result<(AuditReport, Table)> {
    if !(p.k > 1.0) {
        return invalid("K must exceed 1");
    }
    if !(p.q0 > 0.0 && p.q0 < 1.0) || p.m_max == 0 || !(p.delta_hat > 0.0) || !(p.lambda >= 1.0) {
        return invalid("decay needs q0 in (0,1), m_max >= 1, delta_hat > 0 and Lambda >= 1");
    }
    let x0 = p.z0.x[0];
    let (h1, hu) = (height(beta, &[x0], p.r)?, height(beta, &[x0], 2.0 * p.lambda * p.r)?);
    let (ua, ub, uta) = (x0 - 2.0 * p.lambda * p.r, x0 + 2.0 * p.lambda * p.r, p.z0.t - hu);
    let (qa, qb, qta) = (x0 - p.r, x0 + p.r, p.z0.t - h1);
    let g0 = SpaceTimeField::grad_sq(u)?;
    let f0 = SpaceTimeField::from_faces(f, &u.grid, |v| v * v)?;
    let cells = g0.nx * g0.nt;
    let chi_u: Vec<f64> = (0..cells).map(|c| box_fraction(ua, ub, uta, p.z0.t, &g0, c / g0.nx, c % g0.nx)).collect();
    let q_area: Vec<f64> = (0..cells).map(|c| g0.hx * g0.ht * box_fraction(qa, qb, qta, p.z0.t, &g0, c / g0.nx, c % g0.nx)).collect();
    let q_meas = q_area.iter().fold(0.0, |a, b| a + b);
    if q_meas == 0.0 {
        return Err(Error::EmptyRegion);
    }
    let restrict = |fld: &SpaceTimeField| -> Result<SpaceTimeField> {
        let v = fld.values.iter().zip(&chi_u).map(|(a, b)| a * b).collect();
        SpaceTimeField::new(fld.x_lo, fld.x_hi(), fld.nx, fld.t_lo, fld.t_hi(), fld.nt, v)
    };
    let (g, ff) = (restrict(&g0)?, restrict(&f0)?);
    let rad = radii.map(|r| r.to_vec()).unwrap_or_else(|| default_radii(&g));
    let op = MaximalOperator::new(&g, beta, &rad)?;
    let mg = op.on_cells(&g);
    let mf = op.on_cells(&ff);
    // empirical weak-type constant, reported alongside the normalization
    let full = vec![g.hx * g.ht; cells];
    let l1 = g.l1();
    let mut rep = AuditReport::new("levelset_decay", "maximal/level-set-decay");
    let mut table = Table::new(&["m", "lhs_measure", "rhs_bound", "gamma1_fit"]);
    if l1 == 0.0 {
        for m in 1..=p.m_max {
            table.push(vec![(m as i64).into(), 0.0.into(), 0.0.into(), 0.0.into()]);
        }
        rep.push(AuditRow::info("density_precondition", 0.0, p.q0 * q_meas, 0.0));
        rep.push(AuditRow::new("gamma1", 0.0, 0.0, 0.0, None, true));
        return Ok((rep, table));
    }
    let gmax = mg.iter().cloned().fold(0.0, f64::max);
    let mut n_w = 0.0f64;
    let mut lam = gmax;
    for _ in 0..40 {
        let meas = level_measure(&mg, &full, lam);
        n_w = n_w.max(lam * meas / l1);
        lam *= 0.5;
    }
    // smallest N0² with |{M(|∇u|²)/N0² > K} ∩ Q| ≤ q0 |Q|: the level set
    // above the (1 - q0) area quantile of M g over Q
    let mut order: Vec<usize> = (0..cells).filter(|c| q_area[*c] > 0.0).collect();
    order.sort_by(|a, b| mg[*b].total_cmp(&mg[*a]).then(a.cmp(b)));
    let budget_area = p.q0 * q_meas;
    let mut acc = 0.0;
    let mut thresh = 0.0;
    for c in &order {
        if acc + q_area[*c] > budget_area {
            thresh = mg[*c];
            break;
        }
        acc += q_area[*c];
    }
    let n0_sq = (thresh / p.k).max(f64::MIN_POSITIVE);
    let mg: Vec<f64> = mg.iter().map(|v| v / n0_sq).collect();
    let mf: Vec<f64> = mf.iter().map(|v| v / n0_sq).collect();
    let s = level_measure(&mg, &q_area, p.k);
    let pre_ok = s <= p.q0 * q_meas;
    rep.push(AuditRow::info("density_precondition", s, p.q0 * q_meas, s / (p.q0 * q_meas)));
    rep.tag("precondition", if pre_ok { "satisfied".to_string() } else { Error::PreconditionFailed(format!("|S| = {s} > q0|Q| = {}", p.q0 * q_meas)).to_string() });
    let base = level_measure(&mg, &q_area, 1.0);
    let lhs: Vec<f64> = (1..=p.m_max).map(|m| level_measure(&mg, &q_area, p.k.powi(m as i32))).collect();
    let f_lv: Vec<f64> = (0..p.m_max).map(|j| level_measure(&mf, &q_area, p.k.powi(j as i32) * p.delta_hat * p.delta_hat)).collect();
    let rhs = |m: usize, l0: f64| -> f64 { l0.powi(m as i32) * base + (1..=m).map(|i| l0.powi(i as i32) * f_lv[m - i]).sum::<f64>() };
    // smallest l0 with lhs(m) ≤ rhs(m, l0); rhs is increasing in l0
    let fit = |m: usize| -> f64 {
        let target = lhs[m - 1];
        if target == 0.0 {
            return 0.0;
        }
        let mut hi = 1.0;
        while rhs(m, hi) < target {
            hi *= 2.0;
            if hi > 1e300 {
                return f64::INFINITY;
            }
        }
        let mut lo = 0.0;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if rhs(m, mid) >= target { hi = mid } else { lo = mid }
        }
        hi
    };
    let l0s: Vec<f64> = (1..=p.m_max).map(fit).collect();
    let l0 = l0s.iter().cloned().fold(0.0, f64::max);
    let mut monotone = true;
    for m in 1..=p.m_max {
        if m > 1 && lhs[m - 1] > lhs[m - 2] {
            monotone = false;
        }
        table.push(vec![(m as i64).into(), lhs[m - 1].into(), rhs(m, l0).into(), (l0s[m - 1] / p.q0).into()]);
    }
    let gamma1 = l0 / p.q0;
    rep.push(AuditRow::new("gamma1", lhs.iter().fold(0.0, |a, b| a + b), (1..=p.m_max).fold(0.0, |a, m| a + rhs(m, l0)), gamma1, None, gamma1.is_finite()));
    rep.push(AuditRow::new("monotone_decay", lhs[0], base, 0.0, None, monotone && lhs[0] <= base));
    rep.note("normalization", n0_sq);
    rep.note("weak_type_constant", n_w);
    rep.note("q_measure", q_meas);
    rep.note("base_measure", base);
    Ok((rep, table))
}
