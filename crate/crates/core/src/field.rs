//! Space-time grids and the fields that live on them.
//!
//! One space dimension: nodes `x_i = x_lo + i h` (`i = 0..=nx`), faces at
//! `x_{i+1/2}`, time levels `t_k = t_start + k τ` (`k = 0..=nt`). Face data
//! at level `k` is the value used by the implicit step ending at `t_k`.

use crate::error::{invalid, Error, Result};
use crate::weights::Weight;
use std::io::{Read, Write};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub x_lo: f64,
    pub x_hi: f64,
    pub nx: usize,
    pub t_start: f64,
    pub tau: f64,
    pub nt: usize,
}

impl Grid {
    pub fn new(x_lo: f64, x_hi: f64, nx: usize, t_start: f64, tau: f64, nt: usize) -> Result<Self> {
        if !(x_lo < x_hi) || nx < 2 || !(tau > 0.0) || !t_start.is_finite() {
            return invalid("grid needs x_lo < x_hi, at least 3 nodes and tau > 0");
        }
        Ok(Self { x_lo, x_hi, nx, t_start, tau, nt })
    }

    pub fn h(&self) -> f64 {
        (self.x_hi - self.x_lo) / self.nx as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        self.x_lo + i as f64 * self.h()
    }

    pub fn face(&self, i: usize) -> f64 {
        self.x_lo + (i as f64 + 0.5) * self.h()
    }

    pub fn t(&self, k: usize) -> f64 {
        self.t_start + k as f64 * self.tau
    }

    pub fn t_end(&self) -> f64 {
        self.t(self.nt)
    }

    pub fn nodes(&self) -> usize {
        self.nx + 1
    }

    /// Dual-cell extent of node `i`, clipped to the grid.
    pub fn dual_cell(&self, i: usize) -> (f64, f64) {
        let h = self.h();
        ((self.x(i) - 0.5 * h).max(self.x_lo), (self.x(i) + 0.5 * h).min(self.x_hi))
    }

    /// Cell averages of `β` over the dual cells.
    pub fn beta_cells(&self, beta: &Weight) -> Result<Vec<f64>> {
        (0..self.nodes())
            .map(|i| {
                let (a, b) = self.dual_cell(i);
                Ok(beta.interval_integral(a, b, 1.0)? / (b - a))
            })
            .collect()
    }
}

/// Scalar data on faces at every time level.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceField {
    pub nx: usize,
    pub nt: usize,
    pub values: Vec<f64>,
}

impl FaceField {
    pub fn zeros(grid: &Grid) -> Self {
        Self { nx: grid.nx, nt: grid.nt, values: vec![0.0; grid.nx * (grid.nt + 1)] }
    }

    pub fn from_fn(grid: &Grid, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut values = Vec::with_capacity(grid.nx * (grid.nt + 1));
        for k in 0..=grid.nt {
            for i in 0..grid.nx {
                values.push(f(grid.face(i), grid.t(k)));
            }
        }
        Self { nx: grid.nx, nt: grid.nt, values }
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.nx + i]
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }

    fn check(&self, grid: &Grid) -> Result<()> {
        if self.nx != grid.nx || self.nt != grid.nt {
            return invalid("face field does not match the grid");
        }
        Ok(())
    }
}

/// Matrix field `A` sampled at points and times, with ellipticity constant ν.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    pub dim: usize,
    pub points: Vec<Vec<f64>>,
    pub times: Vec<f64>,
    /// `times × points × dim²`, row-major matrices
    pub values: Vec<f64>,
    pub nu: f64,
}

impl CoefficientField {
    pub fn new(dim: usize, points: Vec<Vec<f64>>, times: Vec<f64>, values: Vec<f64>, nu: f64) -> Result<Self> {
        if !(nu > 0.0 && nu < 1.0) || dim == 0 || dim > 2 {
            return invalid("coefficient field needs nu in (0,1) and dimension 1 or 2");
        }
        if values.len() != times.len() * points.len() * dim * dim || points.iter().any(|p| p.len() != dim) {
            return invalid("coefficient values do not match points and times");
        }
        let f = Self { dim, points, times, values, nu };
        f.check_ellipticity(nu)?;
        Ok(f)
    }

    /// Scalar coefficient on the faces of a one-dimensional grid.
    pub fn on_faces(grid: &Grid, nu: f64, a: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let points = (0..grid.nx).map(|i| vec![grid.face(i)]).collect();
        let times = (0..=grid.nt).map(|k| grid.t(k)).collect();
        let ff = FaceField::from_fn(grid, a);
        Self::new(1, points, times, ff.values, nu)
    }

    pub fn matrix(&self, k: usize, j: usize) -> &[f64] {
        let d2 = self.dim * self.dim;
        let start = (k * self.points.len() + j) * d2;
        &self.values[start..start + d2]
    }

    /// Scalar value (one dimension).
    pub fn scalar(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.points.len() + i]
    }

    /// Smallest eigenvalue of the symmetric part and the spectral norm, per sample.
    pub fn bounds(m: &[f64], dim: usize) -> (f64, f64) {
        if dim == 1 {
            return (m[0], m[0].abs());
        }
        let (a, b, c) = (m[0], 0.5 * (m[1] + m[2]), m[3]);
        let tr = 0.5 * (a + c);
        let disc = (0.25 * (a - c) * (a - c) + b * b).sqrt();
        let lam_min = tr - disc;
        // spectral norm of the full matrix: sqrt of largest eigenvalue of MᵀM
        let (p, q, r) = (m[0] * m[0] + m[2] * m[2], m[0] * m[1] + m[2] * m[3], m[1] * m[1] + m[3] * m[3]);
        let t = 0.5 * (p + r);
        let d = (0.25 * (p - r) * (p - r) + q * q).sqrt();
        (lam_min, (t + d).sqrt())
    }

    pub fn check_ellipticity(&self, nu: f64) -> Result<()> {
        let d2 = self.dim * self.dim;
        for (idx, m) in self.values.chunks(d2).enumerate() {
            let (lo, norm) = Self::bounds(m, self.dim);
            if !(lo >= nu * (1.0 - 1e-12)) || !(norm <= (1.0 + 1e-12) / nu) {
                return Err(Error::EllipticityViolation { index: idx, detail: format!("min eigenvalue {lo}, norm {norm}, nu {nu}") });
            }
        }
        Ok(())
    }

    pub(crate) fn check_faces(&self, grid: &Grid) -> Result<()> {
        if self.dim != 1 || self.points.len() != grid.nx || self.times.len() != grid.nt + 1 {
            return invalid("coefficient field does not match the grid faces");
        }
        Ok(())
    }
}

/// Scalar field at grid nodes and time levels.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionField {
    pub grid: Grid,
    /// `(nt + 1) × (nx + 1)`, time outermost
    pub values: Vec<f64>,
    pub dirichlet: Vec<bool>,
}

impl SolutionField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.nodes() * (grid.nt + 1) || values.iter().any(|v| !v.is_finite()) {
            return invalid("solution values must be finite and match the grid");
        }
        let mut dirichlet = vec![false; grid.nodes()];
        dirichlet[0] = true;
        dirichlet[grid.nx] = true;
        Ok(Self { grid, values, dirichlet })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let mut v = Vec::with_capacity(grid.nodes() * (grid.nt + 1));
        for k in 0..=grid.nt {
            for i in 0..grid.nodes() {
                v.push(f(grid.x(i), grid.t(k)));
            }
        }
        Self::new(grid, v)
    }

    pub fn get(&self, k: usize, i: usize) -> f64 {
        self.values[k * self.grid.nodes() + i]
    }

    pub fn level(&self, k: usize) -> &[f64] {
        let n = self.grid.nodes();
        &self.values[k * n..(k + 1) * n]
    }

    /// Face gradient `(u_{i+1} - u_i) / h` at level `k`.
    pub fn grad(&self, k: usize, i: usize) -> f64 {
        (self.get(k, i + 1) - self.get(k, i)) / self.grid.h()
    }

    /// Backward difference `(u^k - u^{k-1}) / τ`, `k >= 1`.
    pub fn dt(&self, k: usize, i: usize) -> f64 {
        (self.get(k, i) - self.get(k - 1, i)) / self.grid.tau
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { values: self.values.iter().map(|v| v * c).collect(), ..self.clone() }
    }

    /// Gradient as a face field (level 0 included).
    pub fn grad_field(&self) -> FaceField {
        let g = &self.grid;
        let mut values = Vec::with_capacity(g.nx * (g.nt + 1));
        for k in 0..=g.nt {
            for i in 0..g.nx {
                values.push(self.grad(k, i));
            }
        }
        FaceField { nx: g.nx, nt: g.nt, values }
    }

    /// Column CSV `x,t,u`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("x,t,u\n");
        for k in 0..=self.grid.nt {
            for i in 0..self.grid.nodes() {
                s.push_str(&format!(
                    "{},{},{}\n",
                    crate::report::fmt_f64(self.grid.x(i)),
                    crate::report::fmt_f64(self.grid.t(k)),
                    crate::report::fmt_f64(self.get(k, i))
                ));
            }
        }
        s
    }

    /// Little-endian dump: magic, endianness tag, dims, spacings, then row-major values.
    pub fn write_binary(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(BINARY_MAGIC)?;
        w.write_all(b"LE\0\0")?;
        w.write_all(&(self.grid.nodes() as u64).to_le_bytes())?;
        w.write_all(&(self.grid.nt as u64 + 1).to_le_bytes())?;
        for v in [self.grid.x_lo, self.grid.h(), self.grid.t_start, self.grid.tau] {
            w.write_all(&v.to_le_bytes())?;
        }
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_binary(r: &mut impl Read) -> std::io::Result<Self> {
        let bad = |m: &str| std::io::Error::new(std::io::ErrorKind::InvalidData, m.to_string());
        let mut head = [0u8; 12];
        r.read_exact(&mut head)?;
        if &head[..8] != BINARY_MAGIC || &head[8..] != b"LE\0\0" {
            return Err(bad("not a little-endian solution dump"));
        }
        let mut b8 = [0u8; 8];
        let mut u64s = [0u64; 2];
        for v in &mut u64s {
            r.read_exact(&mut b8)?;
            *v = u64::from_le_bytes(b8);
        }
        let mut f = [0f64; 4];
        for v in &mut f {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        let (nodes, levels) = (u64s[0] as usize, u64s[1] as usize);
        if nodes < 3 || levels == 0 {
            return Err(bad("bad dimensions"));
        }
        let grid = Grid::new(f[0], f[0] + f[1] * (nodes - 1) as f64, nodes - 1, f[2], f[3], levels - 1).map_err(|e| bad(&e.to_string()))?;
        let mut values = vec![0.0; nodes * levels];
        for v in &mut values {
            r.read_exact(&mut b8)?;
            *v = f64::from_le_bytes(b8);
        }
        Self::new(grid, values).map_err(|e| bad(&e.to_string()))
    }
}

pub const BINARY_MAGIC: &[u8; 8] = b"WPARSOL1";

pub(crate) fn check_forcing(f: &FaceField, grid: &Grid) -> Result<()> {
    f.check(grid)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn binary_round_trip() {
        let g = Grid::new(0.0, 1.0, 8, 0.0, 0.01, 3).unwrap();
        let s = SolutionField::from_fn(g, |x, t| x * x + t).unwrap();
        let mut buf = Vec::new();
        s.write_binary(&mut buf).unwrap();
        assert_eq!(&buf[..8], BINARY_MAGIC);
        assert_eq!(buf.len(), 12 + 16 + 32 + 8 * 9 * 4);
        let back = SolutionField::read_binary(&mut buf.as_slice()).unwrap();
        assert_eq!(back.values, s.values);
        assert!(s.to_csv().starts_with("x,t,u\n"));
    }

    #[test]
    fn ellipticity_is_enforced() {
        let g = Grid::new(0.0, 1.0, 4, 0.0, 0.1, 2).unwrap();
        assert!(CoefficientField::on_faces(&g, 0.5, |_, _| 1.0).is_ok());
        assert!(matches!(CoefficientField::on_faces(&g, 0.5, |_, _| 0.1), Err(Error::EllipticityViolation { .. })));
        assert!(matches!(CoefficientField::on_faces(&g, 0.5, |_, _| 3.0), Err(Error::EllipticityViolation { .. })));
    }
}
