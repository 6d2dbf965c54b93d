//! Run configuration. Every field has a default; unknown keys are rejected.

use serde::Deserialize;
use std::path::Path;
use wpar_core::weights::{Region, Weight};

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum WeightSpec {
    Constant { value: f64 },
    /// `|x - center|^alpha` on the unit interval
    Power { alpha: f64, center: f64 },
}

impl Default for WeightSpec {
    fn default() -> Self {
        WeightSpec::Constant { value: 1.0 }
    }
}

impl WeightSpec {
    pub fn build(&self) -> wpar_core::Result<Weight> {
        let d = Region::interval(0.0, 1.0)?;
        match *self {
            WeightSpec::Constant { value } => Weight::constant(value, d),
            WeightSpec::Power { alpha, center } => Weight::power(alpha, vec![center], d),
        }
    }

    /// Exponent for the manufactured flux, when this weight has one.
    pub fn manufactured_alpha(&self) -> Option<f64> {
        match *self {
            WeightSpec::Constant { value } if value == 1.0 => Some(0.0),
            WeightSpec::Power { alpha, center } if center == 0.5 => Some(alpha),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    pub nx: usize,
    pub t_end: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { nx: 32, t_end: 0.2 }
    }
}

/// `A(x,t) = base + amplitude sin(frequency π x)`.
#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoefficientSpec {
    pub nu: f64,
    pub base: f64,
    pub amplitude: f64,
    pub frequency: f64,
}

impl Default for CoefficientSpec {
    fn default() -> Self {
        Self { nu: 0.5, base: 1.0, amplitude: 0.0, frequency: 8.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForcingKind {
    /// exact solution `sin(πx) e^{-t}`; needs a constant-one or half-centered power weight
    Manufactured,
    /// seeded smooth flux with zero initial data
    Smooth,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForcingSpec {
    pub kind: ForcingKind,
    pub modes: usize,
}

impl Default for ForcingSpec {
    fn default() -> Self {
        Self { kind: ForcingKind::Manufactured, modes: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OscillationSpec {
    pub r0: f64,
    pub delta: f64,
    pub stride: usize,
}

impl Default for OscillationSpec {
    fn default() -> Self {
        Self { r0: 0.5, delta: 0.1, stride: 4 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AuditSpec {
    /// cylinder vertex `(x, t)`; `t` defaults to the final time
    pub center: f64,
    pub radius: f64,
    pub energy_budget: f64,
    pub poincare_budget: f64,
    pub apriori_p: Vec<f64>,
    pub apriori_budget: f64,
    pub freeze_radius: f64,
    pub freeze_refine: usize,
    pub time_shifts: Vec<usize>,
    pub time_shift_budget: f64,
}

impl Default for AuditSpec {
    fn default() -> Self {
        Self {
            center: 0.5,
            radius: 0.2,
            energy_budget: 100.0,
            poincare_budget: 10.0,
            apriori_p: vec![2.0, 4.0],
            apriori_budget: 100.0,
            freeze_radius: 0.4,
            freeze_refine: 4,
            time_shifts: vec![1, 2, 4],
            time_shift_budget: 10.0,
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LevelsetSpec {
    pub k: f64,
    pub q0: f64,
    pub m_max: usize,
    pub delta_hat: f64,
    pub lambda: f64,
    pub r: f64,
    pub weak_fields: usize,
    pub weak_budget: f64,
    pub vitali_families: usize,
    pub vitali_size: usize,
}

impl Default for LevelsetSpec {
    fn default() -> Self {
        Self { k: 1.5, q0: 0.2, m_max: 6, delta_hat: 0.1, lambda: 2.0, r: 0.1, weak_fields: 5, weak_budget: 500.0, vitali_families: 5, vitali_size: 100 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometrySpec {
    pub triples: usize,
    pub centers: usize,
    pub radii: usize,
}

impl Default for GeometrySpec {
    fn default() -> Self {
        Self { triples: 20_000, centers: 9, radii: 16 }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlattenSpec {
    pub deltas: Vec<f64>,
    pub cells: usize,
    pub per_axis: usize,
    pub m0: f64,
    /// planar weight `|y|^alpha` for the pushforward audit
    pub alpha: f64,
    pub chart_delta: f64,
    pub chart_width: f64,
    pub chart_base: f64,
}

impl Default for FlattenSpec {
    fn default() -> Self {
        Self { deltas: vec![0.05, 0.1, 0.2], cells: 48, per_axis: 5, m0: 2.0, alpha: 0.1, chart_delta: 0.2, chart_width: 0.4, chart_base: 0.3 }
    }
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub name: String,
    pub weight: WeightSpec,
    pub m0: f64,
    pub grid: GridSpec,
    pub coefficients: CoefficientSpec,
    pub forcing: ForcingSpec,
    pub oscillation: OscillationSpec,
    pub audit: AuditSpec,
    pub levelset: LevelsetSpec,
    pub geometry: GeometrySpec,
    pub flatten: FlattenSpec,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        let cfg: Config = serde_json::from_str(&text).map_err(|e| format!("bad config {}: {e}", path.display()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), String> {
        let check = |ok: bool, msg: &str| if ok { Ok(()) } else { Err(msg.to_string()) };
        check(self.m0 >= 1.0, "m0 must be at least 1")?;
        check(self.grid.nx >= 8 && self.grid.nx <= 4096, "grid.nx must lie in [8, 4096]")?;
        check(self.grid.t_end > 0.0 && self.grid.t_end.is_finite(), "grid.t_end must be positive")?;
        let c = &self.coefficients;
        check(c.nu > 0.0 && c.nu < 1.0, "coefficients.nu must lie in (0, 1)")?;
        check(c.base - c.amplitude.abs() >= c.nu && c.base + c.amplitude.abs() <= 1.0 / c.nu, "coefficients violate ellipticity")?;
        check(self.forcing.modes >= 1, "forcing.modes must be positive")?;
        if self.forcing.kind == ForcingKind::Manufactured {
            check(self.weight.manufactured_alpha().is_some(), "manufactured forcing needs weight 1 or a power centered at 0.5")?;
        }
        let o = &self.oscillation;
        check(o.r0 > 0.0 && o.delta >= 0.0 && o.stride >= 1, "oscillation needs r0 > 0, delta >= 0, stride >= 1")?;
        let a = &self.audit;
        check(a.center > 0.0 && a.center < 1.0 && a.radius > 0.0 && a.freeze_radius > 0.0, "audit cylinder must sit inside (0, 1)")?;
        check(a.freeze_refine >= 1 && a.apriori_p.iter().all(|p| *p >= 1.0), "audit needs freeze_refine >= 1 and p >= 1")?;
        check(!a.time_shifts.is_empty() && a.time_shifts.iter().all(|m| *m >= 1), "audit.time_shifts must be positive")?;
        let l = &self.levelset;
        check(l.k > 1.0 && l.q0 > 0.0 && l.q0 < 1.0 && l.m_max >= 1 && l.lambda >= 1.0 && l.r > 0.0, "levelset parameters out of range")?;
        let g = &self.geometry;
        check(g.triples >= 1 && g.centers >= 1 && g.radii >= 2, "geometry sample counts must be positive")?;
        let f = &self.flatten;
        check(f.deltas.len() >= 2 && f.deltas.iter().all(|d| *d > 0.0 && *d < 1.0), "flatten.deltas needs two values in (0, 1)")?;
        check(f.cells >= 8 && f.per_axis >= 1 && f.m0 >= 1.0, "flatten grid parameters out of range")?;
        check(f.chart_delta >= 0.0 && f.chart_delta < 1.0 && f.chart_width > 0.0, "flatten chart needs delta in [0, 1)")?;
        self.weight.build().map_err(|e| e.to_string())?;
        Ok(())
    }
}
