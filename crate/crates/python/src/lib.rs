//! Python bindings. Reports come back as plain dicts.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use wpar_core::field::{CoefficientField, FaceField};
use wpar_core::flattening::{self, BoundaryChart, ChartKind};
use wpar_core::geometry::{self, SpaceTimePoint};
use wpar_core::maximal::{self, DecayParams};
use wpar_core::oscillation::{self, OscillationConfig};
use wpar_core::weights::{self, BallFamily, Region, WeightContext};
use wpar_core::{estimates, manufactured, AuditReport, Error};

fn err(e: Error) -> PyErr {
    match e {
        Error::InvalidInput(_) | Error::EmptyBall | Error::EmptyRegion | Error::NonIntegrable { .. } | Error::EllipticityViolation { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_dict<'py>(py: Python<'py>, json: &str) -> PyResult<Bound<'py, PyDict>> {
    py.import("json")?.call_method1("loads", (json,))?.cast_into::<PyDict>().map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn report<'py>(py: Python<'py>, r: Result<AuditReport, Error>) -> PyResult<Bound<'py, PyDict>> {
    to_dict(py, &r.map_err(err)?.to_json())
}

fn region(lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, dim: usize) -> PyResult<Region> {
    match (lo, hi) {
        (Some(lo), Some(hi)) => Region::boxed(lo, hi).map_err(err),
        (None, None) => Ok(Region::whole(dim)),
        _ => Err(PyValueError::new_err("give both lo and hi or neither")),
    }
}

fn family(centers: Vec<Vec<f64>>, radii: Vec<f64>) -> PyResult<BallFamily> {
    BallFamily::new(centers, radii).map_err(err)
}

/// Weight on an interval or box, or on the whole space.
#[pyclass(name = "Weight", module = "wpar", frozen)]
struct PyWeight {
    inner: weights::Weight,
}

#[pymethods]
impl PyWeight {
    /// `|x - center|^alpha`
    #[staticmethod]
    #[pyo3(signature = (alpha, center, lo=None, hi=None))]
    fn power(alpha: f64, center: Vec<f64>, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>) -> PyResult<Self> {
        let d = region(lo, hi, center.len())?;
        Ok(Self { inner: weights::Weight::power(alpha, center, d).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (value, lo=None, hi=None, dim=1))]
    fn constant(value: f64, lo: Option<Vec<f64>>, hi: Option<Vec<f64>>, dim: usize) -> PyResult<Self> {
        let d = region(lo, hi, dim)?;
        Ok(Self { inner: weights::Weight::constant(value, d).map_err(err)? })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn eval(&self, x: Vec<f64>) -> f64 {
        self.inner.eval(&x)
    }

    /// Average of `w^p` over the ball clipped to the domain.
    #[pyo3(signature = (x0, r, p=1.0))]
    fn ball_average(&self, x0: Vec<f64>, r: f64, p: f64) -> PyResult<f64> {
        weights::ball_average(&self.inner, &x0, r, p).map_err(err)
    }

    fn aq(&self, q: f64, centers: Vec<Vec<f64>>, radii: Vec<f64>) -> PyResult<f64> {
        weights::aq_characteristic(&self.inner, q, &family(centers, radii)?).map_err(err)
    }

    fn beta_condition<'py>(&self, py: Python<'py>, m0: f64, centers: Vec<Vec<f64>>, radii: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
        let ctx = WeightContext::new(self.inner.dim(), m0).map_err(err)?;
        report(py, weights::check_beta_condition(&self.inner, &ctx, &family(centers, radii)?))
    }

    fn theta(&self, x0: Vec<f64>, r: f64) -> PyResult<f64> {
        oscillation::theta_beta_ms(&self.inner, &x0, r).map_err(err)
    }

    fn height(&self, x0: Vec<f64>, r: f64) -> PyResult<f64> {
        geometry::height(&self.inner, &x0, r).map_err(err)
    }

    fn height_inverse(&self, x0: Vec<f64>, s: f64) -> PyResult<f64> {
        geometry::height_inverse(&self.inner, &x0, s).map_err(err)
    }

    fn quasi_distance(&self, x: Vec<f64>, t: f64, x0: Vec<f64>, t0: f64) -> PyResult<f64> {
        geometry::quasi_distance(&self.inner, &SpaceTimePoint::new(x, t), &SpaceTimePoint::new(x0, t0)).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("Weight({:?})", self.inner.kind())
    }
}

/// Discrete solution on the `(x, t)` grid.
#[pyclass(name = "Solution", module = "wpar", frozen)]
struct PySolution {
    inner: wpar_core::field::SolutionField,
    beta: weights::Weight,
    a: CoefficientField,
    f: FaceField,
}

#[pymethods]
impl PySolution {
    #[getter]
    fn nodes(&self) -> usize {
        self.inner.grid.nodes()
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.grid.nt + 1
    }

    #[getter]
    fn x(&self) -> Vec<f64> {
        (0..self.inner.grid.nodes()).map(|i| self.inner.grid.x(i)).collect()
    }

    #[getter]
    fn t(&self) -> Vec<f64> {
        (0..=self.inner.grid.nt).map(|k| self.inner.grid.t(k)).collect()
    }

    /// Values level by level.
    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    fn get(&self, k: usize, i: usize) -> PyResult<f64> {
        if k > self.inner.grid.nt || i >= self.inner.grid.nodes() {
            return Err(PyValueError::new_err("index out of range"));
        }
        Ok(self.inner.get(k, i))
    }

    fn l2_error(&self) -> f64 {
        manufactured::l2_error(&self.inner)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn to_binary(&self) -> PyResult<Vec<u8>> {
        let mut v = Vec::new();
        self.inner.write_binary(&mut v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
        Ok(v)
    }

    fn energy_audit<'py>(&self, py: Python<'py>, x0: f64, t0: f64, r: f64, budget: f64) -> PyResult<Bound<'py, PyDict>> {
        let (i, o) = estimates::caccioppoli_pair(&self.beta, &SpaceTimePoint::new(vec![x0], t0), r).map_err(err)?;
        report(py, estimates::energy_audit(&self.inner, &self.beta, &self.f, &i, &o, budget))
    }

    fn apriori_ratio<'py>(&self, py: Python<'py>, p: f64, budget: f64) -> PyResult<Bound<'py, PyDict>> {
        let r = estimates::apriori_ratio(&self.inner, &self.beta, &self.a, &self.f, p, budget).map_err(err)?;
        to_dict(py, &wpar_core::report::canonical_json(&r.to_value()))
    }

    fn oscillation_gate<'py>(&self, py: Python<'py>, r0: f64, delta: f64, stride: usize) -> PyResult<Bound<'py, PyDict>> {
        let g = &self.inner.grid;
        let cfg = OscillationConfig::for_grid(g, r0, delta, stride).map_err(err)?;
        report(py, oscillation::oscillation_supremum(&self.a, g, &self.beta, &cfg, (g.x_lo, g.x_hi)))
    }

    /// Returns `(report, csv)` with columns `m,lhs_measure,rhs_bound,gamma1_fit`.
    #[pyo3(signature = (x0, t0, r, k=1.5, q0=0.2, m_max=6, delta_hat=0.1, lam=2.0))]
    #[allow(clippy::too_many_arguments)]
    fn levelset_decay<'py>(&self, py: Python<'py>, x0: f64, t0: f64, r: f64, k: f64, q0: f64, m_max: usize, delta_hat: f64, lam: f64) -> PyResult<(Bound<'py, PyDict>, String)> {
        let p = DecayParams { k, q0, m_max, delta_hat, lambda: lam, z0: SpaceTimePoint::new(vec![x0], t0), r };
        let (rep, table) = maximal::levelset_decay_audit(&self.inner, &self.f, &self.beta, &p, None).map_err(err)?;
        Ok((to_dict(py, &rep.to_json())?, table.to_csv()))
    }
}

/// Solve the manufactured problem for `β = |x - 1/2|^alpha` on `(0, 1)`.
#[pyfunction]
fn solve_manufactured(alpha: f64, nx: usize, t_end: f64) -> PyResult<PySolution> {
    let m = manufactured::solve(alpha, nx, t_end).map_err(err)?;
    Ok(PySolution { inner: m.u, beta: m.beta, a: m.a, f: m.f })
}

/// Observed L² orders over `levels` dyadic refinements.
#[pyfunction]
fn convergence_orders(alpha: f64, nx0: usize, levels: usize, t_end: f64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    manufactured::convergence_orders(alpha, nx0, levels, t_end).map_err(err)
}

/// Planar boundary chart `φ`.
#[pyclass(name = "BoundaryChart", module = "wpar", frozen)]
struct PyChart {
    inner: BoundaryChart,
}

#[pymethods]
impl PyChart {
    #[staticmethod]
    #[pyo3(signature = (delta, base=0.0))]
    fn affine(delta: f64, base: f64) -> PyResult<Self> {
        Ok(Self { inner: BoundaryChart::new(delta, ChartKind::Affine { base }).map_err(err)? })
    }

    #[staticmethod]
    fn cup(delta: f64, base: f64, width: f64) -> PyResult<Self> {
        Ok(Self { inner: BoundaryChart::new(delta, ChartKind::Cup { base, width }).map_err(err)? })
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }

    fn phi(&self, s: f64) -> f64 {
        self.inner.phi(s)
    }

    fn map(&self, x: [f64; 2]) -> [f64; 2] {
        flattening::phi_map(&self.inner, x)
    }

    fn inverse(&self, y: [f64; 2]) -> [f64; 2] {
        flattening::phi_inverse(&self.inner, y)
    }

    /// `∇Φ A ∇Φᵀ` for one row-major 2×2 matrix at tangential coordinate `s`.
    fn pushforward(&self, s: f64, a: [f64; 4], nu: f64) -> PyResult<Vec<f64>> {
        let f = CoefficientField::new(2, vec![vec![s, 0.0]], vec![0.0], a.to_vec(), nu).map_err(err)?;
        let (t, _) = flattening::pushforward_coefficients(&self.inner, &f, f64::INFINITY).map_err(err)?;
        Ok(t.matrix(0, 0).to_vec())
    }

    fn inclusion_audit<'py>(&self, py: Python<'py>, y0: [f64; 2], r: f64, samples: usize) -> PyResult<Bound<'py, PyDict>> {
        report(py, flattening::inclusion_audit(&self.inner, y0, r, samples))
    }
}

/// δ-sweep with the identity coefficient; returns `(csv, b_exponent, theta_exponent)`.
#[pyfunction]
#[pyo3(signature = (deltas, m0=2.0, cells=48, per_axis=5))]
fn flatten_sweep(deltas: Vec<f64>, m0: f64, cells: usize, per_axis: usize) -> PyResult<(String, f64, f64)> {
    let a = CoefficientField::new(2, vec![vec![0.0, 0.0]], vec![0.0], vec![1.0, 0.0, 0.0, 1.0], 0.5).map_err(err)?;
    let s = flattening::delta_sweep(&deltas, &a, m0, cells, per_axis).map_err(err)?;
    Ok((s.table.to_csv(), s.b_exponent, s.theta_exponent))
}

#[pymodule]
fn wpar(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyWeight>()?;
    m.add_class::<PySolution>()?;
    m.add_class::<PyChart>()?;
    m.add_function(wrap_pyfunction!(solve_manufactured, m)?)?;
    m.add_function(wrap_pyfunction!(convergence_orders, m)?)?;
    m.add_function(wrap_pyfunction!(flatten_sweep, m)?)?;
    Ok(())
}
