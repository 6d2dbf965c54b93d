//! Subcommand bodies. Each writes its files into the output directory and
//! returns a JSON summary plus an overall pass flag.

use crate::config::{Config, ForcingKind};
use crate::plot::{Chart, Series};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};
use std::path::Path;
use wpar_core::estimates::{apriori_ratio, backward, caccioppoli_pair, energy_audit, freeze_compare, poincare_audit, time_shift_sweep, Variant};
use wpar_core::field::{CoefficientField, FaceField, Grid, SolutionField};
use wpar_core::flattening::{delta_sweep, inclusion_audit, phi_inverse, phi_map, pushforward_coefficients, pushforward_weight_audit, BoundaryChart, ChartKind};
use wpar_core::geometry::{cylinder_relations_audit, height, psi, quasi_triangle_audit, QuasiMetricParams, SampleBox, SpaceTimePoint};
use wpar_core::manufactured::{self, SmoothFlux};
use wpar_core::maximal::{default_radii, levelset_decay_audit, vitali_select, weak_1_1_audit, CenteredCylinder, DecayParams, SpaceTimeField};
use wpar_core::oscillation::{oscillation_supremum, OscillationConfig};
use wpar_core::report::{canonical_json, num, AuditReport};
use wpar_core::solver::solve_ivbp;
use wpar_core::weights::{aq_characteristic, check_beta_condition, doubling_report, BallFamily, Region, Weight, WeightContext};
use wpar_core::Error;

/// Why a command stopped early.
#[derive(Debug)]
pub enum Failure {
    Config(String),
    Runtime(String),
    Io(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidInput(_) => Failure::Config(e.to_string()),
            _ => Failure::Runtime(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Io(e.to_string())
    }
}

pub struct Outcome {
    pub pass: bool,
    pub reports: Map<String, Value>,
}

impl Outcome {
    fn new() -> Self {
        Self { pass: true, reports: Map::new() }
    }

    fn add(&mut self, key: &str, rep: &AuditReport) {
        self.pass &= rep.pass();
        self.reports.insert(key.into(), rep.to_value());
    }

    /// Gate and precondition failures become failing entries; other errors propagate.
    fn guarded(&mut self, key: &str, r: wpar_core::Result<AuditReport>) -> Result<(), Failure> {
        match r {
            Ok(rep) => self.add(key, &rep),
            Err(e @ (Error::GateFailed(_) | Error::PreconditionFailed(_))) => {
                self.pass = false;
                self.reports.insert(key.into(), json!({ "pass": false, "error": e.to_string() }));
            }
            Err(e) => return Err(e.into()),
        }
        Ok(())
    }

    fn value(&mut self, key: &str, v: Value) {
        self.reports.insert(key.into(), v);
    }
}

pub struct Ctx<'a> {
    pub cfg: &'a Config,
    pub out: &'a Path,
    pub seed: u64,
}

impl Ctx<'_> {
    fn write(&self, name: &str, body: &str) -> Result<(), Failure> {
        std::fs::write(self.out.join(name), body).map_err(|e| Failure::Io(format!("{name}: {e}")))
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut r = ChaCha8Rng::seed_from_u64(self.seed);
        r.set_stream(stream);
        r
    }

    fn finish(&self, command: &str, o: &Outcome) -> Result<bool, Failure> {
        let doc = json!({
            "command": command,
            "config": self.cfg.name,
            "seed": self.seed,
            "pass": o.pass,
            "reports": Value::Object(o.reports.clone()),
        });
        self.write(&format!("{command}.json"), &canonical_json(&doc))?;
        Ok(o.pass)
    }
}

struct Problem {
    grid: Grid,
    beta: Weight,
    a: CoefficientField,
    f: FaceField,
    u: SolutionField,
    manufactured: bool,
}

fn problem(c: &Ctx) -> Result<Problem, Failure> {
    let cfg = c.cfg;
    let grid = manufactured::grid(cfg.grid.nx, cfg.grid.t_end)?;
    let beta = cfg.weight.build()?;
    let k = &cfg.coefficients;
    let a = CoefficientField::on_faces(&grid, k.nu, |x, _| k.base + k.amplitude * (k.frequency * std::f64::consts::PI * x).sin())?;
    let (f, init, manufactured) = match (cfg.forcing.kind, cfg.weight.manufactured_alpha()) {
        (ForcingKind::Manufactured, Some(alpha)) => {
            let f = FaceField::from_fn(&grid, |x, t| manufactured::flux(alpha, x, t));
            let init = (0..grid.nodes()).map(|i| manufactured::exact(grid.x(i), 0.0)).collect();
            (f, init, true)
        }
        (ForcingKind::Manufactured, None) => return Err(Failure::Config("manufactured forcing needs a compatible weight".into())),
        (ForcingKind::Smooth, _) => {
            let mut seed_rng = c.rng(1);
            let sf = SmoothFlux::seeded(seed_rng.random(), cfg.forcing.modes);
            (FaceField::from_fn(&grid, |x, t| sf.eval(x, t)), vec![0.0; grid.nodes()], false)
        }
    };
    let u = solve_ivbp(&beta, &a, &f, &grid, &init)?;
    Ok(Problem { grid, beta, a, f, u, manufactured: manufactured && k.amplitude == 0.0 && k.base == 1.0 })
}

fn unit_interval() -> Region {
    Region::interval(0.0, 1.0).expect("valid interval")
}

pub fn weights(c: &Ctx) -> Result<bool, Failure> {
    let beta = c.cfg.weight.build()?;
    let fam = BallFamily::default_for(&unit_interval(), 9)?;
    let ctx = WeightContext::new(1, c.cfg.m0)?;
    let mut o = Outcome::new();
    o.guarded("beta_condition", check_beta_condition(&beta, &ctx, &fam))?;
    o.guarded("doubling", doubling_report(&beta, 1.0, &fam, 0.5, &ctx))?;
    let mut aq = Map::new();
    for q in [1.0, 2.0, 3.0] {
        aq.insert(format!("q{q}"), num(aq_characteristic(&beta, q, &fam)?));
    }
    o.value("aq_characteristic", Value::Object(aq));
    let mut csv = String::from("x,beta\n");
    let mut pts = Vec::new();
    for i in 0..200 {
        let x = (i as f64 + 0.5) / 200.0;
        let b = beta.eval(&[x]);
        csv += &format!("{},{}\n", wpar_core::report::fmt_f64(x), wpar_core::report::fmt_f64(b));
        pts.push((x, b));
    }
    c.write("weight_profile.csv", &csv)?;
    c.write("weight_profile.svg", &Chart::new("weight profile", "x", "beta").with(Series::new("beta", pts)).to_svg())?;
    c.finish("weights", &o)
}

pub fn geometry(c: &Ctx) -> Result<bool, Failure> {
    let g = &c.cfg.geometry;
    let beta = c.cfg.weight.build()?;
    let centers = (0..g.centers).map(|i| vec![(i as f64 + 0.5) / g.centers as f64]).collect();
    let fam = BallFamily::new(centers, BallFamily::log_radii(1e-3, 0.5, g.radii))?;
    let params = QuasiMetricParams::estimate(&beta, &fam)?;
    let bx = SampleBox::new(vec![0.0], vec![1.0], 0.0, c.cfg.grid.t_end)?;
    let mut o = Outcome::new();
    o.value("params", json!({ "lambda": num(params.lambda), "zeta0": num(params.zeta0), "n2": num(params.n2) }));
    o.guarded("quasi_triangle", quasi_triangle_audit(&beta, &params, g.triples, c.seed, &bx))?;
    let z0 = SpaceTimePoint::new(vec![c.cfg.audit.center], c.cfg.grid.t_end);
    o.guarded("cylinder_relations", cylinder_relations_audit(&beta, &z0, c.cfg.audit.radius, 40))?;
    let mut csv = String::from("r,psi,height\n");
    let mut pts = Vec::new();
    for r in BallFamily::log_radii(1e-3, 1.0, 25) {
        let (p, h) = (psi(&beta, &z0.x, r)?, height(&beta, &z0.x, r)?);
        csv += &format!("{},{},{}\n", wpar_core::report::fmt_f64(r), wpar_core::report::fmt_f64(p), wpar_core::report::fmt_f64(h));
        pts.push((r, h));
    }
    c.write("heights.csv", &csv)?;
    let chart = Chart::new("cylinder height", "r", "h(r)").log_log().with(Series::new("h", pts.clone())).with(Series::new("r^2", pts.iter().map(|p| (p.0, p.0 * p.0)).collect()));
    c.write("heights.svg", &chart.to_svg())?;
    c.finish("geometry", &o)
}

pub fn solve(c: &Ctx) -> Result<bool, Failure> {
    let p = problem(c)?;
    let u = &p.u;
    c.write("solution.csv", &u.to_csv())?;
    let mut bin = Vec::new();
    u.write_binary(&mut bin)?;
    std::fs::write(c.out.join("solution.bin"), bin)?;
    let finite = u.values.iter().all(|v| v.is_finite());
    let mut o = Outcome::new();
    o.pass = finite;
    let g = &p.grid;
    let mut info = Map::new();
    info.insert("nodes".into(), json!(g.nodes()));
    info.insert("levels".into(), json!(g.nt + 1));
    info.insert("h".into(), num(g.h()));
    info.insert("tau".into(), num(g.tau));
    info.insert("u_max".into(), num(u.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))));
    if p.manufactured {
        info.insert("l2_error".into(), num(manufactured::l2_error(u)));
    }
    o.value("solution", Value::Object(info));
    let mut chart = Chart::new("solution profiles", "x", "u");
    for j in 0..=4 {
        let k = j * g.nt / 4;
        let pts = (0..g.nodes()).map(|i| (g.x(i), u.get(k, i))).collect();
        chart = chart.with(Series::new(format!("t = {:.4}", g.t(k)), pts));
    }
    c.write("solution.svg", &chart.to_svg())?;
    c.finish("solve", &o)
}

pub fn audit(c: &Ctx) -> Result<bool, Failure> {
    let p = problem(c)?;
    let (cfg, a) = (c.cfg, &c.cfg.audit);
    let mut o = Outcome::new();
    let osc = OscillationConfig::for_grid(&p.grid, cfg.oscillation.r0, cfg.oscillation.delta, cfg.oscillation.stride)?;
    o.guarded("oscillation", oscillation_supremum(&p.a, &p.grid, &p.beta, &osc, (p.grid.x_lo, p.grid.x_hi)))?;
    let z0 = SpaceTimePoint::new(vec![a.center], p.grid.t_end());
    let (inner, outer) = caccioppoli_pair(&p.beta, &z0, a.radius)?;
    o.guarded("energy", energy_audit(&p.u, &p.beta, &p.f, &inner, &outer, a.energy_budget))?;
    let cyl = backward(&p.beta, &z0, a.radius)?;
    o.guarded("poincare", poincare_audit(&p.u, &p.beta, &p.f, &cyl, Variant::Interior, a.poincare_budget))?;
    let mut ratios = Map::new();
    for q in &a.apriori_p {
        let r = apriori_ratio(&p.u, &p.beta, &p.a, &p.f, *q, a.apriori_budget)?;
        o.pass &= r.pass();
        ratios.insert(format!("p{q}"), r.to_value());
    }
    o.value("apriori", Value::Object(ratios));
    o.guarded("freeze_compare", freeze_compare(&p.u, &p.beta, &p.a, &p.f, &z0, a.freeze_radius, a.freeze_refine))?;
    let phi = |x: f64| (std::f64::consts::PI * x).sin().powi(2);
    let (table, slope, ok) = time_shift_sweep(&p.u, &p.beta, &p.a, &p.f, phi, &a.time_shifts, a.time_shift_budget)?;
    o.pass &= ok;
    o.value("time_shift", json!({ "pass": ok, "slope": num(slope) }));
    c.write("time_shift.csv", &table.to_csv())?;
    c.finish("audit", &o)
}

pub fn levelset(c: &Ctx) -> Result<bool, Failure> {
    let p = problem(c)?;
    let l = &c.cfg.levelset;
    let mut o = Outcome::new();
    let t_end = p.grid.t_end();
    let mut rng = c.rng(2);
    let mut weak = Vec::new();
    for _ in 0..l.weak_fields {
        let v: Vec<f64> = (0..64 * 64).map(|_| if rng.random::<f64>() < 0.05 { rng.random_range(0.0..10.0) } else { 0.0 }).collect();
        let g = SpaceTimeField::new(0.0, 1.0, 64, 0.0, t_end, 64, v)?;
        let rep = weak_1_1_audit(&g, &p.beta, &[0.01, 0.1, 1.0, 5.0], &default_radii(&g), l.weak_budget)?;
        o.pass &= rep.pass();
        weak.push(rep.to_value());
    }
    o.value("weak_type", Value::Array(weak));
    let mut rng = c.rng(3);
    let mut covers = Vec::new();
    for _ in 0..l.vitali_families {
        let fam = (0..l.vitali_size)
            .map(|_| CenteredCylinder::new(&p.beta, rng.random_range(0.05..0.95), rng.random_range(0.0..t_end), 10f64.powf(rng.random_range(-2.0..-1.0))))
            .collect::<wpar_core::Result<Vec<_>>>()?;
        let cov = vitali_select(fam);
        let five = cov.five_cover(&p.beta, 6)?;
        let ok = cov.pairwise_disjoint() && cov.dominated() && five;
        o.pass &= ok;
        covers.push(json!({ "selected": cov.chosen().count(), "disjoint": cov.pairwise_disjoint(), "five_cover": five, "pass": ok }));
    }
    o.value("vitali", Value::Array(covers));
    let dp = DecayParams { k: l.k, q0: l.q0, m_max: l.m_max, delta_hat: l.delta_hat, lambda: l.lambda, z0: SpaceTimePoint::new(vec![c.cfg.audit.center], t_end), r: l.r };
    let (rep, table) = levelset_decay_audit(&p.u, &p.f, &p.beta, &dp, None)?;
    o.add("decay", &rep);
    c.write("decay.csv", &table.to_csv())?;
    let m = table.column("m").unwrap_or_default();
    let zip = |col: &str| m.iter().zip(table.column(col).unwrap_or_default()).map(|(a, b)| (*a, b)).collect::<Vec<_>>();
    let mut chart = Chart::new("level-set decay", "m", "measure").with(Series::new("lhs_measure", zip("lhs_measure"))).with(Series::new("rhs_bound", zip("rhs_bound")));
    chart.log_y = true;
    c.write("decay.svg", &chart.to_svg())?;
    c.finish("levelset", &o)
}

pub fn flatten(c: &Ctx) -> Result<bool, Failure> {
    let f = &c.cfg.flatten;
    let mut o = Outcome::new();
    let chart = BoundaryChart::new(f.chart_delta, ChartKind::Cup { base: f.chart_base, width: f.chart_width })?;
    o.guarded("inclusion", inclusion_audit(&chart, [f.chart_base, 0.0], 0.4, 41))?;
    o.guarded("inclusion_steep", inclusion_audit(&BoundaryChart::affine(0.9)?, [0.0, 0.0], 0.4, 41))?;
    let mut rng = c.rng(4);
    let trip = (0..10_000)
        .map(|_| {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let y = phi_inverse(&chart, phi_map(&chart, x));
            ((y[0] - x[0]).abs()).max((y[1] - x[1]).abs() / (1.0 + x[1].abs()))
        })
        .fold(0.0f64, f64::max);
    let trip_ok = trip <= 4.0 * f64::EPSILON;
    o.pass &= trip_ok;
    o.value("round_trip", json!({ "max_error": num(trip), "pass": trip_ok }));
    let pts: Vec<Vec<f64>> = (0..81).map(|k| vec![-1.0 + 0.25 * (k % 9) as f64, -1.0 + 0.25 * (k / 9) as f64]).collect();
    let vals: Vec<f64> = pts.iter().flat_map(|p| [1.2 + 0.3 * (std::f64::consts::PI * p[0]).sin(), 0.2, 0.2, 0.9]).collect();
    let a = CoefficientField::new(2, pts, vec![0.0], vals, 0.5)?;
    let (_, crep) = pushforward_coefficients(&chart, &a, 10.0)?;
    o.add("coefficients", &crep);
    let domain = Region::boxed(vec![-1.0, -1.0], vec![1.0, 1.0])?;
    let fam = BallFamily::new(BallFamily::default_for(&domain, f.per_axis)?.centers().to_vec(), BallFamily::log_radii(0.1, 1.0, 6))?;
    let beta = Weight::power(f.alpha, vec![0.0, 0.0], Region::whole(2))?;
    let ctx = WeightContext::new(2, f.m0)?;
    o.guarded("weight", pushforward_weight_audit(&chart, &beta, &ctx, &fam, &domain, f.cells))?;
    let sweep = delta_sweep(&f.deltas, &a, f.m0, f.cells, f.per_axis)?;
    let ok = sweep.b_exponent >= 0.9 && sweep.theta_exponent >= 1.8 && sweep.aq_pass;
    o.pass &= ok;
    o.value("delta_sweep", json!({ "b_exponent": num(sweep.b_exponent), "theta_exponent": num(sweep.theta_exponent), "aq_pass": sweep.aq_pass, "pass": ok }));
    c.write("flatten_sweep.csv", &sweep.table.to_csv())?;
    let d = sweep.table.column("delta").unwrap_or_default();
    let zip = |col: &str| d.iter().zip(sweep.table.column(col).unwrap_or_default()).map(|(a, b)| (*a, b)).collect::<Vec<_>>();
    let plot = Chart::new("flattening delta sweep", "delta", "size").log_log().with(Series::new("|B|", zip("b_norm"))).with(Series::new("theta", zip("theta_beta_tilde")));
    c.write("flatten_sweep.svg", &plot.to_svg())?;
    c.finish("flatten", &o)
}
