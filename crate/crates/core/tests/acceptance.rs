//! End-to-end acceptance checks. Each test prints one `PASS`/`FAIL` line.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::{Duration, Instant};
use wpar_core::estimates::*;
use wpar_core::field::{CoefficientField, FaceField};
use wpar_core::flattening::*;
use wpar_core::geometry::*;
use wpar_core::manufactured::{self, SmoothFlux};
use wpar_core::maximal::*;
use wpar_core::oscillation::{oscillation_supremum, OscillationConfig};
use wpar_core::solver::solve_ivbp;
use wpar_core::weights::*;

fn report(id: u32, name: &str, ok: bool, took: Duration, limit: Duration, detail: String) {
    let ok = ok && took <= limit;
    println!("criterion {id:>2} [{name}]: {} ({:.2?} of {:.0?}) {detail}", if ok { "PASS" } else { "FAIL" }, took, limit);
    assert!(ok, "criterion {id} failed: {detail}");
}

fn line(alpha: f64) -> Weight {
    Weight::power(alpha, vec![0.0], Region::whole(1)).unwrap()
}

#[test]
fn criterion_01_weights() {
    let t = Instant::now();
    let d = Region::interval(-1.0, 1.0).unwrap();
    let one = Weight::constant(1.0, d.clone()).unwrap();
    let fam = BallFamily::default_for(&d, 9).unwrap();
    let id: Vec<f64> = [1.0, 2.0, 3.0].iter().map(|&q| aq_characteristic(&one, q, &fam).unwrap()).collect();
    let sqrt = Weight::power(0.5, vec![0.0], d).unwrap();
    let centered = BallFamily::centered(vec![0.0], BallFamily::log_radii(0.01, 1.0, 12)).unwrap();
    let a2 = aq_characteristic(&sqrt, 2.0, &centered).unwrap();
    let ok = id.iter().all(|v| (v - 1.0).abs() <= 1e-12) && (a2 - 4.0 / 3.0).abs() <= 1e-6;
    report(1, "weights", ok, t.elapsed(), Duration::from_secs(1), format!("A_q(1)={id:?} A_2(|x|^0.5)={a2}"));
}

#[test]
fn criterion_02_duality() {
    let t = Instant::now();
    let d = Region::interval(-1.0, 1.0).unwrap();
    let fam = BallFamily::default_for(&d, 9).unwrap();
    let ctx = WeightContext::new(1, 100.0).unwrap();
    let gaps: Vec<f64> = [0.1, 0.5, -0.3]
        .iter()
        .map(|&a| {
            let w = Weight::power(a, vec![0.0], d.clone()).unwrap();
            check_beta_condition(&w, &ctx, &fam).unwrap().row("duality_identity").unwrap().constant
        })
        .collect();
    let ok = gaps.iter().all(|g| *g <= 1e-6);
    report(2, "duality", ok, t.elapsed(), Duration::from_secs(1), format!("relative gaps {gaps:?}"));
}

#[test]
fn criterion_03_geometry() {
    let t = Instant::now();
    let one = Weight::constant(1.0, Region::whole(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        let z = SpaceTimePoint::new(vec![rng.random_range(-1.0..1.0)], rng.random_range(-1.0..1.0));
        let z0 = SpaceTimePoint::new(vec![rng.random_range(-1.0..1.0)], rng.random_range(-1.0..1.0));
        let want = (z.x[0] - z0.x[0]).abs().max((z.t - z0.t).abs().sqrt());
        worst = worst.max((quasi_distance(&one, &z, &z0).unwrap() - want).abs());
    }
    // closed form r = (2s)^{1/3} belongs to β = |x|; β = |x|^{1/2} gives r = (1.5 s)^{2/5}
    let mut inv_err = 0.0f64;
    for s in [1e-3, 0.1, 1.0, 4.0, 50.0] {
        let r1 = height_inverse(&line(1.0), &[0.0], s).unwrap();
        let r2 = height_inverse(&line(0.5), &[0.0], s).unwrap();
        inv_err = inv_err.max((r1 - (2.0 * s).powf(1.0 / 3.0)).abs()).max((r2 - (1.5 * s).powf(0.4)).abs());
    }
    let bx = SampleBox::new(vec![-1.0], vec![1.0], -1.0, 1.0).unwrap();
    let fam = BallFamily::new(
        (0..9).map(|i| vec![-1.0 + 0.25 * i as f64]).collect(),
        BallFamily::log_radii(1e-3, 1.0, 16),
    )
    .unwrap();
    let mut lambdas = Vec::new();
    let mut tri_ok = true;
    for w in [one.clone(), line(0.5), line(-0.3)] {
        let p = QuasiMetricParams::estimate(&w, &fam).unwrap();
        let rep = quasi_triangle_audit(&w, &p, 100_000, 11, &bx).unwrap();
        tri_ok &= rep.pass();
        lambdas.push(p.lambda);
    }
    let ok = worst <= 1e-12 && inv_err <= 1e-8 && tri_ok;
    report(3, "geometry", ok, t.elapsed(), Duration::from_secs(10), format!("dist err {worst:e}, inverse err {inv_err:e}, Λ {lambdas:?}"));
}

#[test]
fn criterion_04_convergence() {
    let t = Instant::now();
    let (_, o0) = manufactured::convergence_orders(0.0, 16, 4, 0.2).unwrap();
    let (_, o2) = manufactured::convergence_orders(0.2, 16, 4, 0.2).unwrap();
    let ok = o0.iter().all(|o| *o >= 1.9) && o2.iter().all(|o| *o >= 1.0);
    report(4, "solver convergence", ok, t.elapsed(), Duration::from_secs(60), format!("orders β≡1 {o0:?}, β=|x-1/2|^0.2 {o2:?}"));
}

#[test]
fn criterion_05_energy() {
    let t = Instant::now();
    let z0 = SpaceTimePoint::new(vec![0.5], 0.2);
    let mut spreads = Vec::new();
    let mut homog = 0.0f64;
    for alpha in [0.0, 0.2] {
        let mut ns = Vec::new();
        for nx in [16, 32, 64] {
            let m = manufactured::solve(alpha, nx, 0.2).unwrap();
            let (i, o) = caccioppoli_pair(&m.beta, &z0, 0.2).unwrap();
            let n = energy_audit(&m.u, &m.beta, &m.f, &i, &o, 100.0).unwrap().rows[0].constant;
            let s = energy_audit(&m.u.scaled(-7.5), &m.beta, &m.f.scaled(-7.5), &i, &o, 100.0).unwrap().rows[0].constant;
            homog = homog.max((n - s).abs() / n);
            ns.push(n);
        }
        spreads.push(refinement_spread(&ns));
    }
    let ok = spreads.iter().all(|s| *s < 0.1) && homog <= 1e-10;
    report(5, "energy", ok, t.elapsed(), Duration::from_secs(60), format!("spreads {spreads:?}, scaling gap {homog:e}"));
}

#[test]
fn criterion_06_apriori() {
    let t = Instant::now();
    let sf = SmoothFlux::seeded(7, 4);
    let mut detail = String::new();
    let mut ok = true;
    for alpha in [0.0, 0.2] {
        // the gate only conditions p > 2; stability is required either way
        let g = manufactured::grid(16, 0.2).unwrap();
        let a = CoefficientField::on_faces(&g, 0.5, |_, _| 1.0).unwrap();
        let cfg = OscillationConfig::for_grid(&g, 0.5, 0.1, 2).unwrap();
        let gate = oscillation_supremum(&a, &g, &manufactured::weight(alpha).unwrap(), &cfg, (0.0, 1.0)).unwrap();
        detail += &format!("α={alpha} gate {} ({:.3}); ", if gate.pass() { "pass" } else { "fail" }, gate.rows[2].lhs);
        for p in [2.0, 4.0] {
            let mut ratios = Vec::new();
            for nx in [16, 32, 64] {
                let g = manufactured::grid(nx, 0.2).unwrap();
                let beta = manufactured::weight(alpha).unwrap();
                let a = CoefficientField::on_faces(&g, 0.5, |_, _| 1.0).unwrap();
                let f = FaceField::from_fn(&g, |x, t| sf.eval(x, t));
                let u = solve_ivbp(&beta, &a, &f, &g, &vec![0.0; g.nodes()]).unwrap();
                let r = apriori_ratio(&u, &beta, &a, &f, p, 100.0).unwrap();
                ok &= r.pass() && r.ratio.is_finite();
                ratios.push(r.ratio);
            }
            let s = refinement_spread(&ratios);
            ok &= s < 0.1;
            detail += &format!("p={p} spread {s:.3e}; ");
        }
    }
    report(6, "a priori ratio", ok, t.elapsed(), Duration::from_secs(300), detail);
}

#[test]
fn criterion_07_freeze_sweep() {
    let t = Instant::now();
    let nx = 32;
    let g = manufactured::grid(nx, 0.2).unwrap();
    let beta = manufactured::weight(0.0).unwrap();
    let f = FaceField::zeros(&g);
    let init: Vec<f64> = (0..g.nodes()).map(|i| (std::f64::consts::PI * g.x(i)).sin()).collect();
    let z0 = SpaceTimePoint::new(vec![0.5], 0.2);
    let gap = |amp: f64| {
        let a = CoefficientField::on_faces(&g, 0.5, |x, _| 1.0 + amp * (8.0 * std::f64::consts::PI * x).sin()).unwrap();
        let u = solve_ivbp(&beta, &a, &f, &g, &init).unwrap();
        freeze_compare(&u, &beta, &a, &f, &z0, 0.4, 4).unwrap().notes["epsilon"]
    };
    let eps: Vec<f64> = [0.4, 0.2, 0.1, 0.05].iter().map(|&a| gap(a)).collect();
    let baseline = gap(0.0);
    let limit = gap(0.05 / 64.0);
    let ok = eps.windows(2).all(|w| w[1] < w[0]) && limit <= 2.0 * baseline && baseline <= 2.0 * limit;
    report(7, "freeze-compare sweep", ok, t.elapsed(), Duration::from_secs(300), format!("ε {eps:?}, a→0 {limit:e}, baseline {baseline:e}"));
}

#[test]
fn criterion_08_maximal() {
    let t = Instant::now();
    let m = manufactured::solve(0.0, 64, 0.2).unwrap();
    let mut weak = Vec::new();
    let mut ok = true;
    for seed in 0..5u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let v: Vec<f64> = (0..64 * 64).map(|_| if rng.random::<f64>() < 0.05 { rng.random_range(0.0..10.0) } else { 0.0 }).collect();
        let g = SpaceTimeField::new(0.0, 1.0, 64, 0.0, 0.1, 64, v).unwrap();
        let r = weak_1_1_audit(&g, &m.beta, &[0.01, 0.1, 1.0, 5.0], &default_radii(&g), 500.0).unwrap();
        ok &= r.pass();
        weak.push(r.rows[0].constant);
    }
    let b = line(0.5);
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    for _ in 0..5 {
        let fam: Vec<_> = (0..100)
            .map(|_| CenteredCylinder::new(&b, rng.random_range(-1.0..1.0), rng.random_range(-1.0..0.0), 10f64.powf(rng.random_range(-2.0..-0.5))).unwrap())
            .collect();
        let cov = vitali_select(fam);
        ok &= cov.pairwise_disjoint() && cov.dominated() && cov.five_cover(&b, 6).unwrap();
    }
    let p = DecayParams { k: 1.5, q0: 0.2, m_max: 6, delta_hat: 0.1, lambda: 2.0, z0: SpaceTimePoint::new(vec![0.5], 0.2), r: 0.1 };
    let (rep, table) = levelset_decay_audit(&m.u, &m.f, &m.beta, &p, None).unwrap();
    let gamma1 = rep.row("gamma1").unwrap().constant;
    ok &= rep.pass() && gamma1.is_finite() && table.rows.len() == p.m_max;
    report(8, "maximal and level sets", ok, t.elapsed(), Duration::from_secs(60), format!("weak constants {weak:?}, γ1 {gamma1}"));
}

#[test]
fn criterion_09_flattening() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let charts = [BoundaryChart::affine(0.7).unwrap(), BoundaryChart::new(0.9, ChartKind::Cup { base: 0.2, width: 0.3 }).unwrap()];
    let mut trip = 0.0f64;
    for c in &charts {
        for _ in 0..10_000 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let y = phi_inverse(c, phi_map(c, x));
            trip = trip.max((y[0] - x[0]).abs()).max((y[1] - x[1]).abs() / (1.0 + x[1].abs()));
        }
    }
    let mut b_ok = true;
    for d in [0.05, 0.1, 0.2] {
        let a = CoefficientField::new(2, vec![vec![0.1, 0.2]], vec![0.0], vec![1.0, 0.0, 0.0, 1.0], 0.5).unwrap();
        let (at, _) = pushforward_coefficients(&BoundaryChart::affine(d).unwrap(), &a, 2.0).unwrap();
        let b: Vec<f64> = at.matrix(0, 0).iter().zip([1.0, 0.0, 0.0, 1.0]).map(|(x, i)| x - i).collect();
        b_ok &= b.iter().zip([0.0, -d, -d, d * d]).all(|(x, w)| (x - w).abs() <= 1e-15);
    }
    let pts: Vec<Vec<f64>> = (0..9).map(|k| vec![-1.0 + 0.25 * k as f64, 0.0]).collect();
    let vals = pts.iter().flat_map(|p| [1.2 + 0.3 * p[0], 0.2, 0.1, 0.9]).collect();
    let a = CoefficientField::new(2, pts, vec![0.0], vals, 0.5).unwrap();
    let sweep = delta_sweep(&[0.05, 0.1, 0.2], &a, 2.0, 64, 5).unwrap();
    let domain = Region::boxed(vec![-1.0, -1.0], vec![1.0, 1.0]).unwrap();
    let fam = BallFamily::new(BallFamily::default_for(&domain, 5).unwrap().centers().to_vec(), BallFamily::log_radii(0.1, 1.0, 6)).unwrap();
    let ctx = WeightContext::new(2, 2.0).unwrap();
    let shifted = BoundaryChart::new(0.2, ChartKind::Cup { base: 0.3, width: 0.4 }).unwrap();
    let beta = Weight::power(0.1, vec![0.0, 0.0], Region::whole(2)).unwrap();
    let wrep = pushforward_weight_audit(&shifted, &beta, &ctx, &fam, &domain, 64).unwrap();
    let ok = trip <= 4.0 * f64::EPSILON && b_ok && sweep.b_exponent >= 0.9 && sweep.theta_exponent >= 1.8 && sweep.aq_pass && wrep.pass();
    report(
        9,
        "flattening",
        ok,
        t.elapsed(),
        Duration::from_secs(30),
        format!("round trip {trip:e}, B exponent {:.3}, Θ exponent {:.3}, inflated A_q {:.4}", sweep.b_exponent, sweep.theta_exponent, wrep.row("pushforward_aq").unwrap().constant),
    );
}

#[test]
fn criterion_10_determinism() {
    let t = Instant::now();
    let run = || {
        let w = line(0.5);
        let fam = BallFamily::new((0..5).map(|i| vec![-1.0 + 0.5 * i as f64]).collect(), BallFamily::log_radii(1e-2, 1.0, 8)).unwrap();
        let p = QuasiMetricParams::estimate(&w, &fam).unwrap();
        let bx = SampleBox::new(vec![-1.0], vec![1.0], -1.0, 1.0).unwrap();
        let mut out = quasi_triangle_audit(&w, &p, 20_000, 42, &bx).unwrap().to_json();
        let m = manufactured::solve(0.2, 32, 0.2).unwrap();
        let dp = DecayParams { k: 1.5, q0: 0.2, m_max: 4, delta_hat: 0.1, lambda: 2.0, z0: SpaceTimePoint::new(vec![0.5], 0.2), r: 0.1 };
        let (rep, table) = levelset_decay_audit(&m.u, &m.f, &m.beta, &dp, None).unwrap();
        out += &rep.to_json();
        out += &table.to_csv();
        out += &m.u.to_csv();
        out
    };
    let (a, b) = (run(), run());
    report(10, "determinism", a == b, t.elapsed(), Duration::from_secs(60), format!("{} bytes compared", a.len()));
}
