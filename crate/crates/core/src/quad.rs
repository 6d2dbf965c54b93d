//! Fixed quadrature rules used throughout the crate.

use std::f64::consts::PI;
use std::sync::OnceLock;

/// Gauss-Legendre nodes and weights on [-1, 1] with `n` points.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let m = n.div_ceil(2);
    for i in 0..m {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(n, x);
        dp = if d != 0.0 { d } else { dp };
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = -x;
        nodes[n - 1 - i] = x;
        weights[i] = w;
        weights[n - 1 - i] = w;
    }
    (nodes, weights)
}

fn legendre(n: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 2..=n {
        let p2 = ((2 * k - 1) as f64 * x * p1 - (k - 1) as f64 * p0) / k as f64;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

fn gl16() -> &'static (Vec<f64>, Vec<f64>) {
    static RULE: OnceLock<(Vec<f64>, Vec<f64>)> = OnceLock::new();
    RULE.get_or_init(|| gauss_legendre(16))
}

/// 16-point Gauss-Legendre on [a, b].
pub fn gl16_interval(a: f64, b: f64, f: &mut impl FnMut(f64) -> f64) -> f64 {
    let (x, w) = gl16();
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    let mut s = 0.0;
    for k in 0..x.len() {
        s += w[k] * f(mid + half * x[k]);
    }
    s * half
}

/// Composite 16-point Gauss-Legendre with `panels` equal panels.
pub fn composite_gl(a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
    let h = (b - a) / panels as f64;
    (0..panels)
        .map(|k| gl16_interval(a + k as f64 * h, a + (k + 1) as f64 * h, &mut f))
        .sum()
}

struct TanhSinh {
    // (offset from left end / length, offset from right end / length, weight / length)
    nodes: Vec<(f64, f64, f64)>,
}

fn tanh_sinh_rule() -> &'static TanhSinh {
    static RULE: OnceLock<TanhSinh> = OnceLock::new();
    RULE.get_or_init(|| {
        let h = 1.0 / 32.0;
        let mut nodes = Vec::new();
        let kmax = (3.3 / h) as i64;
        for k in -kmax..=kmax {
            let t = k as f64 * h;
            let u = 0.5 * PI * t.sinh();
            let from_left = 1.0 / (1.0 + (-2.0 * u).exp());
            let from_right = 1.0 / (1.0 + (2.0 * u).exp());
            let c = u.cosh();
            let w = h * 0.5 * 0.5 * PI * t.cosh() / (c * c);
            if w > 0.0 && from_left > 0.0 && from_right > 0.0 {
                nodes.push((from_left, from_right, w));
            }
        }
        TanhSinh { nodes }
    })
}

/// Double-exponential quadrature on [a, b]; robust to algebraic endpoint singularities.
pub fn tanh_sinh(a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
    let len = b - a;
    if len <= 0.0 {
        return 0.0;
    }
    let mut s = 0.0;
    for &(l, r, w) in &tanh_sinh_rule().nodes {
        let x = if l < r { a + len * l } else { b - len * r };
        s += w * f(x);
    }
    s * len
}

/// ∫_a^b |x - c|^e f(x) dx for e > -1, with geometric grading toward `c`.
pub fn singular_power_integral(a: f64, b: f64, c: f64, e: f64, f: &impl Fn(f64) -> f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut total = 0.0;
    if a < c {
        let hi = b.min(c);
        total += one_sided(c - hi, c - a, e, &|y| f(c - y));
    }
    if b > c {
        let lo = a.max(c);
        total += one_sided(lo - c, b - c, e, &|y| f(c + y));
    }
    total
}

// ∫_{y0}^{y1} y^e g(y) dy with 0 <= y0 < y1
fn one_sided(y0: f64, y1: f64, e: f64, g: &impl Fn(f64) -> f64) -> f64 {
    let mut integrand = |y: f64| y.powf(e) * g(y);
    if e == 0.0 {
        return composite_gl(y0, y1, 4, g);
    }
    if y0 > 0.5 * y1 {
        return composite_gl(y0, y1, 2, &mut integrand);
    }
    let mut s = 0.0;
    let mut hi = y1;
    let mut levels = 0;
    while hi > y0 && levels < 48 {
        let lo = (0.5 * hi).max(y0);
        s += gl16_interval(lo, hi, &mut integrand);
        hi = lo;
        levels += 1;
    }
    if hi > y0 {
        // innermost panel [y0, hi]: substitute v = y^(1+e)/(1+e)
        let k = 1.0 + e;
        let v0 = y0.powf(k) / k;
        let v1 = hi.powf(k) / k;
        s += gl16_interval(v0, v1, &mut |v: f64| g((k * v).powf(1.0 / k)));
    }
    s
}
