//! Independent quadrature oracles for the acceptance run.

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] =
    [0.129_484_966_168_869_7, 0.279_705_391_489_276_7, 0.381_830_050_505_118_9, 0.417_959_183_673_469_4];

/// Gauss–Kronrod 7/15 panel: estimate and error bound.
fn gk15(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let d = h * XGK[j];
        let s = f(c - d) + f(c + d);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: u32) -> f64 {
    let (v, e) = gk15(f, a, b);
    if e <= tol || depth == 0 {
        return v;
    }
    let m = 0.5 * (a + b);
    adapt(f, a, m, 0.5 * tol, depth - 1) + adapt(f, m, b, 0.5 * tol, depth - 1)
}

/// Adaptive quadrature over `[a, b]` split at `breaks`.
pub fn integrate(f: impl Fn(f64) -> f64, a: f64, b: f64, breaks: &[f64], tol: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let mut pts = vec![a];
    pts.extend(breaks.iter().copied().filter(|&x| x > a && x < b));
    pts.push(b);
    pts.sort_by(f64::total_cmp);
    pts.windows(2).map(|w| adapt(&f, w[0], w[1], tol, 40)).sum()
}

pub fn gauss(z: f64, s: f64) -> f64 {
    (-z * z / (2.0 * s)).exp() / (2.0 * std::f64::consts::PI * s).sqrt()
}

/// Solution of `rho_t = rho_xx/2 + v rho_x` on `x > 0`, `rho(0) = 0`, for
/// constant `v`, by the image method after removing the drift.
pub fn drift_image_solution(rho0: &dyn Fn(f64) -> f64, support: f64, v: f64, x: f64, t: f64) -> f64 {
    if t == 0.0 {
        return rho0(x);
    }
    let r = 12.0 * t.sqrt();
    let w = |s: f64| (v * s).exp() * rho0(s);
    let direct = integrate(|s| gauss(x - s, t) * w(s), (x - r).max(0.0), (x + r).min(support), &[], 1e-11);
    let image = integrate(|s| gauss(x + s, t) * w(s), 0.0, (r - x).min(support), &[], 1e-11);
    (-v * x - 0.5 * v * v * t).exp() * (direct - image)
}
