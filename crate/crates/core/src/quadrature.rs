//! Adaptive Gauss–Kronrod (7/15) integration.

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
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
// Gauss weights for the odd Kronrod abscissae (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

const MAX_DEPTH: u32 = 48;

fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

fn adapt<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, whole: f64, err: f64, tol: f64, depth: u32) -> f64 {
    if err <= tol || depth >= MAX_DEPTH || (b - a).abs() < 1e-15 {
        return whole;
    }
    let m = 0.5 * (a + b);
    let (left, el) = kronrod(f, a, m);
    let (right, er) = kronrod(f, m, b);
    adapt(f, a, m, left, el, 0.5 * tol, depth + 1) + adapt(f, m, b, right, er, 0.5 * tol, depth + 1)
}

/// Integrates `f` over `[a, b]` to absolute tolerance `tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (whole, err) = kronrod(&f, a, b);
    adapt(&f, a, b, whole, err, tol, 0)
}

/// Integrates piecewise over consecutive `knots`, splitting the tolerance
/// evenly. Use when the integrand has kinks at known points.
pub fn integrate_knots<F: Fn(f64) -> f64>(f: F, knots: &[f64], tol: f64) -> f64 {
    if knots.len() < 2 {
        return 0.0;
    }
    let per = tol / (knots.len() - 1) as f64;
    knots
        .windows(2)
        .map(|w| integrate(&f, w[0], w[1], per))
        .sum()
}

const GL4_NODES: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_3,
    0.339_981_043_584_856_3,
    0.861_136_311_594_052_6,
];
const GL4_WEIGHTS: [f64; 4] = [
    0.347_854_845_137_453_9,
    0.652_145_154_862_546_1,
    0.652_145_154_862_546_1,
    0.347_854_845_137_453_9,
];

/// Composite 4-point Gauss–Legendre rule on `panels` equal panels. Fixed
/// cost, for inner loops where adaptivity is too expensive.
pub fn gauss_legendre<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b || panels == 0 {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        for (x, w) in GL4_NODES.iter().zip(GL4_WEIGHTS) {
            total += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * total
}

/// Composite 2-point Gauss–Legendre rule (exact for cubics per panel).
pub fn gauss_legendre2<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    if a == b || panels == 0 {
        return 0.0;
    }
    let h = (b - a) / panels as f64;
    let off = 0.5 * h / 3f64.sqrt();
    let mut total = 0.0;
    for k in 0..panels {
        let mid = a + (k as f64 + 0.5) * h;
        total += f(mid - off) + f(mid + off);
    }
    0.5 * h * total
}

/// Bisection for a sign change of `f` on `[lo, hi]`; `f(lo)` and `f(hi)`
/// must have opposite signs (or one of them be zero).
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let mut flo = f(lo);
    if flo == 0.0 {
        return lo;
    }
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return mid;
        }
        if (fm < 0.0) == (flo < 0.0) {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_legendre_exact_for_cubics() {
        let v = gauss_legendre(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-14, "{v}");
        let v = gauss_legendre2(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 1);
        assert!((v - 3.75).abs() < 1e-14, "{v}");
        let e = gauss_legendre(f64::exp, 0.0, 1.0, 8);
        assert!((e - (1f64.exp() - 1.0)).abs() < 1e-13);
    }

    #[test]
    fn polynomials_are_exact() {
        let v = integrate(|x| x.powi(5) - 3.0 * x * x, 0.0, 2.0, 1e-12);
        assert!((v - (64.0 / 6.0 - 8.0)).abs() < 1e-12);
    }

    #[test]
    fn endpoint_singularity_converges() {
        // ∫_0^1 x^{-1/2} dx = 2
        let v = integrate(|x| if x > 0.0 { x.powf(-0.5) } else { 0.0 }, 0.0, 1.0, 1e-9);
        assert!((v - 2.0).abs() < 1e-6, "{v}");
    }

    #[test]
    fn knots_handle_kinks() {
        let v = integrate_knots(|x: f64| (x - 0.3).abs(), &[0.0, 0.3, 1.0], 1e-12);
        assert!((v - (0.045 + 0.245)).abs() < 1e-12);
    }

    #[test]
    fn bisect_finds_root() {
        let r = bisect(|x| x * x - 2.0, 0.0, 2.0, 1e-12);
        assert!((r - 2f64.sqrt()).abs() < 1e-11);
    }
}
