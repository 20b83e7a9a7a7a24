//! Adaptive Gauss–Kronrod (21-point) quadrature with helpers for integrable
//! endpoint singularities and infinite tails.

use crate::error::{Error, Result};

const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_059_5,
    0.865_063_366_688_984_510_732_096_688_423_5,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_114_9,
    0.562_757_134_668_604_683_339_000_099_272_7,
    0.433_395_394_129_247_190_799_265_943_165_8,
    0.294_392_862_701_460_198_131_126_603_103_9,
    0.148_874_338_981_631_210_884_826_001_129_7,
    0.0,
];

const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062_19,
    0.032_558_162_307_964_727_478_818_972_459_39,
    0.054_755_896_574_351_996_031_381_300_244_58,
    0.075_039_674_810_919_952_767_043_140_916_19,
    0.093_125_454_583_697_605_535_065_465_083_37,
    0.109_387_158_802_297_641_899_210_590_325_8,
    0.123_491_976_262_065_851_077_208_067_015_7,
    0.134_709_217_311_473_325_928_054_001_771_7,
    0.142_775_938_577_060_080_797_094_273_138_7,
    0.147_739_104_901_338_491_374_841_515_972_1,
    0.149_445_554_002_916_905_664_936_468_389_8,
];

// Gauss weights for the odd-indexed Kronrod nodes.
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893_33,
    0.149_451_349_150_580_593_145_776_339_657_7,
    0.219_086_362_515_982_043_995_534_934_228_2,
    0.269_266_719_309_996_355_091_226_921_569_5,
    0.295_524_224_714_752_870_173_892_994_651_3,
];

#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub rel: f64,
    pub abs: f64,
    pub max_intervals: usize,
}

impl Tolerance {
    pub fn relative(rel: f64) -> Self {
        Tolerance { rel, abs: 0.0, max_intervals: 4000 }
    }

    pub fn with_abs(self, abs: f64) -> Self {
        Tolerance { abs, ..self }
    }
}

impl Default for Tolerance {
    fn default() -> Self {
        Tolerance::relative(1e-8)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub evaluations: usize,
}

impl std::ops::Add for Integral {
    type Output = Integral;
    fn add(self, o: Integral) -> Integral {
        Integral {
            value: self.value + o.value,
            error: self.error + o.error,
            evaluations: self.evaluations + o.evaluations,
        }
    }
}

impl Integral {
    pub const ZERO: Integral = Integral { value: 0.0, error: 0.0, evaluations: 0 };
}

struct Panel {
    lo: f64,
    hi: f64,
    value: f64,
    error: f64,
}

fn rescale_error(err: f64, res_abs: f64, res_asc: f64) -> f64 {
    let mut scaled = err.abs();
    if res_asc != 0.0 && scaled != 0.0 {
        scaled = res_asc * (200.0 * scaled / res_asc).powf(1.5).min(1.0);
    }
    if res_abs > f64::MIN_POSITIVE / (50.0 * f64::EPSILON) {
        scaled = scaled.max(50.0 * f64::EPSILON * res_abs);
    }
    scaled
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> Panel {
    let center = 0.5 * (lo + hi);
    let half = 0.5 * (hi - lo);
    let f_center = f(center);
    let mut kronrod = f_center * WGK[10];
    let mut gauss = 0.0;
    let mut res_abs = kronrod.abs();
    let mut fv1 = [0.0; 10];
    let mut fv2 = [0.0; 10];
    for j in 0..10 {
        let x = half * XGK[j];
        let a = f(center - x);
        let b = f(center + x);
        fv1[j] = a;
        fv2[j] = b;
        kronrod += WGK[j] * (a + b);
        res_abs += WGK[j] * (a.abs() + b.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (a + b);
        }
    }
    let mean = 0.5 * kronrod;
    let mut res_asc = WGK[10] * (f_center - mean).abs();
    for j in 0..10 {
        res_asc += WGK[j] * ((fv1[j] - mean).abs() + (fv2[j] - mean).abs());
    }
    let value = kronrod * half;
    let error = rescale_error((kronrod - gauss) * half, res_abs * half.abs(), res_asc * half.abs());
    Panel { lo, hi, value, error }
}

/// Adaptive integration of `f` over the finite interval `[lo, hi]`.
///
/// Single 21-point Kronrod evaluation without error control.
pub(crate) fn kronrod21<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64) -> f64 {
    gauss_kronrod(f, lo, hi).value
}

/// The interval with the largest error estimate is bisected until the total
/// estimate meets the tolerance.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, lo: f64, hi: f64, tol: Tolerance) -> Result<Integral> {
    if !(lo.is_finite() && hi.is_finite()) {
        return Err(Error::Domain(format!("integration bounds must be finite, got [{lo}, {hi}]")));
    }
    if lo == hi {
        return Ok(Integral::ZERO);
    }
    let mut panels = vec![gauss_kronrod(f, lo, hi)];
    let mut evaluations = 21;
    loop {
        let value: f64 = panels.iter().map(|p| p.value).sum();
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= tol.abs.max(tol.rel * value.abs()) {
            return Ok(Integral { value, error, evaluations });
        }
        let worst = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .map(|(i, _)| i)
            .expect("at least one panel");
        let p = panels.swap_remove(worst);
        let mid = 0.5 * (p.lo + p.hi);
        if panels.len() + 2 > tol.max_intervals || mid <= p.lo || mid >= p.hi {
            return Err(Error::Quadrature { lo: p.lo, hi: p.hi, value, error });
        }
        panels.push(gauss_kronrod(f, p.lo, mid));
        panels.push(gauss_kronrod(f, mid, p.hi));
        evaluations += 42;
    }
}

/// Integrates `f` over `[lo, hi]` when `f(x) ~ (x - lo)^(-alpha)` near `lo`,
/// with `alpha < 1`, through the substitution `x = lo + (hi - lo) t^k`.
pub fn integrate_left_singular<F: Fn(f64) -> f64>(
    f: &F,
    lo: f64,
    hi: f64,
    alpha: f64,
    tol: Tolerance,
) -> Result<Integral> {
    if alpha >= 1.0 {
        return Err(Error::Domain(format!("endpoint exponent {alpha} is not integrable")));
    }
    let k = (2.0 / (1.0 - alpha)).ceil().max(1.0);
    let len = hi - lo;
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x = lo + len * t.powf(k);
        f(x) * k * len * t.powf(k - 1.0)
    };
    integrate(&g, 0.0, 1.0, tol)
}

/// Integrates `f` over `[lo, ∞)` with `lo > 0` when `f(x)` decays at least like
/// `x^(-beta)`, `beta > 1`, through the substitution `x = lo t^(-k)`.
pub fn integrate_tail<F: Fn(f64) -> f64>(f: &F, lo: f64, beta: f64, tol: Tolerance) -> Result<Integral> {
    if lo <= 0.0 {
        return Err(Error::Domain(format!("tail start must be positive, got {lo}")));
    }
    if beta <= 1.0 {
        return Err(Error::Domain(format!("tail exponent {beta} is not integrable")));
    }
    let k = (2.0 / (beta - 1.0)).ceil().max(1.0);
    let g = |t: f64| {
        if t <= 0.0 {
            return 0.0;
        }
        let x = lo * t.powf(-k);
        if !x.is_finite() {
            return 0.0;
        }
        f(x) * k * lo * t.powf(-k - 1.0)
    };
    integrate(&g, 0.0, 1.0, tol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(&|x: f64| x.powi(5) - 2.0 * x, 0.0, 2.0, Tolerance::relative(1e-13)).unwrap();
        assert!((r.value - (64.0 / 6.0 - 4.0)).abs() < 1e-13);
    }

    #[test]
    fn inverse_square_root_singularity() {
        let r = integrate_left_singular(&|x: f64| x.powf(-0.5), 0.0, 1.0, 0.5, Tolerance::relative(1e-12))
            .unwrap();
        assert!((r.value - 2.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn power_tail() {
        let r = integrate_tail(&|x: f64| x.powf(-1.5), 1.0, 1.5, Tolerance::relative(1e-12)).unwrap();
        assert!((r.value - 2.0).abs() < 1e-11, "{}", r.value);
    }

    #[test]
    fn exponential_tail() {
        let r = integrate_tail(&|x: f64| (-x).exp(), 0.5, 3.0, Tolerance::relative(1e-12)).unwrap();
        assert!((r.value - (-0.5f64).exp()).abs() < 1e-12, "{}", r.value);
    }

    #[test]
    fn kink_converges() {
        let r = integrate(&|x: f64| (x - 0.3).abs(), 0.0, 1.0, Tolerance::relative(1e-10)).unwrap();
        assert!((r.value - (0.045 + 0.245)).abs() < 1e-10);
    }

    #[test]
    fn nonintegrable_is_reported() {
        let tol = Tolerance { max_intervals: 60, ..Tolerance::relative(1e-10) };
        let r = integrate(&|x: f64| x.powf(-1.5), 0.0, 1.0, tol);
        assert!(matches!(r, Err(Error::Quadrature { .. })));
    }
}
