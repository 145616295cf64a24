//! Globally adaptive Gauss-Kronrod (7/15) quadrature.
//!
//! The integrand may be vector valued (`[f64; N]`); every component shares
//! the same subdivision and the interval with the worst tolerance-normalized
//! error is bisected next. Error estimates use the QUADPACK rescaling of
//! |Kronrod − Gauss|.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

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

// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Tolerances and work limit for the adaptive integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-6,
            abs_tol: 1e-12,
            max_subdivisions: 500,
        }
    }
}

impl QuadConfig {
    pub fn new(rel_tol: f64, abs_tol: f64, max_subdivisions: usize) -> Result<Self> {
        let cfg = Self {
            rel_tol,
            abs_tol,
            max_subdivisions,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol >= 1e-12) || !self.rel_tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quad.rel_tol must be >= 1e-12 (got {})",
                self.rel_tol
            )));
        }
        if !(self.abs_tol >= 0.0) || !self.abs_tol.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "quad.abs_tol must be >= 0 (got {})",
                self.abs_tol
            )));
        }
        if self.max_subdivisions < 10 {
            return Err(Error::InvalidParameter(format!(
                "quad.max_subdivisions must be >= 10 (got {})",
                self.max_subdivisions
            )));
        }
        Ok(())
    }

    /// Same limits with a tighter relative tolerance.
    pub fn tightened(&self, factor: f64) -> Self {
        Self {
            rel_tol: (self.rel_tol * factor).max(1e-12),
            abs_tol: self.abs_tol * factor,
            ..*self
        }
    }
}

/// Integral value with its estimated absolute error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub err_est: f64,
}

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    err: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority.total_cmp(&other.priority) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        // ties broken on position so the order of bisection never depends on
        // heap internals
        self.priority
            .total_cmp(&other.priority)
            .then_with(|| other.a.total_cmp(&self.a))
    }
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

fn gk15<const N: usize, F>(f: &mut F, a: f64, b: f64) -> Result<([f64; N], [f64; N])>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut fv = [[0.0; N]; 15];
    let mut eval = |x: f64| -> Result<[f64; N]> {
        let v = f(x)?;
        if v.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "integrand is not finite at x = {x:e}"
            )));
        }
        Ok(v)
    };
    fv[7] = eval(center)?;
    for j in 0..7 {
        let dx = half * XGK[j];
        fv[j] = eval(center - dx)?;
        fv[14 - j] = eval(center + dx)?;
    }

    let mut value = [0.0; N];
    let mut err = [0.0; N];
    for c in 0..N {
        let mut kron = WGK[7] * fv[7][c];
        let mut gauss = WG[3] * fv[7][c];
        let mut res_abs = kron.abs();
        for j in 0..7 {
            let pair = fv[j][c] + fv[14 - j][c];
            kron += WGK[j] * pair;
            res_abs += WGK[j] * (fv[j][c].abs() + fv[14 - j][c].abs());
            if j % 2 == 1 {
                gauss += WG[j / 2] * pair;
            }
        }
        let mean = 0.5 * kron;
        let mut res_asc = WGK[7] * (fv[7][c] - mean).abs();
        for j in 0..7 {
            res_asc += WGK[j] * ((fv[j][c] - mean).abs() + (fv[14 - j][c] - mean).abs());
        }
        value[c] = kron * half;
        err[c] = rescale_error(
            (kron - gauss) * half,
            res_abs * half.abs(),
            res_asc * half.abs(),
        );
    }
    Ok((value, err))
}

fn tolerance(cfg: &QuadConfig, value: f64) -> f64 {
    cfg.abs_tol.max(cfg.rel_tol * value.abs())
}

/// Vector-valued adaptive integration over consecutive `breakpoints`
/// (at least two, strictly increasing). Each component must satisfy
/// |error| ≤ max(abs_tol, rel_tol·|value|).
pub fn integrate_vec<const N: usize, F>(
    mut f: F,
    breakpoints: &[f64],
    cfg: &QuadConfig,
) -> Result<[Estimate; N]>
where
    F: FnMut(f64) -> Result<[f64; N]>,
{
    if breakpoints.len() < 2 || breakpoints.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::InvalidParameter(format!(
            "integration limits must be strictly increasing (got {breakpoints:?})"
        )));
    }
    let mut total = [0.0; N];
    let mut total_err = [0.0; N];
    let mut initial = Vec::with_capacity(breakpoints.len() - 1);
    for w in breakpoints.windows(2) {
        let (value, err) = gk15(&mut f, w[0], w[1])?;
        for c in 0..N {
            total[c] += value[c];
            total_err[c] += err[c];
        }
        initial.push((w[0], w[1], value, err));
    }

    let priority = |err: &[f64; N], total: &[f64; N]| -> f64 {
        (0..N)
            .map(|c| err[c] / tolerance(cfg, total[c]).max(f64::MIN_POSITIVE))
            .fold(0.0, f64::max)
    };
    let mut heap: BinaryHeap<Segment<N>> = initial
        .into_iter()
        .map(|(a, b, value, err)| Segment {
            a,
            b,
            value,
            err,
            priority: priority(&err, &total),
        })
        .collect();

    let converged =
        |total: &[f64; N], err: &[f64; N]| (0..N).all(|c| err[c] <= tolerance(cfg, total[c]));

    let mut subdivisions = 0;
    while !converged(&total, &total_err) {
        if subdivisions >= cfg.max_subdivisions {
            return Err(Error::Quadrature {
                subdivisions,
                value: total[0],
                err_est: total_err[0],
            });
        }
        let worst = heap.pop().expect("at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if !(worst.a < mid && mid < worst.b) {
            return Err(Error::Quadrature {
                subdivisions,
                value: total[0],
                err_est: total_err[0],
            });
        }
        let (lv, le) = gk15(&mut f, worst.a, mid)?;
        let (rv, re) = gk15(&mut f, mid, worst.b)?;
        for c in 0..N {
            total[c] += lv[c] + rv[c] - worst.value[c];
            total_err[c] += le[c] + re[c] - worst.err[c];
        }
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            err: le,
            priority: priority(&le, &total),
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            err: re,
            priority: priority(&re, &total),
        });
        subdivisions += 1;
    }

    // re-sum from the segments to avoid drift from the running updates
    let mut value = [0.0; N];
    let mut err = [0.0; N];
    let mut segments: Vec<_> = heap.into_vec();
    segments.sort_by(|x, y| x.a.total_cmp(&y.a));
    for s in &segments {
        for c in 0..N {
            value[c] += s.value[c];
            err[c] += s.err[c];
        }
    }
    Ok(std::array::from_fn(|c| Estimate {
        value: value[c],
        err_est: err[c],
    }))
}

/// Adaptive integration of a fallible scalar integrand over `breakpoints`.
pub fn integrate<F>(mut f: F, breakpoints: &[f64], cfg: &QuadConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> Result<f64>,
{
    let [e] = integrate_vec(|x| f(x).map(|v| [v]), breakpoints, cfg)?;
    Ok(e)
}

/// ∫_a^b f(x) dx.
pub fn quad_finite<F>(mut f: F, a: f64, b: f64, cfg: &QuadConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate(|x| Ok(f(x)), &[a, b], cfg)
}

/// Maps t ∈ (0, 1) to x = lower + t/(1 − t) and returns (x, dx/dt).
#[inline]
pub fn semi_infinite_map(lower: f64, t: f64) -> (f64, f64) {
    let u = 1.0 - t;
    (lower + t / u, 1.0 / (u * u))
}

/// Inverse of [`semi_infinite_map`].
#[inline]
pub fn semi_infinite_unmap(lower: f64, x: f64) -> f64 {
    let d = x - lower;
    d / (1.0 + d)
}

// Initial split of the mapped interval; x = 1 sits at t = 1/2.
const SEMI_INFINITE_BREAKS: [f64; 5] = [0.0, 0.25, 0.5, 0.75, 1.0];

/// ∫_0^∞ f(x) dx through the substitution x = t/(1 − t).
pub fn quad_semi_infinite<F>(mut f: F, cfg: &QuadConfig) -> Result<Estimate>
where
    F: FnMut(f64) -> f64,
{
    integrate(
        |t| {
            let (x, jac) = semi_infinite_map(0.0, t);
            Ok(f(x) * jac)
        },
        &SEMI_INFINITE_BREAKS,
        cfg,
    )
}
