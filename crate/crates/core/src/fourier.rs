//! Discrete Fourier machinery on an equidistant period grid.
//!
//! A periodic signal truncated after the `H`-th harmonic is represented by
//! complex coefficients `c_k`, `k = -H..=H`, so that
//! `x(t) = sum_k c_k exp(i k w t)`. Transforms between coefficients and
//! time samples are the explicit truncated-DFT matrices evaluated by direct
//! summation; spectral differentiation multiplies each coefficient by
//! `i k w`. Real signals carry Hermitian symmetry `c_{-k} = conj(c_k)`,
//! equivalent to the cosine/sine amplitudes `a_k`, `b_k` through
//! `c_{-k} = 0.5 (a_k + i b_k)` for `k >= 1` and `c_0 = a_0`.

use crate::error::{Error, Result};
use num_complex::Complex64;
use std::f64::consts::PI;

/// Equidistant phase grid over one period together with the transform tables.
#[derive(Debug, Clone)]
pub struct FourierGrid {
    h: usize,
    n_t: usize,
    n_d: usize,
    t_nodes: Vec<f64>,
    /// `twiddle[j * (2H+1) + (k+H)] = exp(i k t_j)`
    twiddle: Vec<Complex64>,
}

impl FourierGrid {
    /// Builds a grid with `n_t` samples per period for harmonic order `h`
    /// and `n_d` states. Requires `n_t >= 2h + 2` (anti-aliasing margin for
    /// the linear part).
    pub fn new(h: usize, n_t: usize, n_d: usize) -> Result<Self> {
        if n_t < 2 * h + 2 {
            return Err(Error::GridTooCoarse { n_t, h });
        }
        if n_d == 0 {
            return Err(Error::InvalidParameter(
                "state dimension must be at least 1".into(),
            ));
        }
        let t_nodes: Vec<f64> = (0..n_t).map(|j| 2.0 * PI * j as f64 / n_t as f64).collect();
        let width = 2 * h + 1;
        let mut twiddle = vec![Complex64::new(0.0, 0.0); n_t * width];
        for (j, &t) in t_nodes.iter().enumerate() {
            for k in -(h as i64)..=(h as i64) {
                let angle = k as f64 * t;
                twiddle[j * width + (k + h as i64) as usize] = Complex64::from_polar(1.0, angle);
            }
        }
        Ok(Self {
            h,
            n_t,
            n_d,
            t_nodes,
            twiddle,
        })
    }

    /// Grid with the default oversampling for a polynomial nonlinearity of
    /// degree `d_nl`: the next power of two at or above
    /// `max(4H + 2, 2 H d_nl + 2)`, so products generated by the
    /// nonlinearity up to harmonic `d_nl * H` do not alias back into the
    /// retained band.
    pub fn with_default_sampling(h: usize, n_d: usize, d_nl: usize) -> Result<Self> {
        Self::new(h, default_time_samples(h, d_nl), n_d)
    }

    pub fn harmonic_order(&self) -> usize {
        self.h
    }

    pub fn time_samples(&self) -> usize {
        self.n_t
    }

    pub fn state_dim(&self) -> usize {
        self.n_d
    }

    /// Normalized phases `t_j = 2 pi j / N_t`.
    pub fn nodes(&self) -> &[f64] {
        &self.t_nodes
    }

    /// Number of retained coefficients per state, `2H + 1`.
    pub fn coeff_count(&self) -> usize {
        2 * self.h + 1
    }

    #[inline]
    fn tw(&self, j: usize, k: i64) -> Complex64 {
        self.twiddle[j * self.coeff_count() + (k + self.h as i64) as usize]
    }
}

/// Default anti-aliasing sample count, see [`FourierGrid::with_default_sampling`].
pub fn default_time_samples(h: usize, d_nl: usize) -> usize {
    let needed = (4 * h + 2).max(2 * h * d_nl.max(1) + 2);
    needed.next_power_of_two()
}

/// Truncated Fourier coefficients of an `n_d`-state signal.
///
/// Stored in the complex view; the cosine/sine view is a conversion layer.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicCoefficients {
    h: usize,
    n_d: usize,
    /// `data[c * (2H+1) + (k+H)]`
    data: Vec<Complex64>,
}

impl HarmonicCoefficients {
    pub fn zeros(h: usize, n_d: usize) -> Self {
        Self {
            h,
            n_d,
            data: vec![Complex64::new(0.0, 0.0); n_d * (2 * h + 1)],
        }
    }

    pub fn from_complex(h: usize, n_d: usize, data: Vec<Complex64>) -> Result<Self> {
        let expected = n_d * (2 * h + 1);
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "HarmonicCoefficients::from_complex",
                expected,
                actual: data.len(),
            });
        }
        Ok(Self { h, n_d, data })
    }

    pub fn harmonic_order(&self) -> usize {
        self.h
    }

    pub fn state_dim(&self) -> usize {
        self.n_d
    }

    #[inline]
    fn idx(&self, state: usize, k: i64) -> usize {
        debug_assert!(state < self.n_d && k.unsigned_abs() as usize <= self.h);
        state * (2 * self.h + 1) + (k + self.h as i64) as usize
    }

    #[inline]
    pub fn get(&self, state: usize, k: i64) -> Complex64 {
        self.data[self.idx(state, k)]
    }

    #[inline]
    pub fn set(&mut self, state: usize, k: i64, value: Complex64) {
        let i = self.idx(state, k);
        self.data[i] = value;
    }

    /// Largest deviation from Hermitian symmetry `c_{-k} = conj(c_k)`.
    pub fn hermitian_deviation(&self) -> f64 {
        let mut dev: f64 = 0.0;
        for c in 0..self.n_d {
            dev = dev.max(self.get(c, 0).im.abs());
            for k in 1..=self.h as i64 {
                dev = dev.max((self.get(c, -k) - self.get(c, k).conj()).norm());
            }
        }
        dev
    }

    /// Packs the Hermitian part into the real layout
    /// `[a_0, a_1, b_1, ..., a_H, b_H]` per state, states concatenated.
    pub fn to_real_layout(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_d * (2 * self.h + 1));
        for c in 0..self.n_d {
            out.push(self.get(c, 0).re);
            for k in 1..=self.h as i64 {
                let pos = self.get(c, k);
                out.push(2.0 * pos.re); // a_k
                out.push(-2.0 * pos.im); // b_k
            }
        }
        out
    }

    /// Inverse of [`Self::to_real_layout`]; the result is Hermitian by
    /// construction.
    pub fn from_real_layout(h: usize, n_d: usize, u: &[f64]) -> Result<Self> {
        let expected = n_d * (2 * h + 1);
        if u.len() != expected {
            return Err(Error::DimensionMismatch {
                context: "HarmonicCoefficients::from_real_layout",
                expected,
                actual: u.len(),
            });
        }
        let mut coeffs = Self::zeros(h, n_d);
        for c in 0..n_d {
            let block = &u[c * (2 * h + 1)..(c + 1) * (2 * h + 1)];
            coeffs.set(c, 0, Complex64::new(block[0], 0.0));
            for k in 1..=h as i64 {
                let a = block[(2 * k - 1) as usize];
                let b = block[(2 * k) as usize];
                coeffs.set(c, -k, 0.5 * Complex64::new(a, b));
                coeffs.set(c, k, 0.5 * Complex64::new(a, -b));
            }
        }
        Ok(coeffs)
    }

    /// Cosine amplitudes `a_0..a_H` and sine amplitudes `b_1..b_H` per state.
    pub fn cosine_sine(&self) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
        let mut a = vec![vec![0.0; self.h + 1]; self.n_d];
        let mut b = vec![vec![0.0; self.h]; self.n_d];
        for c in 0..self.n_d {
            a[c][0] = self.get(c, 0).re;
            for k in 1..=self.h {
                let pos = self.get(c, k as i64);
                a[c][k] = 2.0 * pos.re;
                b[c][k - 1] = -2.0 * pos.im;
            }
        }
        (a, b)
    }
}

/// Trapezoidal projection of time samples onto the retained harmonics:
/// `c_l = (1/N_t) sum_j x(t_j) exp(-i l t_j)`.
///
/// `samples` is time-major: `samples[j * n_d + c]`.
pub fn forward_transform(samples: &[f64], grid: &FourierGrid) -> Result<HarmonicCoefficients> {
    let expected = grid.n_t * grid.n_d;
    if samples.len() != expected {
        return Err(Error::DimensionMismatch {
            context: "forward_transform samples",
            expected,
            actual: samples.len(),
        });
    }
    let mut coeffs = HarmonicCoefficients::zeros(grid.h, grid.n_d);
    let scale = 1.0 / grid.n_t as f64;
    for c in 0..grid.n_d {
        for k in 0..=grid.h as i64 {
            let mut acc = Complex64::new(0.0, 0.0);
            for j in 0..grid.n_t {
                acc += samples[j * grid.n_d + c] * grid.tw(j, k).conj();
            }
            acc *= scale;
            coeffs.set(c, k, acc);
            if k > 0 {
                coeffs.set(c, -k, acc.conj());
            }
        }
    }
    Ok(coeffs)
}

/// Evaluates the truncated series at every grid phase and returns the real
/// samples (time-major). Errors if the coefficients are not Hermitian, since
/// a real signal is requested.
pub fn inverse_transform(coeffs: &HarmonicCoefficients, grid: &FourierGrid) -> Result<Vec<f64>> {
    check_shape(coeffs, grid)?;
    let dev = coeffs.hermitian_deviation();
    let scale = coeffs
        .data
        .iter()
        .fold(0.0f64, |m, c| m.max(c.norm()))
        .max(1.0);
    if dev > 1e-9 * scale {
        return Err(Error::NotHermitian { deviation: dev });
    }
    Ok(inverse_transform_unchecked(coeffs, grid))
}

/// Same evaluation as [`inverse_transform`] without the symmetry check; used
/// on coefficients that are Hermitian by construction.
pub(crate) fn inverse_transform_unchecked(
    coeffs: &HarmonicCoefficients,
    grid: &FourierGrid,
) -> Vec<f64> {
    let mut out = vec![0.0; grid.n_t * grid.n_d];
    for c in 0..grid.n_d {
        let dc = coeffs.get(c, 0).re;
        for j in 0..grid.n_t {
            let mut v = dc;
            for k in 1..=grid.h as i64 {
                v += 2.0 * (coeffs.get(c, k) * grid.tw(j, k)).re;
            }
            out[j * grid.n_d + c] = v;
        }
    }
    out
}

/// Spectral differentiation: coefficient `c_k` becomes `i k omega c_k`.
/// Applying it twice yields second-derivative coefficients.
pub fn differentiate(coeffs: &HarmonicCoefficients, omega: f64) -> HarmonicCoefficients {
    let mut out = coeffs.clone();
    for c in 0..coeffs.n_d {
        for k in -(coeffs.h as i64)..=(coeffs.h as i64) {
            let factor = Complex64::new(0.0, k as f64 * omega);
            out.set(c, k, factor * coeffs.get(c, k));
        }
    }
    out
}

/// Dense evaluation of the truncated series at arbitrary times (not
/// restricted to grid nodes). Returns real values, time-major.
pub fn evaluate_series(coeffs: &HarmonicCoefficients, omega: f64, times: &[f64]) -> Vec<f64> {
    let n_d = coeffs.n_d;
    let mut out = vec![0.0; times.len() * n_d];
    for (i, &t) in times.iter().enumerate() {
        for c in 0..n_d {
            let mut v = Complex64::new(0.0, 0.0);
            for k in -(coeffs.h as i64)..=(coeffs.h as i64) {
                v += coeffs.get(c, k) * Complex64::from_polar(1.0, k as f64 * omega * t);
            }
            out[i * n_d + c] = v.re;
        }
    }
    out
}

fn check_shape(coeffs: &HarmonicCoefficients, grid: &FourierGrid) -> Result<()> {
    if coeffs.h != grid.h || coeffs.n_d != grid.n_d {
        return Err(Error::DimensionMismatch {
            context: "coefficients built for a different grid",
            expected: grid.n_d * (2 * grid.h + 1),
            actual: coeffs.n_d * (2 * coeffs.h + 1),
        });
    }
    Ok(())
}
