//! Bessel functions of order 0 and 1, Hankel functions of the first kind and
//! the 2-D Helmholtz fundamental solution.
//!
//! Three regimes are used for real arguments:
//!
//! * `x <= SERIES_MAX`: ascending power series (with the logarithmic series
//!   for `Y`).
//! * `SERIES_MAX < x <= ASYMPTOTIC_MIN`: Miller backward recurrence for
//!   `J_n`, normalised by `J_0 + 2 sum J_2k = 1`, and Neumann series for
//!   `Y_0`, `Y_1` built from the same sequence.
//! * `x > ASYMPTOTIC_MIN`: Hankel asymptotic expansion, summed until the
//!   terms stop decreasing.

use num_complex::Complex64;
use thiserror::Error;

pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Upper end of the ascending-series regime.
pub const SERIES_MAX: f64 = 2.0;
/// Lower end of the asymptotic regime.
pub const ASYMPTOTIC_MIN: f64 = 25.0;
/// Largest argument accepted before reporting overflow.
pub const MAX_ARGUMENT: f64 = 1.0e8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpecialError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("argument {0} beyond supported range")]
    Overflow(f64),
    #[error("coincident points: |x - y| = {0:e} below cutoff")]
    Coincident(f64),
}

pub type Result<T> = std::result::Result<T, SpecialError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BesselKind {
    J,
    Y,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NormalSide {
    /// Derivative with respect to the source point `y`.
    AtY,
    /// Derivative with respect to the target point `x`.
    AtX,
}

/// `J_0, J_1, Y_0, Y_1` at a common argument.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BesselPair {
    pub j0: f64,
    pub j1: f64,
    pub y0: f64,
    pub y1: f64,
}

impl BesselPair {
    pub fn h0(&self) -> Complex64 {
        Complex64::new(self.j0, self.y0)
    }

    pub fn h1(&self) -> Complex64 {
        Complex64::new(self.j1, self.y1)
    }
}

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() {
        return Err(SpecialError::Domain("NaN argument".into()));
    }
    if x > MAX_ARGUMENT {
        return Err(SpecialError::Overflow(x));
    }
    Ok(())
}

/// `J_0(x)` and `J_1(x)` for `x >= 0`.
pub fn bessel_j01(x: f64) -> Result<(f64, f64)> {
    check_arg(x)?;
    if x < 0.0 {
        return Err(SpecialError::Domain(format!("J requires x >= 0, got {x}")));
    }
    if x == 0.0 {
        return Ok((1.0, 0.0));
    }
    let p = bessel_jy01(x)?;
    Ok((p.j0, p.j1))
}

/// All four functions `J_0, J_1, Y_0, Y_1` at `x > 0`.
pub fn bessel_jy01(x: f64) -> Result<BesselPair> {
    check_arg(x)?;
    if x <= 0.0 {
        return Err(SpecialError::Domain(format!("Y requires x > 0, got {x}")));
    }
    let p = if x <= SERIES_MAX {
        series(x)
    } else if x <= ASYMPTOTIC_MIN {
        miller(x)
    } else {
        asymptotic(x)
    };
    if !(p.j0.is_finite() && p.j1.is_finite() && p.y0.is_finite() && p.y1.is_finite()) {
        return Err(SpecialError::Overflow(x));
    }
    Ok(p)
}

/// `J_order(x)` or `Y_order(x)` for `order` in {0, 1}.
pub fn bessel(kind: BesselKind, order: u8, x: f64) -> Result<f64> {
    if order > 1 {
        return Err(SpecialError::Domain(format!("order {order} not supported")));
    }
    match kind {
        BesselKind::J => {
            let (j0, j1) = bessel_j01(x)?;
            Ok(if order == 0 { j0 } else { j1 })
        }
        BesselKind::Y => {
            let p = bessel_jy01(x)?;
            Ok(if order == 0 { p.y0 } else { p.y1 })
        }
    }
}

/// `H^(1)_order(x) = J_order(x) + i Y_order(x)` for `x > 0`.
pub fn hankel1(order: u8, x: f64) -> Result<Complex64> {
    if order > 1 {
        return Err(SpecialError::Domain(format!("order {order} not supported")));
    }
    let p = bessel_jy01(x)?;
    Ok(if order == 0 { p.h0() } else { p.h1() })
}

fn series(x: f64) -> BesselPair {
    let h = 0.5 * x;
    let z = -h * h;
    let lg = h.ln() + EULER_GAMMA;
    // term_m = z^m / (m!)^2 for J0 and h z^m / (m! (m+1)!) for J1.
    let mut t0 = 1.0;
    let mut t1 = h;
    let mut j0 = t0;
    let mut j1 = t1;
    let mut harm = 0.0;
    let mut y0_tail = 0.0;
    // psi(m+1) + psi(m+2) = 2 H_m + 1/(m+1) - 2 gamma
    let mut y1_tail = (1.0 - 2.0 * EULER_GAMMA) * t1;
    for m in 1..60 {
        let mf = m as f64;
        t0 *= z / (mf * mf);
        t1 *= z / (mf * (mf + 1.0));
        harm += 1.0 / mf;
        j0 += t0;
        j1 += t1;
        y0_tail -= harm * t0;
        y1_tail += (2.0 * harm + 1.0 / (mf + 1.0) - 2.0 * EULER_GAMMA) * t1;
        if t0.abs() < 1e-18 && t1.abs() < 1e-18 {
            break;
        }
    }
    let two_pi = 2.0 / std::f64::consts::PI;
    let y0 = two_pi * (lg * j0 + y0_tail);
    let y1 = -two_pi / x + two_pi * h.ln() * j1 - y1_tail / std::f64::consts::PI;
    BesselPair { j0, j1, y0, y1 }
}

fn miller(x: f64) -> BesselPair {
    let mut n_start = (1.3 * x + 40.0) as usize;
    if n_start % 2 == 1 {
        n_start += 1;
    }
    let two_over_x = 2.0 / x;
    // f_{n+1}, f_n with f_{N+1} = 0
    let mut f_next = 0.0;
    let mut f = 1.0e-30;
    // norm = f_0 + 2 sum f_2k ; s0 = sum (-1)^k f_2k / k ; s1 = sum (-1)^k (f_{2k-1} - f_{2k+1}) / k
    let mut norm = 0.0;
    let mut s0 = 0.0;
    let mut s1 = 0.0;
    let mut f1 = 0.0;
    let mut n = n_start;
    // values at indices n+1 and n when visiting index n
    loop {
        if n % 2 == 0 && n > 0 {
            let k = (n / 2) as f64;
            let sign = if (n / 2) % 2 == 0 { 1.0 } else { -1.0 };
            norm += 2.0 * f;
            s0 += sign * f / k;
            // f_{2k+1} contribution; f_{2k-1} added when index 2k-1 is visited
            s1 -= sign * f_next / k;
        }
        if n % 2 == 1 {
            let k = ((n + 1) / 2) as f64;
            let sign = if ((n + 1) / 2) % 2 == 0 { 1.0 } else { -1.0 };
            s1 += sign * f / k;
        }
        if n == 1 {
            f1 = f;
        }
        if n == 0 {
            norm += f;
            break;
        }
        let f_prev = (n as f64) * two_over_x * f - f_next;
        f_next = f;
        f = f_prev;
        n -= 1;
        if f.abs() > 1e250 {
            f *= 1e-250;
            f_next *= 1e-250;
            norm *= 1e-250;
            s0 *= 1e-250;
            s1 *= 1e-250;
            f1 *= 1e-250;
        }
    }
    let j0 = f / norm;
    let j1 = f1 / norm;
    let two_pi = 2.0 / std::f64::consts::PI;
    let lg = (0.5 * x).ln() + EULER_GAMMA;
    let y0 = two_pi * lg * j0 - 2.0 * two_pi * s0 / norm;
    let y1 = two_pi * (lg * j1 - j0 / x) + two_pi * s1 / norm;
    BesselPair { j0, j1, y0, y1 }
}

/// Hankel expansion coefficients summed into `(P, Q)` for order `nu`.
fn hankel_pq(nu: f64, x: f64) -> (f64, f64) {
    let mu = 4.0 * nu * nu;
    let mut p = 1.0;
    let mut q = 0.0;
    let mut term = 1.0;
    let mut last = f64::INFINITY;
    for k in 1..200 {
        let kf = k as f64;
        let odd = 2.0 * kf - 1.0;
        term *= (mu - odd * odd) / (kf * 8.0 * x);
        let mag = term.abs();
        if mag > last || mag < 1e-18 {
            break;
        }
        last = mag;
        // a_k / x^k enters P with sign (-1)^{k/2} for even k, Q with (-1)^{(k-1)/2} for odd k
        match k % 4 {
            0 => p += term,
            1 => q += term,
            2 => p -= term,
            _ => q -= term,
        }
    }
    (p, q)
}

fn asymptotic(x: f64) -> BesselPair {
    let (s, c) = x.sin_cos();
    let r = std::f64::consts::FRAC_1_SQRT_2;
    let amp = (2.0 / (std::f64::consts::PI * x)).sqrt();
    // order 0: omega = x - pi/4
    let (c0, s0) = ((c + s) * r, (s - c) * r);
    // order 1: omega = x - 3 pi/4
    let (c1, s1) = ((s - c) * r, -(s + c) * r);
    let (p0, q0) = hankel_pq(0.0, x);
    let (p1, q1) = hankel_pq(1.0, x);
    BesselPair {
        j0: amp * (p0 * c0 - q0 * s0),
        y0: amp * (p0 * s0 + q0 * c0),
        j1: amp * (p1 * c1 - q1 * s1),
        y1: amp * (p1 * s1 + q1 * c1),
    }
}

/// Relative cutoff below which kernel evaluation is refused.
pub fn coincidence_cutoff(x: [f64; 2]) -> f64 {
    1e-14 * (1.0 + x[0].hypot(x[1]))
}

fn separation(x: [f64; 2], y: [f64; 2]) -> Result<([f64; 2], f64)> {
    let d = [x[0] - y[0], x[1] - y[1]];
    let r = d[0].hypot(d[1]);
    if r < coincidence_cutoff(x) {
        return Err(SpecialError::Coincident(r));
    }
    Ok((d, r))
}

/// `Phi_k(x, y) = (i/4) H^(1)_0(k |x - y|)`.
pub fn fundamental_solution(k: f64, x: [f64; 2], y: [f64; 2]) -> Result<Complex64> {
    if k <= 0.0 {
        return Err(SpecialError::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let (_, r) = separation(x, y)?;
    Ok(Complex64::new(0.0, 0.25) * hankel1(0, k * r)?)
}

/// Normal derivative of `Phi_k(x, y)` in direction `n`.
///
/// `AtX` differentiates in the target: `-(ik/4) H_1(kr) n.(x-y)/r`.
/// `AtY` differentiates in the source: `+(ik/4) H_1(kr) n.(x-y)/r`.
pub fn fundamental_solution_normal_grad(
    k: f64,
    x: [f64; 2],
    y: [f64; 2],
    n: [f64; 2],
    side: NormalSide,
) -> Result<Complex64> {
    if k <= 0.0 {
        return Err(SpecialError::Domain(format!("wavenumber must be positive, got {k}")));
    }
    let nn = n[0].hypot(n[1]);
    if (nn - 1.0).abs() > 1e-10 {
        return Err(SpecialError::Domain(format!("normal must be unit length, |n| = {nn}")));
    }
    let (d, r) = separation(x, y)?;
    let proj = (n[0] * d[0] + n[1] * d[1]) / r;
    let sign = match side {
        NormalSide::AtX => -1.0,
        NormalSide::AtY => 1.0,
    };
    Ok(Complex64::new(0.0, sign * 0.25 * k * proj) * hankel1(1, k * r)?)
}

/// Gradient of `Phi_k(., y)` at `x`: `-(ik/4) H_1(kr) (x-y)/r`.
pub fn fundamental_solution_grad(k: f64, x: [f64; 2], y: [f64; 2]) -> Result<[Complex64; 2]> {
    let (d, r) = separation(x, y)?;
    let c = Complex64::new(0.0, -0.25 * k) * hankel1(1, k * r)? / r;
    Ok([c * d[0], c * d[1]])
}

/// A number stored as `mantissa * 2^exponent`, used where integer-order
/// Bessel values leave the double range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scaled {
    pub mantissa: f64,
    pub exponent: i64,
}

impl Scaled {
    fn new(mantissa: f64, exponent: i64) -> Self {
        Scaled { mantissa, exponent }
    }

    /// Convert to `f64`, flushing to zero or infinity outside the range.
    pub fn value(&self) -> f64 {
        scale2(self.mantissa, self.exponent)
    }
}

fn scale2(m: f64, e: i64) -> f64 {
    if m == 0.0 {
        return 0.0;
    }
    let mut v = m;
    let mut e = e;
    while e > 600 {
        v *= 2f64.powi(600);
        e -= 600;
        if v.is_infinite() {
            return v;
        }
    }
    while e < -600 {
        v *= 2f64.powi(-600);
        e += 600;
        if v == 0.0 {
            return 0.0;
        }
    }
    v * 2f64.powi(e as i32)
}

/// Integer-order `J_n(x)` and `Y_n(x)` for `n = 0..=n_max` in scaled form.
///
/// `J_n` comes from Miller's backward recurrence (stable downward) and `Y_n`
/// from the forward recurrence seeded by `Y_0, Y_1` (stable upward).
pub fn bessel_jy_sequence(x: f64, n_max: usize) -> Result<(Vec<Scaled>, Vec<Scaled>)> {
    check_arg(x)?;
    if x <= 0.0 {
        return Err(SpecialError::Domain(format!("x must be positive, got {x}")));
    }
    if n_max > 1_000_000 {
        return Err(SpecialError::Domain(format!("n_max = {n_max} too large")));
    }
    let base = bessel_jy01(x)?;

    // Backward recurrence with per-index exponents.
    let extra = (2.0 * x.sqrt()).max(20.0) as usize + 20;
    let mut start = n_max.max(x as usize) + extra;
    if start % 2 == 1 {
        start += 1;
    }
    let mut man = vec![0.0f64; start + 2];
    let mut ex = vec![0i64; start + 2];
    let mut f_next = 0.0;
    let mut f = 1.0e-30;
    let mut shift: i64 = 0;
    man[start] = f;
    ex[start] = 0;
    let mut n = start;
    while n > 0 {
        let f_prev = (2.0 * n as f64 / x) * f - f_next;
        f_next = f;
        f = f_prev;
        n -= 1;
        if f.abs() > 1e200 {
            f *= 2f64.powi(-600);
            f_next *= 2f64.powi(-600);
            shift += 600;
        }
        man[n] = f;
        ex[n] = shift;
    }
    // f_n = man[n] * 2^{ex[n]}; normalise so that index 0 equals J_0 (or J_1 near a J_0 zero).
    let (anchor, anchor_val) = if base.j0.abs() > 0.1 * base.j1.abs() {
        (0usize, base.j0)
    } else {
        (1usize, base.j1)
    };
    let ratio = anchor_val / man[anchor];
    let ref_ex = ex[anchor];
    let mut jn = Vec::with_capacity(n_max + 1);
    for i in 0..=n_max {
        let m = man[i] * ratio;
        let e = ref_ex - ex[i];
        jn.push(renorm(Scaled::new(m, -e)));
    }
    jn[0] = Scaled::new(base.j0, 0);
    if n_max >= 1 {
        jn[1] = Scaled::new(base.j1, 0);
    }

    let mut yn = Vec::with_capacity(n_max + 1);
    yn.push(Scaled::new(base.y0, 0));
    if n_max >= 1 {
        yn.push(Scaled::new(base.y1, 0));
    }
    let mut y_prev = base.y0;
    let mut y_cur = base.y1;
    let mut e: i64 = 0;
    for i in 1..n_max {
        let y_new = (2.0 * i as f64 / x) * y_cur - y_prev;
        y_prev = y_cur;
        y_cur = y_new;
        if y_cur.abs() > 1e200 {
            y_cur *= 2f64.powi(-600);
            y_prev *= 2f64.powi(-600);
            e += 600;
        }
        yn.push(Scaled::new(y_cur, e));
    }
    Ok((jn, yn))
}

fn renorm(s: Scaled) -> Scaled {
    if s.mantissa == 0.0 || !s.mantissa.is_finite() {
        return s;
    }
    let e = s.mantissa.abs().log2().floor() as i64;
    Scaled::new(s.mantissa * 2f64.powi(-e as i32), s.exponent + e)
}

/// Product of two scaled numbers as an `f64`.
pub fn scaled_product(a: Scaled, b: Scaled) -> f64 {
    scale2(a.mantissa * b.mantissa, a.exponent + b.exponent)
}
