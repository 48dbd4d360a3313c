//! Elliptic-expansion machinery around points of the upper half-plane:
//! meromorphic coefficient extraction by contour sampling, the two-radius
//! separation of meromorphic and non-meromorphic parts of polar harmonic
//! Maass forms, residues, and the closed forms for the coefficients of G_Q.
//!
//! A meromorphic form of weight 2k expands as
//!   f(z) = (z - conj rho)^(-2k) sum_n a(n) X_rho^n(z),
//! and a weight 2-2k polar harmonic Maass form as
//!   F(z) = (z - conj rho)^(2k-2) [ sum a+(n) X^n
//!          + sum a-(n) beta0(1 - r^2; 2k-1, -n) X^n ].
//! On the circle |X| = R the angular Fourier coefficients pick out
//! a(n) R^n, respectively a+(n) R^n + a-(n) beta0(1-R^2; 2k-1, -n) R^n,
//! so one radius determines the former and two radii separate the latter.

use std::collections::BTreeMap;

use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::hyperbolic::HPoint;
use crate::modforms;
use crate::policy::{SumPolicy, Weight};
use crate::qform::{self, BinaryQuadraticForm};
use crate::specfun;

/// Indexed elliptic coefficients around a center.
#[derive(Debug, Clone, Serialize)]
pub struct EllipticExpansion {
    pub center: HPoint,
    pub weight_k: u32,
    #[serde(serialize_with = "ser_coeffs")]
    pub plus_coeffs: BTreeMap<i64, Complex64>,
    #[serde(serialize_with = "ser_coeffs")]
    pub minus_coeffs: BTreeMap<i64, Complex64>,
    pub radius_used: f64,
}

fn ser_coeffs<S: serde::Serializer>(
    m: &BTreeMap<i64, Complex64>,
    s: S,
) -> std::result::Result<S::Ok, S::Error> {
    use serde::ser::SerializeMap;
    let mut map = s.serialize_map(Some(m.len()))?;
    for (n, v) in m {
        map.serialize_entry(&n.to_string(), &[v.re, v.im])?;
    }
    map.end()
}

impl EllipticExpansion {
    pub fn plus(&self, n: i64) -> Complex64 {
        self.plus_coeffs.get(&n).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn minus(&self, n: i64) -> Complex64 {
        self.minus_coeffs.get(&n).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Smallest index with a nonzero meromorphic coefficient.
    pub fn min_plus_index(&self) -> Option<i64> {
        self.plus_coeffs.iter().find(|e| e.1.norm() > 0.0).map(|e| *e.0)
    }
}

/// The preimage of X_rho = w under the elliptic coordinate:
/// z = (rho - conj(rho) w) / (1 - w).
pub fn from_x_coord(rho: HPoint, w: Complex64) -> HPoint {
    HPoint::from_complex((rho.to_complex() - rho.conj() * w) / (1.0 - w))
}

/// Angular Fourier data of prefactor^(-1) f on the circle |X_rho| = R,
/// doubling the sample count until the requested indices stabilize.
fn angular_coefficients<F>(
    f: &F,
    rho: HPoint,
    weight_exponent: i32,
    r: f64,
    n_lo: i64,
    n_hi: i64,
    tol: f64,
) -> Result<Vec<Complex64>>
where
    F: Fn(HPoint) -> Result<Complex64>,
{
    if !(0.0..0.95).contains(&r) || r == 0.0 {
        return Err(Error::Domain(format!("contour radius {r} outside (0, 0.95)")));
    }
    const GRID: usize = 4096;
    let count = (n_hi - n_lo + 1) as usize;
    // Nested theta-grids: the N-point rule reuses every value of the
    // N/2-point rule, so the doubling loop costs one full grid at most.
    let mut cache: Vec<Option<Complex64>> = vec![None; GRID];
    let mut eval = |s: usize| -> Result<Complex64> {
        if let Some(v) = cache[s] {
            return Ok(v);
        }
        let theta = 2.0 * std::f64::consts::PI * s as f64 / GRID as f64;
        let w = Complex64::from_polar(r, theta);
        let z = from_x_coord(rho, w);
        let g = (z.to_complex() - rho.conj()).powi(weight_exponent) * f(z)?;
        cache[s] = Some(g);
        Ok(g)
    };
    let mut samples = 256usize;
    let mut prev: Option<Vec<Complex64>> = None;
    let mut prev_drift = f64::INFINITY;
    while samples <= GRID {
        let stride = GRID / samples;
        let mut out = vec![Complex64::new(0.0, 0.0); count];
        for s in 0..samples {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / samples as f64;
            let g = eval(s * stride)?;
            for (i, slot) in out.iter_mut().enumerate() {
                let n = n_lo + i as i64;
                let phase = Complex64::from_polar(1.0, -(n as f64) * theta);
                *slot += g * phase;
            }
        }
        for slot in out.iter_mut() {
            *slot /= samples as f64;
        }
        if let Some(p) = &prev {
            let scale = out.iter().map(|c| c.norm()).fold(1e-300, f64::max);
            let drift = out
                .iter()
                .zip(p.iter())
                .map(|(a, b)| (a - b).norm())
                .fold(0.0, f64::max);
            // Accept on the target, or at the evaluator's noise floor
            // (drift small and no longer improving).
            if drift < tol * scale || (drift < 1e-6 * scale && drift > 0.5 * prev_drift) {
                return Ok(out);
            }
            prev_drift = drift;
        }
        prev = Some(out);
        samples *= 2;
    }
    Err(Error::Contour("angular coefficients did not stabilize; pole on or near the circle?".into()))
}

/// Round tiny coefficients to exact zero, relative to the largest one.
fn clean(coeffs: &mut BTreeMap<i64, Complex64>) {
    let scale = coeffs.values().map(|c| c.norm()).fold(0.0, f64::max);
    for v in coeffs.values_mut() {
        if v.norm() < 1e-12 * scale {
            *v = Complex64::new(0.0, 0.0);
        }
    }
}

/// Coefficients a_f(rho; n) of a meromorphic weight-2k form around rho.
pub fn mero_coeffs<F>(
    f: &F,
    rho: HPoint,
    k: Weight,
    n_range: (i64, i64),
    r: f64,
) -> Result<EllipticExpansion>
where
    F: Fn(HPoint) -> Result<Complex64>,
{
    let (n_lo, n_hi) = n_range;
    let raw = angular_coefficients(f, rho, 2 * k.k() as i32, r, n_lo, n_hi, 1e-9)?;
    let mut plus = BTreeMap::new();
    for (i, c) in raw.iter().enumerate() {
        let n = n_lo + i as i64;
        plus.insert(n, c / r.powi(n as i32));
    }
    clean(&mut plus);
    Ok(EllipticExpansion {
        center: rho,
        weight_k: k.k(),
        plus_coeffs: plus,
        minus_coeffs: BTreeMap::new(),
        radius_used: r,
    })
}

/// Meromorphic and non-meromorphic coefficients of a weight 2-2k polar
/// harmonic Maass form, separated through two contour radii.
pub fn polar_coeffs<F>(
    f: &F,
    rho: HPoint,
    k: Weight,
    n_range: (i64, i64),
    r1: f64,
    r2: f64,
) -> Result<EllipticExpansion>
where
    F: Fn(HPoint) -> Result<Complex64>,
{
    if (r1 - r2).abs() < 1e-6 {
        return Err(Error::RadiusChoice("polar separation needs two distinct radii".into()));
    }
    let (n_lo, n_hi) = n_range;
    let ki = k.k();
    let raw1 = angular_coefficients(f, rho, 2 - 2 * ki as i32, r1, n_lo, n_hi, 1e-9)?;
    let raw2 = angular_coefficients(f, rho, 2 - 2 * ki as i32, r2, n_lo, n_hi, 1e-9)?;
    let mut plus = BTreeMap::new();
    let mut minus = BTreeMap::new();
    for (i, (c1, c2)) in raw1.iter().zip(raw2.iter()).enumerate() {
        let n = n_lo + i as i64;
        // c_R = a+(n) R^n + a-(n) beta0(1-R^2; 2k-1, -n) R^n.
        let b1 = specfun::beta0(1.0 - r1 * r1, 2 * ki - 1, -n)?;
        let b2 = specfun::beta0(1.0 - r2 * r2, 2 * ki - 1, -n)?;
        let (p1, p2) = (r1.powi(n as i32), r2.powi(n as i32));
        let det = p1 * b2 * p2 - p2 * b1 * p1;
        if det.abs() < 1e-10 * (p1 * p2 * (b1.abs() + b2.abs())).max(1e-30) {
            return Err(Error::RadiusChoice(format!(
                "separation system nearly singular at index {n}"
            )));
        }
        let a_plus = (c1 * b2 * p2 - c2 * b1 * p1) / det;
        let a_minus = (c2 * p1 - c1 * p2) / det;
        plus.insert(n, a_plus);
        minus.insert(n, a_minus);
    }
    clean(&mut plus);
    clean(&mut minus);
    Ok(EllipticExpansion {
        center: rho,
        weight_k: ki,
        plus_coeffs: plus,
        minus_coeffs: minus,
        radius_used: r1.max(r2),
    })
}

/// Residue of f at rho by the contour integral over |X_rho| = R:
/// dz = (rho - conj rho) w / (1 - w)^2 i dtheta with w = R e^(i theta).
pub fn residue_at<F>(f: &F, rho: HPoint, r: f64, samples: usize) -> Result<Complex64>
where
    F: Fn(HPoint) -> Result<Complex64>,
{
    if !(0.0..0.95).contains(&r) || r == 0.0 {
        return Err(Error::Domain(format!("contour radius {r} outside (0, 0.95)")));
    }
    let mut prev: Option<Complex64> = None;
    let mut n = samples.max(64);
    while n <= 65536 {
        let mut acc = Complex64::new(0.0, 0.0);
        let two_i_eta = Complex64::new(0.0, 2.0 * rho.y);
        for s in 0..n {
            let theta = 2.0 * std::f64::consts::PI * s as f64 / n as f64;
            let w = Complex64::from_polar(r, theta);
            let z = from_x_coord(rho, w);
            acc += f(z)? * two_i_eta * w / (1.0 - w).powi(2);
        }
        acc /= n as f64;
        if let Some(p) = prev {
            if (acc - p).norm() < 1e-11 * (1.0 + acc.norm()) {
                return Ok(acc);
            }
        }
        prev = Some(acc);
        n *= 2;
    }
    Err(Error::Contour("residue contour did not stabilize".into()))
}

/// Closed form for the meromorphic coefficients of G_Q away from its pole:
/// a+_{Q,rho}(n) = eta^(n-(2k-2)) (-4)^(1-k)/(2k-1) F_(n+1,Q)(rho),
/// with F_(n+1,Q)(rho) = F_(n+1)(rho, tau_Q) evaluated through the coset
/// fibers, which converge much deeper than the form-indexed sum.
pub fn a_plus_closed(
    k: Weight,
    n: u32,
    q: &BinaryQuadraticForm,
    rho: HPoint,
    policy: &SumPolicy,
) -> Result<Complex64> {
    let ki = k.k() as i32;
    let tau = qform::reduce(q)?.0.cm_point()?;
    let fnq = modforms::eval_fn_sum(k, n + 1, rho, tau, policy)?;
    let front = rho.y.powi(n as i32 - (2 * ki - 2)) * (-4f64).powi(1 - ki) / (2.0 * ki as f64 - 1.0);
    Ok(front * fnq.value)
}

/// a+_{Q,tau_Q}(0): the omitted-term value at the pole itself,
///   (-4 v^2)^(1-k) D^((1-k)/2) sum*_{Q' ~ Q} Q'(tau,1)^(k-1)
///   int_0^artanh(sqrt(D)/Q'_tau) sinh^(2k-2),
/// where the term Q' = Q is left out.  The sum runs over the class fibers
/// with the pole fiber summed directly around the omitted index.
pub fn gq_omitted(k: Weight, q: &BinaryQuadraticForm, policy: &SumPolicy) -> Result<Complex64> {
    if !q.is_positive_definite() {
        return Err(Error::Domain("gq_omitted requires a positive-definite form".into()));
    }
    let (qr, _) = qform::reduce(q)?;
    let tau = qr.cm_point()?;
    let d = -q.discriminant();
    let ki = k.k() as i32;
    let sqrt_d = (d as f64).sqrt();
    // Direct window sums on every fiber; the kernel decays like m^(-2k)
    // and the fiber family like a^(-k), both extrapolated.
    let slices = modforms::class_fibers(&qr, policy.coefficient_bound)?;
    let mut keyed: Vec<(f64, Complex64)> = Vec::with_capacity(slices.len());
    for (a, b0) in &slices {
        let omit = *a == qr.a && (qr.b - b0).rem_euclid(2 * a) == 0;
        let m_q = if omit { (qr.b - b0) / (2 * a) } else { 0 };
        let mut acc = Complex64::new(0.0, 0.0);
        let half_width = 1 << 12;
        let center = (-(tau.x + *b0 as f64 / (2.0 * *a as f64))).round() as i64;
        let mut terms = Vec::with_capacity(2 * half_width as usize + 1);
        for m in (center - half_width)..=(center + half_width) {
            if omit && m == m_q {
                continue;
            }
            let b = b0 + 2 * a * m;
            let f = BinaryQuadraticForm::new(*a, b, (b * b + d) / (4 * a));
            let av = *a as f64;
            let u = -(b as f64) / (2.0 * av);
            let v = sqrt_d / (2.0 * av);
            let dz2 = (tau.x - u).powi(2) + (tau.y + v).powi(2);
            let omr = 2.0 * tau.y * sqrt_d / (av * dz2);
            let integral = specfun::sinh_power_integral(k.k(), 1.0 - omr)?;
            terms.push(f.q_value(tau).powi(ki - 1) * integral);
        }
        terms.sort_unstable_by(|p, q| {
            q.norm_sqr().partial_cmp(&p.norm_sqr()).unwrap_or(std::cmp::Ordering::Equal)
        });
        for t in terms {
            acc += t;
        }
        keyed.push((*a as f64, acc));
    }
    let key_max = keyed.iter().map(|e| e.0).fold(1.0, f64::max);
    let (sum, _) = modforms::extrapolated_sum(&mut keyed, key_max);
    let front = (-4.0 * tau.y * tau.y).powi(1 - ki) * (d as f64).powf((1.0 - ki as f64) / 2.0);
    Ok(front * sum)
}
