//! Evaluators for the function families built from binary quadratic forms:
//! the meromorphic cusp forms f_Q and f_{k,delta}, their weight 2-2k
//! companions G_Q (with an independent Poincare-series route), the raised
//! family F_{n,Q}, the two-variable forms f_n / F_n and g / G_1, the
//! elliptic Poincare series Psi_{kappa,m}, and the disk test function
//! g_{1-k}.
//!
//! Every infinite sum here decomposes into T-fibers on which the summand is
//! rational in the translation index (after expanding the scalar kernel in
//! the reciprocal fiber distance where necessary), so each fiber is summed
//! exactly through `latsum`.  Only the fiber family is truncated: by the
//! leading coefficient of the enumerated forms, or by the norm of the
//! coset bottom row, both capped by `SumPolicy::coefficient_bound`.
//! Truncating inside the fibers instead (enumerate forms, cut |b|) leaves
//! an O(1/bound) error envelope far above the tolerances used downstream.
//! The few fibers passing close to the evaluation point, where neither the
//! kernel expansion nor the cluster expansion converges, are summed
//! directly over an adaptive window.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::{self, CosetSlice, HPoint};
use crate::latsum::{self, ClusteredSlice, TwoPole};
use crate::policy::{EvalResult, SumPolicy, Weight};
use crate::qform::{self, BinaryQuadraticForm, UnimodularMatrix};
use crate::specfun;

/// Evaluation closer than this to a pole (in the r-metric) is an error.
pub const SINGULAR_GUARD_R: f64 = 1e-6;

/// Kernel-expansion argument above which a fiber is summed directly.
const SERIES_RATIO_MAX: f64 = 0.4;

/// Cluster-expansion conditioning gate.
const CLUSTER_RATIO_MAX: f64 = 0.45;

const MAX_SERIES_TERMS: usize = 64;

fn i_pow(m: i64) -> Complex64 {
    match m.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => Complex64::new(0.0, 1.0),
        2 => Complex64::new(-1.0, 0.0),
        _ => Complex64::new(0.0, -1.0),
    }
}

/// Shift x by an integer so |x| <= 1/2.  The sums are invariant under
/// z -> z + 1 as exact set bijections, so this only changes the truncation.
fn t_normalize(z: HPoint) -> HPoint {
    HPoint::new(z.x - z.x.round(), z.y)
}

/// True when [z] and [zz] are closer than `guard` in the r-metric, checked
/// after reduction (including the fundamental-domain boundary copies).
pub(crate) fn orbit_close(z: HPoint, zz: HPoint, guard: f64) -> bool {
    let (zs, _) = hyperbolic::reduce_point(z);
    let (ws, _) = hyperbolic::reduce_point(zz);
    let mut candidates = vec![ws];
    for m in [
        UnimodularMatrix::translation(1),
        UnimodularMatrix::translation(-1),
        UnimodularMatrix::inversion(),
    ] {
        candidates.push(hyperbolic::moebius(&m, ws));
    }
    candidates.into_iter().any(|w| hyperbolic::r_coord(w, zs) < guard)
}

/// Descending-magnitude summation: deterministic for a fixed term set.
fn sum_descending(terms: &mut Vec<Complex64>) -> Complex64 {
    terms.sort_unstable_by(|p, q| {
        q.norm_sqr().partial_cmp(&p.norm_sqr()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let mut acc = Complex64::new(0.0, 0.0);
    for t in terms.iter() {
        acc += t;
    }
    acc
}

/// Sum the fiber values with the leading O(1/bound) truncation term
/// removed by comparing against the half-bound partial sum.  The fibers
/// beyond the nearest few carry a nonvanishing mean (the integral part of
/// the exact fiber sums), which decays like the reciprocal cut and is
/// smooth enough in the cut for two-point extrapolation; the increment
/// between the two partial sums is the conservative error scale.
pub(crate) fn extrapolated_sum(keyed: &mut Vec<(f64, Complex64)>, key_max: f64) -> (Complex64, f64) {
    let cut = key_max / 2.0;
    let mut half: Vec<Complex64> = keyed.iter().filter(|e| e.0 <= cut).map(|e| e.1).collect();
    let mut full: Vec<Complex64> = keyed.iter().map(|e| e.1).collect();
    let s_full = sum_descending(&mut full);
    if half.is_empty() || half.len() == full.len() {
        return (s_full, s_full.norm());
    }
    let s_half = sum_descending(&mut half);
    (2.0 * s_full - s_half, (s_full - s_half).norm())
}

fn slice_eps(policy: &SumPolicy) -> f64 {
    (policy.tail_tolerance * 1e-5).max(1e-18)
}

/// Windows stop once a doubling block drops below this; the leftover wing
/// envelope is reported in the tail estimate, so the window need not chase
/// the series epsilon.
fn window_eps(eps: f64) -> f64 {
    (eps * 1e3).max(1e-15)
}

/// Direct summation of a fiber that resists the analytic expansions:
/// widen the window in doubling blocks until a block goes quiet, then
/// bound the wings by the m^(-decay) envelope of the outermost samples.
fn adaptive_fiber_window<F>(
    m0: i64,
    eps: f64,
    decay: i32,
    kernel: F,
) -> Result<(Complex64, f64, usize)>
where
    F: Fn(i64) -> Result<Complex64>,
{
    const W_MAX: i64 = 1 << 13;
    let eps = window_eps(eps);
    let mut terms: Vec<Complex64> = Vec::with_capacity(1024);
    let mut w = 64i64;
    for m in (m0 - w)..=(m0 + w) {
        terms.push(kernel(m)?);
    }
    let mut prev_block = Complex64::new(0.0, 0.0);
    let mut block = Complex64::new(0.0, 0.0);
    while w < W_MAX {
        let next = 2 * w;
        prev_block = block;
        block = Complex64::new(0.0, 0.0);
        for m in (m0 - next)..=(m0 - w - 1) {
            let t = kernel(m)?;
            block += t;
            terms.push(t);
        }
        for m in (m0 + w + 1)..=(m0 + next) {
            let t = kernel(m)?;
            block += t;
            terms.push(t);
        }
        w = next;
        let scale = terms.iter().map(|t| t.norm()).fold(0.0, f64::max);
        if block.norm() < eps * (1.0 + scale) {
            break;
        }
    }
    // The wings decay polynomially; extrapolate them geometrically from
    // the measured block ratio and carry the correction as uncertainty.
    let ratio = if prev_block.norm() > 0.0 {
        (block.norm() / prev_block.norm()).clamp(0.0, 0.75)
    } else {
        2f64.powi(1 - decay)
    };
    let correction = block * ratio / (1.0 - ratio);
    let used = terms.len();
    let value = sum_descending(&mut terms) + correction;
    Ok((value, correction.norm().max(block.norm() * 1e-3), used))
}

// ---------------------------------------------------------------------------
// Class fibers: one slice per (a, b0 mod 2a) orbit of forms under T.
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy)]
struct ClassSlice {
    a: i64,
    b0: i64,
    d: i64,
}

/// T-fibers of the class of `q`: leading coefficients up to the bound,
/// residues solving b^2 = -D (mod 4a), membership by exact reduction.
fn class_slices(q: &BinaryQuadraticForm, a_bound: i64) -> Result<Vec<ClassSlice>> {
    if !q.is_positive_definite() {
        return Err(Error::Domain("expected a positive-definite form".into()));
    }
    let d = -q.discriminant();
    let (target, _) = qform::reduce(q)?;
    let mut out = Vec::new();
    for a in 1..=a_bound {
        let modulus = 4 * a;
        let target_res = (-d).rem_euclid(modulus);
        for b0 in 0..(2 * a) {
            if (b0 * b0).rem_euclid(modulus) != target_res {
                continue;
            }
            let c = (b0 * b0 + d) / (4 * a);
            if qform::reduce(&BinaryQuadraticForm::new(a, b0, c))?.0 == target {
                out.push(ClassSlice { a, b0, d });
            }
        }
    }
    Ok(out)
}

/// The (a, b0) fiber labels of a class, for callers outside this module.
pub(crate) fn class_fibers(q: &BinaryQuadraticForm, a_bound: i64) -> Result<Vec<(i64, i64)>> {
    Ok(class_slices(q, a_bound)?.iter().map(|s| (s.a, s.b0)).collect())
}

/// Geometry of one class fiber at the evaluation point z:
/// Q_m(z,1) = a (m + alpha_z)(m + beta_z) and
/// y (Q_m)_z = a (m + alpha_x)(m + beta_x), with h^2 = y^2 + v^2.
/// For growing a the roots alpha_z, beta_z cluster onto alpha_x.
struct ClassGeometry {
    a: f64,
    v: f64,
    alpha_z: Complex64,
    beta_z: Complex64,
    alpha_x: Complex64,
    beta_x: Complex64,
    zeta_z: Complex64,
    zeta_x: f64,
    /// sqrt(D)/Q_z at the fiber minimum: the kernel-expansion argument.
    ratio: f64,
}

impl ClassSlice {
    fn geometry(&self, z: HPoint) -> ClassGeometry {
        let a = self.a as f64;
        let off = self.b0 as f64 / (2.0 * a);
        let v = (self.d as f64).sqrt() / (2.0 * a);
        let zeta_z = z.to_complex() + off;
        let zeta_x = z.x + off;
        let h = (z.y * z.y + v * v).sqrt();
        ClassGeometry {
            a,
            v,
            alpha_z: zeta_z + Complex64::new(0.0, v),
            beta_z: zeta_z - Complex64::new(0.0, v),
            alpha_x: Complex64::new(zeta_x, h),
            beta_x: Complex64::new(zeta_x, -h),
            zeta_z,
            zeta_x,
            ratio: (self.d as f64).sqrt() * z.y / (a * h * h),
        }
    }

    fn form_at(&self, m: i64) -> BinaryQuadraticForm {
        let b = self.b0 + 2 * self.a * m;
        BinaryQuadraticForm::new(self.a, b, (b * b + self.d) / (4 * self.a))
    }

    /// r-metric guard against the nearest pole on the fiber.
    fn guard(&self, z: HPoint) -> Result<()> {
        let g = self.geometry(z);
        let m_star = (-g.zeta_x).round();
        let tau_re = -(self.b0 as f64 + 2.0 * g.a * m_star) / (2.0 * g.a);
        let v = (self.d as f64).sqrt() / (2.0 * g.a);
        let dz2 = (z.x - tau_re).powi(2) + (z.y + v).powi(2);
        let r_sq = 1.0 - 2.0 * z.y * (self.d as f64).sqrt() / (g.a * dz2);
        if r_sq < SINGULAR_GUARD_R * SINGULAR_GUARD_R {
            return Err(Error::SingularPoint(format!(
                "evaluation within {SINGULAR_GUARD_R} of a pole of the class (a = {})",
                self.a
            )));
        }
        Ok(())
    }
}

/// Series coefficients (a)_j (b)_j / ((c)_j j!).
pub(crate) struct HypCoeffs {
    a: f64,
    b: f64,
    c: f64,
    current: f64,
    n: u32,
}

impl HypCoeffs {
    pub(crate) fn new(a: f64, b: f64, c: f64) -> Self {
        HypCoeffs { a, b, c, current: 1.0, n: 0 }
    }

    pub(crate) fn next(&mut self) -> f64 {
        let out = self.current;
        let nf = self.n as f64;
        self.current *= (self.a + nf) * (self.b + nf) / ((self.c + nf) * (nf + 1.0));
        self.n += 1;
        out
    }
}

/// One class fiber of a kernel Q(z,1)^p K(t), K(t) = sum_j coef_j t^(e0+2j)
/// with t = sqrt(D) y / E: the Q-roots are expanded around the E-roots and
/// each power reduces to cached two-pole sums,
///   sum_j coef_j (sqrt(D) y)^(e0+2j) a^(p-e0-2j) sum_m [fiber rational].
/// Fibers where either expansion is out of range are summed directly.
#[allow(clippy::too_many_arguments)]
fn class_kernel_slice<F>(
    g: &ClassGeometry,
    p: i32,
    e0: i32,
    td: f64,
    coeffs: &mut HypCoeffs,
    extra_inverse_power: bool,
    exact_kernel: F,
    eps: f64,
) -> Result<(Complex64, f64, usize)>
where
    F: Fn(i64) -> Result<Complex64>,
{
    let m0 = (-g.zeta_x).round() as i64;
    let decay = 2 * (e0 - p).max(2);
    if g.ratio > SERIES_RATIO_MAX {
        return adaptive_fiber_window(m0, eps, decay, exact_kernel);
    }
    let mut cluster = ClusteredSlice::new(
        g.alpha_x,
        g.beta_x,
        &[(g.alpha_z, p), (g.beta_z, p)],
        &[],
    );
    if cluster.ratio > CLUSTER_RATIO_MAX {
        return adaptive_fiber_window(m0, eps, decay, exact_kernel);
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let mut td_pow = td.powi(e0);
    let mut a_pow = g.a.powi(p - e0);
    let mut small_streak = 0;
    for j in 0..MAX_SERIES_TERMS {
        let coef = if extra_inverse_power {
            coeffs.next() / (e0 as f64 + 2.0 * j as f64)
        } else {
            coeffs.next()
        };
        let term = coef * td_pow * a_pow * cluster.sum_e(e0 + 2 * j as i32, eps)?;
        acc += term;
        if term.norm() < eps * (1.0 + acc.norm()) {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok((acc, 0.0, 1));
            }
        } else {
            small_streak = 0;
        }
        td_pow *= td * td;
        a_pow /= g.a * g.a;
    }
    Err(Error::Precision("kernel expansion did not converge on a fiber".into()))
}

// ---------------------------------------------------------------------------
// Class-sum evaluators.
// ---------------------------------------------------------------------------

/// f_Q(z) = D^(k/2) sum_{Q' ~ Q} Q'(z, 1)^(-k).
pub fn eval_fq(k: Weight, q: &BinaryQuadraticForm, z: HPoint, policy: &SumPolicy) -> Result<EvalResult> {
    let z = t_normalize(z);
    let ki = k.k() as i32;
    let slices = class_slices(q, policy.coefficient_bound)?;
    let eps = slice_eps(policy);
    let mut terms = Vec::with_capacity(slices.len());
    for s in &slices {
        s.guard(z)?;
        let g = s.geometry(z);
        let sum = fiber_inverse_quadratic(&g, ki, z, eps)?;
        terms.push((g.a, sum * g.a.powi(-ki)));
    }
    let used = terms.len();
    let (sum, increment) = extrapolated_sum(&mut terms, policy.coefficient_bound as f64);
    let d = (-q.discriminant()) as f64;
    let scale = d.powf(ki as f64 / 2.0);
    Ok(EvalResult::new(sum * scale, increment * scale, used))
}

/// sum_m ((m + zeta_z)^2 + v^2)^(-k): through the midpoint expansion when
/// the two roots nearly coincide, two-pole partial fractions otherwise.
fn fiber_inverse_quadratic(g: &ClassGeometry, ki: i32, z: HPoint, eps: f64) -> Result<Complex64> {
    if g.v < CLUSTER_RATIO_MAX * z.y {
        latsum::quadratic_line_sum(g.zeta_z, g.v * g.v, ki, eps)
    } else {
        TwoPole::new(g.alpha_z, g.beta_z).sum(-ki, -ki)
    }
}

/// f_{k,-D}(z): every class of discriminant -D; the negative-definite
/// classes enter by summing the negated forms directly.
pub fn eval_f_kd(k: Weight, d: i64, z: HPoint, policy: &SumPolicy) -> Result<EvalResult> {
    let reps = qform::class_representatives(d)?;
    let z = t_normalize(z);
    let ki = k.k() as i32;
    let eps = slice_eps(policy);
    let mut value = Complex64::new(0.0, 0.0);
    let mut tail = 0.0;
    let mut used = 0usize;
    for rep in &reps {
        let slices = class_slices(rep, policy.coefficient_bound)?;
        let mut terms = Vec::with_capacity(2 * slices.len());
        for s in &slices {
            s.guard(z)?;
            let g = s.geometry(z);
            let sum = fiber_inverse_quadratic(&g, ki, z, eps)?;
            // (-Q')(z,1) = -Q'(z,1): the negated class summed on the same
            // fiber with leading coefficient -a.
            terms.push((g.a, sum * g.a.powi(-ki)));
            terms.push((g.a, sum * (-g.a).powi(-ki)));
        }
        used += terms.len();
        let (sum, increment) = extrapolated_sum(&mut terms, policy.coefficient_bound as f64);
        value += sum;
        tail += increment;
    }
    let scale = (d as f64).powf(ki as f64 / 2.0);
    Ok(EvalResult::new(value * scale, tail * scale, used))
}

/// Zagier's cusp form f_{k,delta}(z) = sum over all forms of positive
/// non-square discriminant delta of Q(z,1)^(-k).
pub fn eval_f_kdelta(k: Weight, delta: i64, z: HPoint, policy: &SumPolicy) -> Result<EvalResult> {
    if delta <= 0 || !(delta % 4 == 0 || delta % 4 == 1) {
        return Err(Error::Domain(format!("{delta} is not a positive discriminant")));
    }
    let isq = (delta as f64).sqrt().round() as i64;
    if isq * isq == delta {
        return Err(Error::Domain(format!("discriminant {delta} must be non-square")));
    }
    let z = t_normalize(z);
    let ki = k.k() as i32;
    let eps = slice_eps(policy);
    let mut terms = Vec::new();
    for a_abs in 1..=policy.coefficient_bound {
        let modulus = 4 * a_abs;
        let target = delta.rem_euclid(modulus);
        for b0 in 0..(2 * a_abs) {
            if (b0 * b0).rem_euclid(modulus) != target {
                continue;
            }
            for a in [a_abs, -a_abs] {
                let af = a as f64;
                let zeta = z.to_complex() + b0 as f64 / (2.0 * af);
                let mu = (delta as f64).sqrt() / (2.0 * af);
                // Q(z,1)(m) = a ((m+zeta)^2 - mu^2).
                let sum = if mu.abs() < CLUSTER_RATIO_MAX * z.y {
                    latsum::quadratic_line_sum(zeta, -mu * mu, ki, eps)?
                } else {
                    TwoPole::new(zeta + mu, zeta - mu).sum(-ki, -ki)?
                };
                terms.push((a_abs as f64, sum * af.powi(-ki)));
            }
        }
    }
    let used = terms.len();
    let (value, increment) = extrapolated_sum(&mut terms, policy.coefficient_bound as f64);
    Ok(EvalResult::new(value, increment, used))
}

/// G_Q(z) = D^((1-k)/2) sum_{Q' ~ Q} Q'(z,1)^(k-1)
///          int_0^artanh(sqrt(D)/Q'_z) sinh^(2k-2) dtheta.
/// The integral is int_0^t s^(2k-2)(1-s^2)^(-k) ds at t = sqrt(D)/Q'_z,
/// expanded as sum_j (k)_j/j! t^(2k-1+2j)/(2k-1+2j).
pub fn eval_gq(k: Weight, q: &BinaryQuadraticForm, z: HPoint, policy: &SumPolicy) -> Result<EvalResult> {
    let z = t_normalize(z);
    let d = -q.discriminant();
    let ku = k.k();
    let ki = ku as i32;
    let sqrt_d = (d as f64).sqrt();
    let slices = class_slices(q, policy.coefficient_bound)?;
    let eps = slice_eps(policy);
    let mut extra_tail = 0.0;
    let mut terms = Vec::with_capacity(slices.len());
    let mut used = 0usize;
    for s in &slices {
        s.guard(z)?;
        let g = s.geometry(z);
        let (t, wing, n_used) = class_kernel_slice(
            &g,
            ki - 1,
            2 * ki - 1,
            sqrt_d * z.y,
            &mut HypCoeffs::new(ku as f64, 1.0, 1.0),
            true,
            |m| gq_kernel(k, &s.form_at(m), z, sqrt_d),
            eps,
        )?;
        extra_tail += wing;
        used += n_used;
        terms.push((g.a, t));
    }
    let (sum, increment) = extrapolated_sum(&mut terms, policy.coefficient_bound as f64);
    let scale = (d as f64).powf((1.0 - ki as f64) / 2.0);
    let tail = scale.abs() * (increment + extra_tail);
    Ok(EvalResult::new(sum * scale, tail, used))
}

fn gq_kernel(k: Weight, f: &BinaryQuadraticForm, z: HPoint, sqrt_d: f64) -> Result<Complex64> {
    let a = f.a as f64;
    let u = -(f.b as f64) / (2.0 * a);
    let v = sqrt_d / (2.0 * a);
    let dz2 = (z.x - u).powi(2) + (z.y + v).powi(2);
    let omr = 2.0 * z.y * sqrt_d / (a * dz2);
    let integral = specfun::sinh_power_integral(k.k(), (1.0 - omr).max(1e-300))?;
    Ok(f.q_value(z).powi(k.k() as i32 - 1) * integral)
}

/// F_{n,Q}(z) = D^(k/2) sum Q'_z^(n-2k) Q'(z,1)^(k-n)
///              2F1(k-(n-1)/2, k-n/2; k+1/2; D/Q'_z^2).
pub fn eval_fnq(
    k: Weight,
    n: u32,
    q: &BinaryQuadraticForm,
    z: HPoint,
    policy: &SumPolicy,
) -> Result<EvalResult> {
    if n < 1 {
        return Err(Error::Domain("F_(n,Q) requires n >= 1".into()));
    }
    let z = t_normalize(z);
    let d = -q.discriminant();
    let ku = k.k();
    let ki = ku as i32;
    let ni = n as i32;
    let kf = ku as f64;
    let sqrt_d = (d as f64).sqrt();
    let slices = class_slices(q, policy.coefficient_bound)?;
    let eps = slice_eps(policy);
    let mut extra_tail = 0.0;
    let mut terms = Vec::with_capacity(slices.len());
    let mut used = 0usize;
    for s in &slices {
        s.guard(z)?;
        let g = s.geometry(z);
        // Q_z^(n-2k-2j) is assembled as t^(2k-n+2j) with t = sqrt(D) y / E;
        // the leftover sqrt(D)^(n-2k) moves into the overall scale below.
        let (t, wing, n_used) = class_kernel_slice(
            &g,
            ki - ni,
            2 * ki - ni,
            sqrt_d * z.y,
            &mut HypCoeffs::new(kf - (ni as f64 - 1.0) / 2.0, kf - ni as f64 / 2.0, kf + 0.5),
            false,
            |m| fnq_kernel(k, n, &s.form_at(m), z, d),
            eps,
        )?;
        extra_tail += wing;
        used += n_used;
        terms.push((g.a, t));
    }
    let (sum, increment) = extrapolated_sum(&mut terms, policy.coefficient_bound as f64);
    let scale = (d as f64).powf(kf / 2.0) * sqrt_d.powi(ni - 2 * ki);
    let tail = scale.abs() * (increment + extra_tail);
    Ok(EvalResult::new(sum * scale, tail, used))
}

fn fnq_kernel(k: Weight, n: u32, f: &BinaryQuadraticForm, z: HPoint, d: i64) -> Result<Complex64> {
    let ki = k.k() as i32;
    let kf = k.k() as f64;
    let ni = n as i32;
    let qz = f.q_z(z);
    let om = f.q_value(z).norm_sqr() / (z.y * z.y * qz * qz);
    let hyp = specfun::gauss_2f1_c(
        kf - (ni as f64 - 1.0) / 2.0,
        kf - ni as f64 / 2.0,
        kf + 0.5,
        d as f64 / (qz * qz),
        om,
    )?;
    // Normalized to the expansion scale: the series carries the extra
    // sqrt(D)^(2k-n), divided back out of the exact kernel here.
    let sqrt_d = (d as f64).sqrt();
    Ok((qz / sqrt_d).powi(ni - 2 * ki) * f.q_value(z).powi(ki - ni) * hyp)
}

/// The disk test function g_{1-k}(z) = z^(k-1)
/// int_0^artanh((1-|z|^2)/(1+|z|^2)) sinh^(2k-2) dtheta, for 0 < |z| < 1.
pub fn eval_g1mk(k: Weight, z: Complex64) -> Result<Complex64> {
    let r_sq = z.norm_sqr();
    if r_sq >= 1.0 {
        return Err(Error::Domain(format!("g_(1-k) requires |z| < 1, got |z|^2 = {r_sq}")));
    }
    if z.norm() == 0.0 {
        return Err(Error::Domain("g_(1-k) requires z != 0".into()));
    }
    Ok(z.powi(k.k() as i32 - 1) * specfun::sinh_power_integral(k.k(), r_sq)?)
}

/// Complex 2x2 matrix acting by Moebius maps; carries the half-plane to
/// disk scaling matrix of the Poincare-series route for G_Q.
#[derive(Debug, Clone, Copy)]
struct ComplexMatrix {
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d: Complex64,
}

impl ComplexMatrix {
    /// A = (2 v)^(-1/2) [[1, -tau], [-i, i conj(tau)]], sending tau to 0
    /// and the half-plane to the unit disk (A z = i X_tau(z)).
    fn scaling_matrix(tau: HPoint) -> ComplexMatrix {
        let s = 1.0 / (2.0 * tau.y).sqrt();
        ComplexMatrix {
            a: Complex64::new(s, 0.0),
            b: -tau.to_complex() * s,
            c: Complex64::new(0.0, -s),
            d: Complex64::new(0.0, s) * tau.conj(),
        }
    }

    fn mul_int(&self, m: &UnimodularMatrix) -> ComplexMatrix {
        let (p, q, r, s) = (m.a as f64, m.b as f64, m.c as f64, m.d as f64);
        ComplexMatrix {
            a: self.a * p + self.b * r,
            b: self.a * q + self.b * s,
            c: self.c * p + self.d * r,
            d: self.c * q + self.d * s,
        }
    }

    fn apply(&self, z: Complex64) -> Complex64 {
        (self.a * z + self.b) / (self.c * z + self.d)
    }

    fn j(&self, z: Complex64) -> Complex64 {
        self.c * z + self.d
    }
}

/// Independent route for G_Q through the slashed disk function:
/// G_Q = i^(3(1-k)) sum_{Q' ~ Q} (g_{1-k} |_{2-2k} A_Q M_{Q'})(z), with
/// M_{Q'} the exact reduction witness carrying Q onto Q'.  Truncated over
/// `enumerate_class`, so coarser than `eval_gq`; it exists to cross-check
/// that route, not to replace it.
pub fn eval_gq_poincare(
    k: Weight,
    q: &BinaryQuadraticForm,
    z: HPoint,
    policy: &SumPolicy,
) -> Result<EvalResult> {
    if !q.is_positive_definite() {
        return Err(Error::Domain("eval_gq_poincare requires a positive-definite form".into()));
    }
    let z = t_normalize(z);
    let d = -q.discriminant();
    let ki = k.k() as i32;
    let forms = qform::enumerate_class(q, policy)?;
    let a_mat = ComplexMatrix::scaling_matrix(q.cm_point()?);
    let (_, u) = qform::reduce(q)?;
    let zc = z.to_complex();
    let mut terms = Vec::with_capacity(forms.len());
    for f in &forms {
        let slice = ClassSlice { a: f.a, b0: f.b.rem_euclid(2 * f.a), d };
        slice.guard(z)?;
        let (_, v) = qform::reduce(f)?;
        let witness = u.mul(&v.inverse());
        debug_assert_eq!(q.apply_matrix(&witness), *f);
        let am = a_mat.mul_int(&witness);
        let w = am.apply(zc);
        // Key on max(|a|, |b|/2): both the a- and b-truncations of the
        // flat enumeration leave O(1/cut) tails.
        let key = f.a.max(f.b.abs() / 2) as f64;
        terms.push((key, am.j(zc).powi(2 * ki - 2) * eval_g1mk(k, w)?));
    }
    let used = terms.len();
    let key_max = terms.iter().map(|e| e.0).fold(1.0, f64::max);
    let (sum, increment) = extrapolated_sum(&mut terms, key_max);
    let value = sum * i_pow(3 * (1 - ki as i64));
    Ok(EvalResult::new(value, increment, used))
}

// ---------------------------------------------------------------------------
// Coset-fiber sums: the two-variable families and Psi.
// ---------------------------------------------------------------------------

fn coset_slices_for(zz: HPoint, policy: &SumPolicy) -> Vec<CosetSlice> {
    // coefficient_bound caps the matrix height; bottom rows with
    // |c zz + d|^2 up to bound^2 * scale cover at least those heights.
    let scale = 1.0 + zz.x.abs() + zz.y;
    let norm_cut = (policy.coefficient_bound as f64 * scale).powi(2).min(1e14);
    hyperbolic::coset_slices(zz, norm_cut)
}

/// Single term f_n(z, zz) of the two-variable family.
pub fn eval_fn_pair(k: Weight, n: u32, z: HPoint, zz: HPoint) -> Result<Complex64> {
    let ki = k.k() as i32;
    let kf = k.k() as f64;
    let ni = n as i32;
    let x = hyperbolic::x_coord(zz, z);
    if x.norm() < SINGULAR_GUARD_R && ni != ki {
        return Err(Error::SingularPoint("f_n evaluated at its singular point".into()));
    }
    let cosh_d = hyperbolic::cosh_dist(z, zz);
    let zc = z.to_complex();
    let front = (zc.conj() - zz.to_complex()).powi(2 * ni - 2 * ki) / (2.0 * cosh_d.powi(ni));
    let mid = (x.conj() / (2.0 * z.y * z.y * zz.y)).powi(ni - ki);
    let om = 1.0 - 1.0 / (cosh_d * cosh_d);
    let hyp = specfun::gauss_2f1_c(
        ni as f64 / 2.0,
        (ni as f64 + 1.0) / 2.0,
        kf + 0.5,
        1.0 / (cosh_d * cosh_d),
        om,
    )?;
    Ok(front * mid * hyp)
}

/// Single term g(z, zz) of the two-variable companion of G_Q.
pub fn eval_g_pair(k: Weight, z: HPoint, zz: HPoint) -> Result<Complex64> {
    let ki = k.k() as i32;
    let r_sq = hyperbolic::x_coord(zz, z).norm_sqr();
    if r_sq.sqrt() < SINGULAR_GUARD_R {
        return Err(Error::SingularPoint("g evaluated at its singular point".into()));
    }
    let zc = z.to_complex();
    let front = ((zc - zz.to_complex()) * (zc - zz.conj()) / (2.0 * zz.y)).powi(ki - 1);
    Ok(0.5 * front * specfun::sinh_power_integral(k.k(), r_sq)?)
}

/// Fiber geometry for the coset sums: along w = w0 + m,
///   2 y w2 cosh d(z, w) = (m + g)^2 + h^2 with h^2 = y^2 + w2^2,
/// and the Moebius factors contribute the roots gamma1 = w0 - conj z,
/// gamma2 = conj(w0) - conj z, which cluster onto g ± i h.
pub(crate) struct CosetGeometry {
    pub g: f64,
    pub h: f64,
    pub gamma1: Complex64,
    pub gamma2: Complex64,
    pub w2: f64,
    /// 1/cosh at the fiber minimum: the kernel-expansion argument.
    pub ratio: f64,
}

pub(crate) fn coset_geometry(slice: &CosetSlice, z: HPoint) -> CosetGeometry {
    let w2 = slice.w2;
    let h = (z.y * z.y + w2 * w2).sqrt();
    let g = slice.w0.re - z.x;
    CosetGeometry {
        g,
        h,
        gamma1: slice.w0 - Complex64::new(z.x, -z.y),
        gamma2: slice.w0.conj() - Complex64::new(z.x, -z.y),
        w2,
        ratio: 2.0 * z.y * w2 / (h * h),
    }
}

/// Guard: the fiber contains a point within the r-guard of z.
pub(crate) fn coset_guard(geo: &CosetGeometry, z: HPoint) -> Result<()> {
    let m_star = (-geo.g).round();
    let cosh_min = ((m_star + geo.g).powi(2) + geo.h * geo.h) / (2.0 * z.y * geo.w2);
    let r_sq = (cosh_min - 1.0) / (cosh_min + 1.0);
    if r_sq < SINGULAR_GUARD_R * SINGULAR_GUARD_R {
        return Err(Error::SingularPoint("evaluation on the singular orbit".into()));
    }
    Ok(())
}

/// Cluster the gamma-roots onto the centers g + ih / g - ih by the sign of
/// their imaginary part.
pub(crate) fn coset_cluster(geo: &CosetGeometry, factors: &[(Complex64, i32)]) -> ClusteredSlice {
    let gp = Complex64::new(geo.g, geo.h);
    let gm = Complex64::new(geo.g, -geo.h);
    let mut upper = Vec::new();
    let mut lower = Vec::new();
    for &f in factors {
        if f.0.im >= 0.0 {
            upper.push(f);
        } else {
            lower.push(f);
        }
    }
    ClusteredSlice::new(gp, gm, &upper, &lower)
}

/// One coset fiber of a kernel
///   front * prod (m+gamma)^(p) * sum_j coef_j (2 y w2)^(e0+2j) E^-(e0+2j),
/// E = (m+g)^2 + h^2.  The series result carries `front`; when the fiber
/// falls back to direct summation the exact kernel is used instead and the
/// returned flag tells the caller to skip its series post-processing.
#[allow(clippy::too_many_arguments)]
pub(crate) fn coset_kernel_slice<F>(
    geo: &CosetGeometry,
    z: HPoint,
    gammas: &[(Complex64, i32)],
    e0: i32,
    front: Complex64,
    coeffs: &mut HypCoeffs,
    extra_inverse_power: bool,
    exact_kernel: F,
    eps: f64,
    decay: i32,
) -> Result<CosetSliceValue>
where
    F: Fn(i64) -> Result<Complex64>,
{
    let m0 = (-geo.g).round() as i64;
    if geo.ratio > SERIES_RATIO_MAX {
        let (v, wing, used) = adaptive_fiber_window(m0, eps, decay, exact_kernel)?;
        return Ok(CosetSliceValue { value: v, wing, used, direct: true });
    }
    let mut cluster = coset_cluster(geo, gammas);
    if cluster.ratio > CLUSTER_RATIO_MAX {
        let (v, wing, used) = adaptive_fiber_window(m0, eps, decay, exact_kernel)?;
        return Ok(CosetSliceValue { value: v, wing, used, direct: true });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    let base = 2.0 * z.y * geo.w2;
    let mut pow = base.powi(e0);
    let mut small_streak = 0;
    for j in 0..MAX_SERIES_TERMS {
        let coef = if extra_inverse_power {
            coeffs.next() / (e0 as f64 + 2.0 * j as f64)
        } else {
            coeffs.next()
        };
        let term = coef * pow * cluster.sum_e(e0 + 2 * j as i32, eps)?;
        acc += term;
        if term.norm() < eps * (1.0 + acc.norm()) {
            small_streak += 1;
            if small_streak >= 2 {
                return Ok(CosetSliceValue { value: front * acc, wing: 0.0, used: 1, direct: false });
            }
        } else {
            small_streak = 0;
        }
        pow *= base * base;
    }
    Err(Error::Precision("kernel expansion did not converge on a fiber".into()))
}

pub(crate) struct CosetSliceValue {
    pub value: Complex64,
    pub wing: f64,
    pub used: usize,
    pub direct: bool,
}

/// F_n(z, zz) = sum_{SL2(Z)/Gamma_zz} f_n(z, M zz) = (2/omega) over coset
/// fibers.  For n < k the direct kernel has negative powers of the
/// clustered roots, so those fibers go through the equivalent raised form
/// of the kernel (conjugated Legendre derivative), which carries only
/// nonnegative root powers.
pub fn eval_fn_sum(
    k: Weight,
    n: u32,
    z: HPoint,
    zz: HPoint,
    policy: &SumPolicy,
) -> Result<EvalResult> {
    if n < 1 {
        return Err(Error::Domain("F_n requires n >= 1".into()));
    }
    let z = t_normalize(z);
    let ku = k.k();
    let ki = ku as i32;
    let ni = n as i32;
    let kf = ku as f64;
    let omega = hyperbolic::stabilizer_order(zz) as f64;
    let slices = coset_slices_for(zz, policy);
    let eps = slice_eps(policy);
    let mut extra_tail = 0.0;
    let mut terms = Vec::with_capacity(slices.len());
    let mut used = 0usize;
    for slice in &slices {
        let geo = coset_geometry(slice, z);
        if ni != ki {
            coset_guard(&geo, z)?;
        }
        let sv = if ni >= ki {
            // Direct form: (1/2)(2 y^2 w2)^(k-n) (m+g1)^(n-k)(m+g2)^(n-k)
            //              sum_j coef (2 y w2)^(n+2j) E^-(n+2j).
            let front = 0.5 * (2.0 * z.y * z.y * geo.w2).powi(ki - ni);
            coset_kernel_slice(
                &geo,
                z,
                &[(geo.gamma1, ni - ki), (geo.gamma2, ni - ki)],
                ni,
                Complex64::new(front, 0.0),
                &mut HypCoeffs::new(ni as f64 / 2.0, (ni as f64 + 1.0) / 2.0, kf + 0.5),
                false,
                |m| eval_fn_pair(k, n, z, HPoint::new(slice.w0.re + m as f64, slice.w2)),
                eps,
                2 * ki,
            )?
        } else {
            // Raised form: f_n = y^(2k-2n) conj[ (1/2)(2 y^2 w2)^(n-k)
            //   (m+g1)^(k-n)(m+g2)^(k-n) sum_j coef' (2yw2)^(2k-n+2j)
            //   E^-(2k-n+2j) ]: the Legendre-derivative shape of the same
            //   kernel, which keeps the clustered root powers nonnegative.
            let jj = ki - ni;
            let front = 0.5 * (2.0 * z.y * z.y * geo.w2).powi(-jj);
            let mut sv = coset_kernel_slice(
                &geo,
                z,
                &[(geo.gamma1, jj), (geo.gamma2, jj)],
                2 * ki - ni,
                Complex64::new(front, 0.0),
                &mut HypCoeffs::new(
                    (2.0 * kf - ni as f64 + 1.0) / 2.0,
                    (2.0 * kf - ni as f64) / 2.0,
                    kf + 0.5,
                ),
                false,
                |m| eval_fn_pair(k, n, z, HPoint::new(slice.w0.re + m as f64, slice.w2)),
                eps,
                2 * ki,
            )?;
            if !sv.direct {
                sv.value = z.y.powi(2 * (ki - ni)) * sv.value.conj();
            }
            sv
        };
        extra_tail += sv.wing;
        used += sv.used;
        terms.push((slice.norm, sv.value));
    }
    let key_max = terms.iter().map(|e| e.0).fold(1.0, f64::max);
    let (sum, increment) = extrapolated_sum(&mut terms, key_max);
    let value = sum * 2.0 / omega;
    let tail = 2.0 / omega * (increment + extra_tail);
    Ok(EvalResult::new(value, tail, used))
}

/// G_1(z, zz) = sum_{SL2(Z)/Gamma_zz} g(z, M zz), fibers summed exactly
/// after expanding the sinh-power integral in 1/cosh.
pub fn eval_g1_sum(k: Weight, z: HPoint, zz: HPoint, policy: &SumPolicy) -> Result<EvalResult> {
    let z = t_normalize(z);
    let ku = k.k();
    let ki = ku as i32;
    let kf = ku as f64;
    let omega = hyperbolic::stabilizer_order(zz) as f64;
    let slices = coset_slices_for(zz, policy);
    let eps = slice_eps(policy);
    let mut extra_tail = 0.0;
    let mut terms = Vec::with_capacity(slices.len());
    let mut used = 0usize;
    for slice in &slices {
        let geo = coset_geometry(slice, z);
        coset_guard(&geo, z)?;
        // g(z, w0+m) = (1/2)(2 w2)^(1-k)(m+g1')^(k-1)(m+g2')^(k-1)
        //              sum_j c_j (2 y w2)^(2k-1+2j) E^-(2k-1+2j),
        // with g1' = w0 - z, g2' = conj(w0) - z.
        let gamma1 = slice.w0 - z.to_complex();
        let gamma2 = slice.w0.conj() - z.to_complex();
        let front = 0.5 * (2.0 * geo.w2).powi(1 - ki);
        let sv = coset_kernel_slice(
            &geo,
            z,
            &[(gamma1, ki - 1), (gamma2, ki - 1)],
            2 * ki - 1,
            Complex64::new(front, 0.0),
            &mut HypCoeffs::new(kf, 1.0, 1.0),
            true,
            |m| eval_g_pair(k, z, HPoint::new(slice.w0.re + m as f64, slice.w2)),
            eps,
            2 * ki,
        )?;
        extra_tail += sv.wing;
        used += sv.used;
        terms.push((slice.norm, sv.value));
    }
    let key_max = terms.iter().map(|e| e.0).fold(1.0, f64::max);
    let (sum, increment) = extrapolated_sum(&mut terms, key_max);
    let value = sum * 2.0 / omega;
    let tail = 2.0 / omega * (increment + extra_tail);
    Ok(EvalResult::new(value, tail, used))
}

/// Petersson's elliptic Poincare series
/// Psi_{kappa,m}(z, zz) = sum_{M in SL2(Z)} ((z - conj zz)^(-kappa)
/// X_zz^m(z)) |_kappa M.  The summand is rational along every z-side
/// fiber, so each coset is summed in closed form with no kernel expansion;
/// the two poles are separated by 2 Im(zz) and need no clustering.
pub fn eval_psi(
    kappa: u32,
    m: i64,
    z: HPoint,
    zz: HPoint,
    policy: &SumPolicy,
) -> Result<EvalResult> {
    if kappa <= 2 || kappa % 2 != 0 {
        return Err(Error::Domain(format!("Psi requires even weight kappa > 2, got {kappa}")));
    }
    let ki = kappa as i32;
    if m < 0 && orbit_close(z, zz, SINGULAR_GUARD_R) {
        return Err(Error::SingularPoint("Psi evaluated on its pole orbit".into()));
    }
    let z = t_normalize(z);
    let slices = coset_slices_for(z, policy);
    let zzc = zz.to_complex();
    let zzbar = zz.conj();
    let mut terms = Vec::with_capacity(slices.len());
    for slice in &slices {
        // phi(w) = (w - zz)^m (w - conj zz)^(-kappa - m) along w = w0 + n.
        let mut tp = TwoPole::new(slice.w0 - zzc, slice.w0 - zzbar);
        let jfac = Complex64::new(slice.c as f64 * z.x + slice.d as f64, slice.c as f64 * z.y);
        let t = jfac.powi(-ki) * tp.sum(m as i32, -ki - m as i32)?;
        terms.push((slice.norm, t));
    }
    let used = terms.len();
    let key_max = terms.iter().map(|e| e.0).fold(1.0, f64::max);
    let (sum, increment) = extrapolated_sum(&mut terms, key_max);
    Ok(EvalResult::new(2.0 * sum, 2.0 * increment, used))
}
