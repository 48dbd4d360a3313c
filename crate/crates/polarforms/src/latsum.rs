//! Exact summation over an integer translation fiber.
//!
//! Every lattice sum in this crate decomposes into slices along which the
//! summand is a rational function of an integer m (a T-orbit of quadratic
//! forms, or a T-coset of SL2(Z)).  Such a slice is summed in closed form
//! through partial fractions and the classical values
//!
//!   S_j(w) = sum_{m in Z} (w + m)^(-j),
//!
//! S_1 = pi cot(pi w) (symmetric principal value), S_{j+1} = -S_j'/j.
//! Collapsing the fiber exactly is what makes the outer truncation error
//! decay fast enough for the tolerances used downstream; direct
//! b-truncation of these series loses to an O(1/A) envelope.

use num_complex::Complex64;

use crate::error::{Error, Result};

const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// How far from the real axis the exponential u-series for S_j is used.
/// Below it the cot-polynomial forms take over: they stay near machine
/// accuracy for |Im w| up to ~0.5, while the u-series needs |u| small to
/// avoid cancellation at high j.
const IM_SWITCH: f64 = 0.5;

const MAX_J: usize = 96;

/// One factor (m + gamma)^exp of a rational summand; positive exponents are
/// numerator polynomial factors.
#[derive(Debug, Clone, Copy)]
pub struct PoleFactor {
    pub gamma: Complex64,
    pub exp: i32,
}

impl PoleFactor {
    pub fn new(gamma: Complex64, exp: i32) -> Self {
        PoleFactor { gamma, exp }
    }
}

/// S_1..S_jmax at w.  Needs w not an integer (a pole of the summand).
fn s_values(w: Complex64, j_max: usize) -> Result<Vec<Complex64>> {
    debug_assert!(j_max >= 1 && j_max <= MAX_J);
    if w.im >= IM_SWITCH {
        Ok(s_values_series(w, j_max))
    } else if w.im <= -IM_SWITCH {
        let conj = s_values_series(w.conj(), j_max);
        Ok(conj.into_iter().map(|v| v.conj()).collect())
    } else {
        s_values_cot(w, j_max)
    }
}

/// u-series for Im w > 0: S_j = (-1)^j (2 pi i)^j / (j-1)! sum_n n^(j-1) u^n,
/// u = exp(2 pi i w), with the constant -i pi added for j = 1.
fn s_values_series(w: Complex64, j_max: usize) -> Vec<Complex64> {
    let u = (Complex64::new(0.0, TWO_PI) * w).exp();
    let mut sums = vec![Complex64::new(0.0, 0.0); j_max + 1];
    let mut un = Complex64::new(1.0, 0.0);
    let abs_u = u.norm();
    let mut n = 1usize;
    loop {
        un *= u;
        let nf = n as f64;
        let mut npow = 1.0;
        for j in 1..=j_max {
            sums[j] += npow * un;
            npow *= nf;
        }
        // Remaining tail is below double rounding once n^(jmax) |u|^n dies.
        if abs_u.powi(n as i32) * nf.powi(j_max as i32) < 1e-22 || n > 5000 {
            break;
        }
        n += 1;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); j_max + 1];
    let two_pi_i = Complex64::new(0.0, TWO_PI);
    let mut fact = 1.0;
    let mut power = Complex64::new(1.0, 0.0);
    for j in 1..=j_max {
        power *= two_pi_i;
        if j > 1 {
            fact *= (j - 1) as f64;
        }
        let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
        out[j] = sign * power / fact * sums[j];
    }
    out[1] += Complex64::new(0.0, -std::f64::consts::PI);
    out
}

/// Near the real axis: S_j = pi^j P_j(cot(pi w)) with P_1 = c and
/// P_{j+1} = (1 + c^2) P_j' / j.
fn s_values_cot(w: Complex64, j_max: usize) -> Result<Vec<Complex64>> {
    let dist = (w.re - w.re.round()).abs().max(w.im.abs());
    if dist < 1e-12 {
        return Err(Error::SingularPoint("lattice line sum has a pole at an integer".into()));
    }
    let pw = w * std::f64::consts::PI;
    let c = pw.cos() / pw.sin();
    let tables = cot_tables();
    let mut out = vec![Complex64::new(0.0, 0.0); j_max + 1];
    let mut pi_pow = 1.0;
    for j in 1..=j_max {
        pi_pow *= std::f64::consts::PI;
        // Horner evaluation of P_j at c.
        let coeffs = &tables[j];
        let mut acc = Complex64::new(0.0, 0.0);
        for &a in coeffs.iter().rev() {
            acc = acc * c + a;
        }
        out[j] = pi_pow * acc;
    }
    Ok(out)
}

fn cot_tables() -> &'static Vec<Vec<f64>> {
    use std::sync::OnceLock;
    static TABLES: OnceLock<Vec<Vec<f64>>> = OnceLock::new();
    TABLES.get_or_init(|| {
        // P_j as coefficient vectors in c, index 0..=j.
        let mut tables: Vec<Vec<f64>> = vec![vec![], vec![0.0, 1.0]];
        for j in 1..MAX_J {
            let p = &tables[j];
            // derivative
            let mut dp = vec![0.0; p.len().max(1) - 1];
            for (r, &a) in p.iter().enumerate().skip(1) {
                dp[r - 1] = a * r as f64;
            }
            // (1 + c^2) dp / j
            let mut next = vec![0.0; dp.len() + 2];
            for (r, &a) in dp.iter().enumerate() {
                next[r] += a / j as f64;
                next[r + 2] += a / j as f64;
            }
            tables.push(next);
        }
        tables
    })
}

/// Multiply truncated power series (length cap `n`).
fn mul_series(a: &[Complex64], b: &[Complex64], n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    for (i, &ai) in a.iter().enumerate().take(n) {
        if ai == Complex64::new(0.0, 0.0) {
            continue;
        }
        for (j, &bj) in b.iter().enumerate().take(n - i) {
            out[i + j] += ai * bj;
        }
    }
    out
}

/// Coefficients of (t + d)^e around t = 0, truncated to length n.
fn binom_series(d: Complex64, e: i32, n: usize) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(0.0, 0.0); n];
    // binom(e, r) d^(e - r)
    let mut coef = d.powi(e);
    let mut binom = 1.0;
    for r in 0..n {
        if e >= 0 && r as i32 > e {
            break;
        }
        out[r] = binom * coef;
        binom *= (e as f64 - r as f64) / (r as f64 + 1.0);
        coef /= d;
    }
    out
}

fn eval_factors(factors: &[PoleFactor], m: f64) -> Complex64 {
    let mut acc = Complex64::new(1.0, 0.0);
    for f in factors {
        acc *= (f.gamma + m).powi(f.exp);
    }
    acc
}

/// sum_{m in Z} prod_i (m + gamma_i)^(e_i), total degree <= -2.
pub fn line_sum(factors: &[PoleFactor]) -> Result<Complex64> {
    let merged = merge(factors);
    let total: i32 = merged.iter().map(|f| f.exp).sum();
    if total > -2 {
        return Err(Error::Domain(format!(
            "line_sum needs total degree <= -2, got {total}"
        )));
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, fi) in merged.iter().enumerate() {
        if fi.exp >= 0 {
            continue;
        }
        let p = (-fi.exp) as usize;
        if p > MAX_J {
            return Err(Error::Domain(format!("pole order {p} exceeds the S_j table")));
        }
        // Taylor coefficients of prod_{l != i} (t + (gamma_l - gamma_i))^(e_l).
        let mut series = vec![Complex64::new(0.0, 0.0); p];
        series[0] = Complex64::new(1.0, 0.0);
        for (l, fl) in merged.iter().enumerate() {
            if l == i {
                continue;
            }
            let d = fl.gamma - fi.gamma;
            if d.norm() < 1e-14 {
                return Err(Error::Precision(
                    "nearly coincident poles in partial fractions".into(),
                ));
            }
            series = mul_series(&series, &binom_series(d, fl.exp, p), p);
        }
        let s = s_values(fi.gamma, p)?;
        for (r, &cr) in series.iter().enumerate() {
            acc += cr * s[p - r];
        }
    }
    Ok(acc)
}

/// Same, excluding the integer window m in [lo, hi].
pub fn line_sum_excluding(factors: &[PoleFactor], lo: i64, hi: i64) -> Result<Complex64> {
    let mut acc = line_sum(factors)?;
    for m in lo..=hi {
        acc -= eval_factors(factors, m as f64);
    }
    Ok(acc)
}

/// Fiber sums against two fixed, well-separated pole centers, with the
/// S_j vectors cached and extended on demand.
///
/// The slice kernels cluster their remaining roots around these centers
/// (the clusters shrink like the reciprocal leading coefficient), so the
/// callers expand the near factors binomially and reduce every term to
/// `sum(ep, em)` here.  Partial fractions between the two centers stay
/// well conditioned because their separation is comparable to their
/// distance from the summation line.
pub struct TwoPole {
    pub gp: Complex64,
    pub gm: Complex64,
    sp: Vec<Complex64>,
    sm: Vec<Complex64>,
}

impl TwoPole {
    pub fn new(gp: Complex64, gm: Complex64) -> TwoPole {
        TwoPole { gp, gm, sp: Vec::new(), sm: Vec::new() }
    }

    fn ensure(&mut self, j: usize) -> Result<()> {
        if j > MAX_J {
            return Err(Error::Domain(format!("pole order {j} exceeds the S_j table")));
        }
        if self.sp.len() <= j {
            self.sp = s_values(self.gp, j.max(8))?;
            self.sm = s_values(self.gm, j.max(8))?;
        }
        Ok(())
    }

    /// sum_{m in Z} (m + gp)^(ep) (m + gm)^(em), ep + em <= -2.
    pub fn sum(&mut self, ep: i32, em: i32) -> Result<Complex64> {
        if ep + em > -2 {
            return Err(Error::Domain(format!(
                "two-pole sum needs total degree <= -2, got {ep} + {em}"
            )));
        }
        if ep > 0 {
            // Polynomial factor: expand (m+gp)^ep = ((m+gm) + (gp-gm))^ep.
            let m = (-em) as usize;
            self.ensure(m)?;
            let d = self.gp - self.gm;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            let mut dpow = d.powi(ep);
            for i in 0..=ep {
                acc += binom * dpow * self.sm[m - i as usize];
                binom *= (ep - i) as f64 / (i + 1) as f64;
                dpow /= d;
            }
            return Ok(acc);
        }
        if em > 0 {
            let p = (-ep) as usize;
            self.ensure(p)?;
            let d = self.gm - self.gp;
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            let mut dpow = d.powi(em);
            for i in 0..=em {
                acc += binom * dpow * self.sp[p - i as usize];
                binom *= (em - i) as f64 / (i + 1) as f64;
                dpow /= d;
            }
            return Ok(acc);
        }
        let p = (-ep) as usize;
        let m = (-em) as usize;
        if p == 0 {
            self.ensure(m)?;
            return Ok(self.sm[m]);
        }
        if m == 0 {
            self.ensure(p)?;
            return Ok(self.sp[p]);
        }
        self.ensure(p.max(m))?;
        // 1/(X^p Y^m), Y = X + delta: coefficient of X^(-j) is
        // C(m-1+p-j, p-j) (-1)^(p-j) delta^(j-p-m), and symmetrically.
        let delta = self.gm - self.gp;
        let mut acc = Complex64::new(0.0, 0.0);
        for j in 1..=p {
            let c = binom_u((m + p - j - 1) as u32, (p - j) as u32)
                * if (p - j) % 2 == 0 { 1.0 } else { -1.0 };
            acc += c * delta.powi(j as i32 - (p + m) as i32) * self.sp[j];
        }
        for j in 1..=m {
            let c = binom_u((p + m - j - 1) as u32, (m - j) as u32)
                * if (m - j) % 2 == 0 { 1.0 } else { -1.0 };
            acc += c * (-delta).powi(j as i32 - (p + m) as i32) * self.sm[j];
        }
        Ok(acc)
    }
}

/// Fiber sums of kernels
///   prod_i (m + gamma_i)^(p_i) * ((m + G+)(m + G-))^(-e)
/// whose roots gamma_i cluster around the two centers G±.  The clustered
/// factors are expanded binomially around their center once; each kernel
/// power e then reduces to cached two-pole sums.  `ratio` reports the
/// worst |gamma - center| / Im-distance, the callers' conditioning gate.
pub struct ClusteredSlice {
    tp: TwoPole,
    up: Vec<Complex64>,
    low: Vec<Complex64>,
    up_deg: i32,
    low_deg: i32,
    pub ratio: f64,
}

const CLUSTER_TERMS: usize = 56;

impl ClusteredSlice {
    pub fn new(
        gp: Complex64,
        gm: Complex64,
        upper: &[(Complex64, i32)],
        lower: &[(Complex64, i32)],
    ) -> ClusteredSlice {
        let scale = (gp - gm).norm() / 2.0;
        let mut ratio = 0.0f64;
        let mut expand = |factors: &[(Complex64, i32)], center: Complex64| -> (Vec<Complex64>, i32) {
            let mut coeffs = vec![Complex64::new(0.0, 0.0); CLUSTER_TERMS];
            coeffs[0] = Complex64::new(1.0, 0.0);
            let mut deg = 0i32;
            for &(gamma, p) in factors {
                if p == 0 {
                    continue;
                }
                deg += p;
                let d = gamma - center;
                ratio = ratio.max(d.norm() / scale);
                // (1 + d u)^p as a series in u.
                let mut series = vec![Complex64::new(0.0, 0.0); CLUSTER_TERMS];
                let mut binom = 1.0;
                let mut dpow = Complex64::new(1.0, 0.0);
                for r in 0..CLUSTER_TERMS {
                    if p >= 0 && r as i32 > p {
                        break;
                    }
                    series[r] = binom * dpow;
                    binom *= (p as f64 - r as f64) / (r as f64 + 1.0);
                    dpow *= d;
                }
                coeffs = mul_series(&coeffs, &series, CLUSTER_TERMS);
            }
            (coeffs, deg)
        };
        let (up, up_deg) = expand(upper, gp);
        let (low, low_deg) = expand(lower, gm);
        ClusteredSlice { tp: TwoPole::new(gp, gm), up, low, up_deg, low_deg, ratio }
    }

    /// sum_m [clustered factors] ((m+G+)(m+G-))^(-e).
    pub fn sum_e(&mut self, e: i32, eps: f64) -> Result<Complex64> {
        let mut acc = Complex64::new(0.0, 0.0);
        let mut quiet = 0;
        for diag in 0..CLUSTER_TERMS {
            let mut shell = Complex64::new(0.0, 0.0);
            for t in 0..=diag {
                let s = diag - t;
                let ct = self.up[t];
                let cs = self.low[s];
                if ct == Complex64::new(0.0, 0.0) || cs == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let ep = self.up_deg - t as i32 - e;
                let em = self.low_deg - s as i32 - e;
                shell += ct * cs * self.tp.sum(ep, em)?;
            }
            acc += shell;
            if shell.norm() < eps * (1.0 + acc.norm()) && diag > 0 {
                quiet += 1;
                if quiet >= 2 {
                    return Ok(acc);
                }
            } else {
                quiet = 0;
            }
        }
        Err(Error::Precision("cluster expansion did not converge on a fiber".into()))
    }
}

fn binom_u(n: u32, k: u32) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut acc = 1.0;
    for i in 0..k as u64 {
        acc = acc * (n as u64 - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// sum_{m in Z} ((m + zeta)^2 + s)^(-k) by expanding in s around the
/// double pole line: sum_r binom(-k, r) s^r S_{2k+2r}(zeta).  Valid when
/// |s| is small against dist(zeta, Z)^2; the quadratic families use it for
/// their far fibers where the two roots nearly coincide.  The S-vector is
/// extended lazily since far fibers need only a couple of terms.
pub fn quadratic_line_sum(zeta: Complex64, s: f64, k: i32, eps: f64) -> Result<Complex64> {
    let mut order = (2 * k as usize + 8).min(MAX_J);
    let mut sv = s_values(zeta, order)?;
    let mut acc = Complex64::new(0.0, 0.0);
    let mut coef = 1.0f64;
    let mut spow = 1.0f64;
    for r in 0..((MAX_J - 2 * k as usize) / 2) {
        let need = 2 * k as usize + 2 * r;
        if need > order {
            order = (need + 16).min(MAX_J);
            sv = s_values(zeta, order)?;
        }
        let term = coef * spow * sv[need];
        acc += term;
        if term.norm() < eps * (1.0 + acc.norm()) && r > 0 {
            return Ok(acc);
        }
        coef *= (-k as f64 - r as f64) / (r as f64 + 1.0);
        spow *= s;
    }
    Err(Error::Precision("quadratic line sum expansion did not converge".into()))
}

fn merge(factors: &[PoleFactor]) -> Vec<PoleFactor> {
    let mut out: Vec<PoleFactor> = Vec::with_capacity(factors.len());
    'outer: for f in factors {
        if f.exp == 0 {
            continue;
        }
        for g in out.iter_mut() {
            if (g.gamma - f.gamma).norm() == 0.0 {
                g.exp += f.exp;
                continue 'outer;
            }
        }
        out.push(*f);
    }
    out.retain(|f| f.exp != 0);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn brute(factors: &[PoleFactor], bound: i64) -> Complex64 {
        let mut acc = Complex64::new(0.0, 0.0);
        // Symmetric partial sums, big |m| first for stability.
        for m in (1..=bound).rev() {
            acc += eval_factors(factors, m as f64) + eval_factors(factors, -(m as f64));
        }
        acc + eval_factors(factors, 0.0)
    }

    #[test]
    fn s_values_match_brute_force() {
        for &w in &[
            c(0.3, 1.7),
            c(-0.2, 0.04),
            c(0.45, -0.8),
            c(0.1, 0.051),
            c(1.4, -0.02),
            c(0.5, 0.0),
        ] {
            let s = s_values(w, 6).unwrap();
            for j in 2..=6usize {
                let n = 200_000i64;
                let mut acc = Complex64::new(0.0, 0.0);
                for m in (1..=n).rev() {
                    acc += (w + m as f64).powi(-(j as i32)) + (w - m as f64).powi(-(j as i32));
                }
                acc += w.powi(-(j as i32));
                // Integral correction for the truncated wings.
                let e = 1 - j as i32;
                acc += ((w + (n as f64 + 0.5)).powi(e) - (w - (n as f64 + 0.5)).powi(e))
                    / (j as f64 - 1.0);
                assert!(
                    (s[j] - acc).norm() < 1e-10 * (1.0 + acc.norm()),
                    "S_{j}({w}): {} vs {acc}",
                    s[j]
                );
            }
            // S_1 against the cot closed form directly.
            let pw = w * std::f64::consts::PI;
            let cot = pw.cos() / pw.sin() * std::f64::consts::PI;
            assert!((s[1] - cot).norm() < 1e-9 * (1.0 + cot.norm()));
        }
    }

    #[test]
    fn series_and_cot_paths_agree() {
        // Both internal routes evaluated at the same points, in the band
        // around the switchover line where each stays accurate.
        for &re in &[0.17, -0.4, 0.5] {
            for &im in &[0.4, IM_SWITCH, 0.6] {
                let w = c(re, im);
                let a = s_values_series(w, 8);
                let b = s_values_cot(w, 8).unwrap();
                for j in 1..=8 {
                    assert!(
                        (a[j] - b[j]).norm() < 1e-9 * (1.0 + b[j].norm()),
                        "j = {j} at {w}"
                    );
                }
            }
        }
    }

    #[test]
    fn line_sum_simple_double_pole() {
        // sum 1/((m+w)^2): S_2 directly.
        let w = c(0.37, 0.9);
        let got = line_sum(&[PoleFactor::new(w, -2)]).unwrap();
        let expect = s_values(w, 2).unwrap()[2];
        assert!((got - expect).norm() < 1e-13 * expect.norm());
    }

    #[test]
    fn line_sum_two_pole_products_vs_brute_force() {
        let cases: Vec<Vec<PoleFactor>> = vec![
            vec![PoleFactor::new(c(0.3, 2.1), -2), PoleFactor::new(c(0.3, -0.9), -2)],
            vec![PoleFactor::new(c(-0.7, 1.3), -3), PoleFactor::new(c(0.2, 0.4), -1)],
            vec![
                PoleFactor::new(c(0.25, 0.8), -2),
                PoleFactor::new(c(-0.4, -1.1), -2),
                PoleFactor::new(c(0.1, 2.0), -2),
            ],
            // Numerator polynomial factors.
            vec![
                PoleFactor::new(c(0.9, 0.5), 2),
                PoleFactor::new(c(0.0, 1.0), -2),
                PoleFactor::new(c(0.3, -1.2), -3),
            ],
            vec![
                PoleFactor::new(c(-0.3, 0.02), -2),
                PoleFactor::new(c(0.6, -0.03), -2),
            ],
        ];
        for factors in &cases {
            let got = line_sum(factors).unwrap();
            let b = brute(factors, 400_000);
            assert!(
                (got - b).norm() < 1e-8 * (1.0 + b.norm()),
                "{factors:?}: {got} vs {b}"
            );
        }
    }

    #[test]
    fn line_sum_window_exclusion() {
        let factors = vec![
            PoleFactor::new(c(0.3, 1.1), -2),
            PoleFactor::new(c(-0.2, -0.7), -2),
        ];
        let full = line_sum(&factors).unwrap();
        let outside = line_sum_excluding(&factors, -3, 5).unwrap();
        let mut window = Complex64::new(0.0, 0.0);
        for m in -3..=5 {
            window += eval_factors(&factors, m as f64);
        }
        assert!((outside + window - full).norm() < 1e-14 * (1.0 + full.norm()));
    }

    #[test]
    fn line_sum_rejects_divergent_degree() {
        assert!(line_sum(&[PoleFactor::new(c(0.5, 1.0), -1)]).is_err());
        assert!(line_sum(&[
            PoleFactor::new(c(0.5, 1.0), 2),
            PoleFactor::new(c(0.1, -0.5), -3)
        ])
        .is_err());
    }

    #[test]
    fn merged_repeat_poles() {
        // Same gamma passed twice merges exponents.
        let g = c(0.4, 0.9);
        let got = line_sum(&[
            PoleFactor::new(g, -1),
            PoleFactor::new(g, -1),
            PoleFactor::new(c(-0.1, -1.3), -2),
        ])
        .unwrap();
        let b = brute(
            &[PoleFactor::new(g, -2), PoleFactor::new(c(-0.1, -1.3), -2)],
            400_000,
        );
        assert!((got - b).norm() < 1e-8 * (1.0 + b.norm()));
    }
}
