//! Scalar special functions: the Gauss hypergeometric function on [0, 1),
//! Legendre functions of the second kind, incomplete beta functions with
//! negative integer second parameter, and the regularized beta_0 with its
//! finite correction constant.
//!
//! All kernels work in binary64.  Series terminate when a term drops below
//! 1e-17 relative to the partial sum, with a hard cap of 10_000 terms.

use crate::error::{Error, Result};

const REL_EPS: f64 = 1e-17;
const MAX_TERMS: usize = 10_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

/// Gamma function for x > 0.  Half-integer and integer arguments use the
/// exact recursion from Gamma(1) = 1 and Gamma(1/2) = sqrt(pi); other
/// arguments fall back to a Lanczos approximation.
pub fn gamma(x: f64) -> f64 {
    let twice = 2.0 * x;
    if x > 0.0 && twice.fract() == 0.0 && twice <= 700.0 {
        let mut acc = if (twice as i64) % 2 == 0 {
            1.0
        } else {
            std::f64::consts::PI.sqrt()
        };
        let mut t = if (twice as i64) % 2 == 0 { 1.0 } else { 0.5 };
        while t + 1.0 <= x {
            acc *= t;
            t += 1.0;
        }
        return acc;
    }
    lanczos_gamma(x)
}

/// 1 / Gamma(x); zero at the poles x = 0, -1, -2, ...
pub fn rgamma(x: f64) -> f64 {
    if x <= 0.0 && x.fract() == 0.0 {
        return 0.0;
    }
    1.0 / gamma_signed(x)
}

fn gamma_signed(x: f64) -> f64 {
    if x > 0.0 {
        gamma(x)
    } else {
        // Reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x).
        std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * gamma(1.0 - x))
    }
}

fn lanczos_gamma(x: f64) -> f64 {
    // g = 7, n = 9 coefficients (Godfrey / Numerical Recipes).
    const G: f64 = 7.0;
    const C: [f64; 9] = [
        0.999_999_999_999_809_93,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_13,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_571_6e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        return std::f64::consts::PI / ((std::f64::consts::PI * x).sin() * lanczos_gamma(1.0 - x));
    }
    let xm = x - 1.0;
    let mut acc = C[0];
    for (i, &c) in C.iter().enumerate().skip(1) {
        acc += c / (xm + i as f64);
    }
    let t = xm + G + 0.5;
    (2.0 * std::f64::consts::PI).sqrt() * t.powf(xm + 0.5) * (-t).exp() * acc
}

/// Digamma for x > 0.  Half-integers use the exact recursion from
/// psi(1) = -gamma and psi(1/2) = -gamma - 2 ln 2.
pub fn digamma(x: f64) -> f64 {
    let twice = 2.0 * x;
    if x > 0.0 && twice.fract() == 0.0 && twice <= 700.0 {
        let (mut acc, mut t) = if (twice as i64) % 2 == 0 {
            (-EULER_GAMMA, 1.0)
        } else {
            (-EULER_GAMMA - 2.0 * std::f64::consts::LN_2, 0.5)
        };
        while t + 1.0 <= x {
            acc += 1.0 / t;
            t += 1.0;
        }
        return acc;
    }
    // Recurrence up to x >= 8, then the asymptotic series.
    let mut acc = 0.0;
    let mut t = x;
    while t < 8.0 {
        acc -= 1.0 / t;
        t += 1.0;
    }
    let inv = 1.0 / t;
    let inv2 = inv * inv;
    acc + t.ln() - 0.5 * inv
        - inv2 * (1.0 / 12.0 - inv2 * (1.0 / 120.0 - inv2 * (1.0 / 252.0 - inv2 / 240.0)))
}

pub fn factorial(n: u32) -> f64 {
    let mut acc = 1.0;
    for i in 2..=n as u64 {
        acc *= i as f64;
    }
    acc
}

pub fn binomial(n: u32, k: u32) -> f64 {
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

fn is_nonpositive_integer(x: f64) -> bool {
    x <= 1e-12 && (x - x.round()).abs() < 1e-12
}

/// Gauss hypergeometric function 2F1(a, b; c; w) for w in [0, 1).
///
/// Evaluation routes: terminating series when a or b is a non-positive
/// integer; the defining series for w <= 3/4; connection formulas in 1 - w
/// beyond that, including the logarithmic cases with integer c - a - b
/// that all of the form families here produce.
pub fn gauss_2f1(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    gauss_2f1_c(a, b, c, w, 1.0 - w)
}

/// Variant taking the complement 1 - w precomputed by the caller.  The
/// form-sum kernels have cancellation-free expressions for 1 - w (through
/// the norm identity |Q(z,1)|^2 = y^2 (Q_z^2 - D)), which keeps the
/// logarithmic branches accurate close to the poles.
pub fn gauss_2f1_c(a: f64, b: f64, c: f64, w: f64, om: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&w) || om <= 0.0 {
        return Err(Error::Domain(format!("2F1 argument w = {w} outside [0, 1)")));
    }
    if is_nonpositive_integer(c) {
        return Err(Error::Domain(format!("2F1 parameter c = {c} is a non-positive integer")));
    }
    if is_nonpositive_integer(a) || is_nonpositive_integer(b) {
        return Ok(terminating_series(a, b, c, w));
    }
    if w <= 0.75 {
        return series_2f1(a, b, c, w);
    }
    let m = c - a - b;
    if (m - m.round()).abs() > 1e-9 {
        return connection_nonint(a, b, c, om, m);
    }
    let m = m.round() as i64;
    if m >= 0 {
        connection_log_pos(a, b, c, om, m as u32)
    } else {
        connection_log_neg(a, b, c, om, (-m) as u32)
    }
}

fn terminating_series(a: f64, b: f64, c: f64, w: f64) -> f64 {
    let n_stop = if is_nonpositive_integer(a) { -a.round() } else { -b.round() } as usize;
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..n_stop {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * w;
        sum += term;
    }
    sum
}

fn series_2f1(a: f64, b: f64, c: f64, w: f64) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * w;
        sum += term;
        if term.abs() < REL_EPS * sum.abs() {
            return Ok(sum);
        }
    }
    Err(Error::Precision(format!(
        "2F1({a},{b};{c};{w}) series did not converge in {MAX_TERMS} terms"
    )))
}

/// Two-term connection formula in 1 - w, valid for non-integer c - a - b.
fn connection_nonint(a: f64, b: f64, c: f64, om: f64, m: f64) -> Result<f64> {
    let t1 = gamma(c) * gamma_signed(m) * rgamma(c - a) * rgamma(c - b)
        * series_2f1(a, b, 1.0 - m, om)?;
    let t2 = om.powf(m) * gamma(c) * gamma_signed(-m) * rgamma(a) * rgamma(b)
        * series_2f1(c - a, c - b, 1.0 + m, om)?;
    Ok(t1 + t2)
}

/// c = a + b + m with integer m >= 0 (Abramowitz-Stegun 15.3.10/15.3.11).
fn connection_log_pos(a: f64, b: f64, c: f64, om: f64, m: u32) -> Result<f64> {
    let log_om = om.ln();
    let mf = m as f64;

    let mut finite = 0.0;
    if m > 0 {
        // Gamma(m) Gamma(c) / (Gamma(a+m) Gamma(b+m)) * sum_{n<m}.
        let mut term = 1.0;
        for n in 0..m as usize {
            let nf = n as f64;
            if n > 0 {
                term *= (a + nf - 1.0) * (b + nf - 1.0) / (nf * (1.0 - mf + nf - 1.0)) * om;
            }
            finite += term;
        }
        finite *= gamma(mf) * gamma(c) * rgamma(a + mf) * rgamma(b + mf);
    }

    // (-1)^m Gamma(c)/(Gamma(a)Gamma(b)) (1-w)^m sum_{n>=0} ... (k_n - ln(1-w)).
    let front = sign_pow(m) * gamma(c) * rgamma(a) * rgamma(b) * om.powi(m as i32);
    let mut psi_a = digamma(a + mf);
    let mut psi_b = digamma(b + mf);
    let mut psi_1 = digamma(1.0);
    let mut psi_m1 = digamma(mf + 1.0);
    let mut coeff = 1.0 / factorial(m);
    let mut sum = 0.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        if n > 0 {
            coeff *= (a + mf + nf - 1.0) * (b + mf + nf - 1.0) / (nf * (nf + mf)) * om;
            psi_a += 1.0 / (a + mf + nf - 1.0);
            psi_b += 1.0 / (b + mf + nf - 1.0);
            psi_1 += 1.0 / nf;
            psi_m1 += 1.0 / (mf + nf);
        }
        let kn = psi_1 + psi_m1 - psi_a - psi_b;
        let term = coeff * (kn - log_om);
        sum += term;
        if term.abs() < REL_EPS * (sum.abs() + finite.abs()) && n > 2 {
            return Ok(finite + front * sum);
        }
    }
    Err(Error::Precision("2F1 logarithmic series (m >= 0) did not converge".into()))
}

/// c = a + b - m with integer m > 0 (Abramowitz-Stegun 15.3.12).
fn connection_log_neg(a: f64, b: f64, c: f64, om: f64, m: u32) -> Result<f64> {
    let log_om = om.ln();
    let mf = m as f64;

    // Gamma(m) Gamma(c) / (Gamma(a) Gamma(b)) (1-w)^{-m} sum_{n<m}.
    let mut finite = 0.0;
    let mut term = 1.0;
    for n in 0..m as usize {
        let nf = n as f64;
        if n > 0 {
            term *= (a - mf + nf - 1.0) * (b - mf + nf - 1.0) / (nf * (1.0 - mf + nf - 1.0)) * om;
        }
        finite += term;
    }
    finite *= gamma(mf) * gamma(c) * rgamma(a) * rgamma(b) * om.powi(-(m as i32));

    let front = sign_pow(m) * gamma(c) * rgamma(a - mf) * rgamma(b - mf);
    if front == 0.0 {
        return Ok(finite);
    }
    let mut psi_a = digamma(a);
    let mut psi_b = digamma(b);
    let mut psi_1 = digamma(1.0);
    let mut psi_m1 = digamma(mf + 1.0);
    let mut coeff = 1.0 / factorial(m);
    let mut sum = 0.0;
    for n in 0..MAX_TERMS {
        let nf = n as f64;
        if n > 0 {
            coeff *= (a + nf - 1.0) * (b + nf - 1.0) / (nf * (nf + mf)) * om;
            psi_a += 1.0 / (a + nf - 1.0);
            psi_b += 1.0 / (b + nf - 1.0);
            psi_1 += 1.0 / nf;
            psi_m1 += 1.0 / (mf + nf);
        }
        let kn = psi_1 + psi_m1 - psi_a - psi_b;
        let term = coeff * (kn - log_om);
        sum += term;
        if term.abs() < REL_EPS * (sum.abs() + finite.abs() + 1e-300) && n > 2 {
            return Ok(finite + front * sum);
        }
    }
    Err(Error::Precision("2F1 logarithmic series (m < 0) did not converge".into()))
}

fn sign_pow(m: u32) -> f64 {
    if m % 2 == 0 {
        1.0
    } else {
        -1.0
    }
}

/// Legendre function of the second kind Q_{k-1}(Z) for Z > 1, through its
/// hypergeometric representation.
pub fn legendre_q(k: u32, z: f64) -> Result<f64> {
    legendre_q_assoc(k, 0, z)
}

/// Associated Legendre function Q^j_{k-1}(Z) for Z > 1:
/// (-1)^j (k+j-1)! sqrt(pi) / (2^k Gamma(k+1/2)) (Z^2-1)^{j/2} Z^{-k-j}
///   2F1((k+j+1)/2, (k+j)/2; k+1/2; 1/Z^2).
pub fn legendre_q_assoc(k: u32, j: u32, z: f64) -> Result<f64> {
    if k < 1 {
        return Err(Error::Domain("legendre_q requires k >= 1".into()));
    }
    if z <= 1.0 {
        return Err(Error::Domain(format!("legendre_q requires Z > 1, got {z}")));
    }
    let kf = k as f64;
    let jf = j as f64;
    let pre = sign_pow(j) * factorial(k + j - 1) * std::f64::consts::PI.sqrt()
        / (2f64.powi(k as i32) * gamma(kf + 0.5));
    let f = gauss_2f1((kf + jf + 1.0) / 2.0, (kf + jf) / 2.0, kf + 0.5, 1.0 / (z * z))?;
    Ok(pre * (z * z - 1.0).powf(jf / 2.0) * z.powf(-kf - jf) * f)
}

/// Incomplete beta function beta(y; alpha, beta) = int_0^y t^(alpha-1) (1-t)^(beta-1) dt.
/// beta may be zero or negative; the integrand is then singular only at
/// t = 1, which y < 1 excludes.
pub fn incomplete_beta(y: f64, alpha: f64, beta: f64) -> Result<f64> {
    if y < 0.0 || y > 1.0 || (y >= 1.0 && beta <= 0.0) {
        return Err(Error::Domain(format!(
            "incomplete beta outside domain: y = {y}, beta = {beta}"
        )));
    }
    if alpha <= 0.0 {
        return Err(Error::Domain("incomplete beta requires alpha > 0".into()));
    }
    if y == 0.0 {
        return Ok(0.0);
    }
    let a_int = (alpha - alpha.round()).abs() < 1e-12 && alpha >= 1.0;
    let b_int = (beta - beta.round()).abs() < 1e-12;
    if a_int && b_int && alpha.round() <= 64.0 {
        return Ok(incomplete_beta_int(y, alpha.round() as u32, beta.round() as i64));
    }
    // beta(w; alpha, beta) = (w^alpha / alpha) 2F1(1 - beta, alpha; alpha + 1; w).
    Ok(y.powf(alpha) / alpha * gauss_2f1(1.0 - beta, alpha, alpha + 1.0, y)?)
}

/// Closed form for integer parameters a >= 1, from the binomial expansion
/// of (1-u)^(a-1) after t -> 1-u:
/// beta(y; a, b) = sum_{j != -b} C(a-1, j) (-1)^j (1 - (1-y)^(b+j)) / (b+j)
///               + [0 <= -b <= a-1] C(a-1, -b) (-1)^b (-ln(1-y)).
/// For small y that form cancels to y^a from O(y) pieces, so the series
/// around 0 takes over below y = 1/2.
fn incomplete_beta_int(y: f64, a: u32, b: i64) -> f64 {
    if y <= 0.5 {
        // beta(y; a, b) = (y^a / a) 2F1(1-b, a; a+1; y), all terms positive
        // for b <= 0 and geometrically convergent.
        let af = a as f64;
        let bf = b as f64;
        let mut term = 1.0;
        let mut sum = 1.0;
        for n in 0..4096 {
            let nf = n as f64;
            term *= (1.0 - bf + nf) * (af + nf) / ((af + 1.0 + nf) * (nf + 1.0)) * y;
            sum += term;
            if term.abs() < 1e-17 * sum.abs() {
                break;
            }
        }
        return y.powi(a as i32) / af * sum;
    }
    let om = 1.0 - y;
    let mut acc = 0.0;
    for j in 0..a as i64 {
        let cj = binomial(a - 1, j as u32) * if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == -b {
            acc += cj * (-om.ln());
        } else {
            let e = (b + j) as f64;
            acc += cj * (1.0 - om.powi((b + j) as i32)) / e;
        }
    }
    acc
}

/// The finite correction constant C_{a,b} of the regularized beta_0.
pub fn c_const(a: u32, b: i64) -> f64 {
    let mut acc = 0.0;
    for j in 0..a as i64 {
        if j == -b {
            continue;
        }
        acc += binomial(a - 1, j as u32) * if j % 2 == 0 { 1.0 } else { -1.0 } / (j + b) as f64;
    }
    acc
}

/// beta_0(y; a, b) = beta(y; a, b) - C_{a,b}, assembled without the
/// cancellation between the two pieces:
/// beta_0 = -sum_{j != -b} C(a-1,j) (-1)^j (1-y)^(b+j) / (b+j)
///        + [0 <= -b <= a-1] C(a-1,-b) (-1)^b (-ln(1-y)).
pub fn beta0(y: f64, a: u32, b: i64) -> Result<f64> {
    if !(0.0..1.0).contains(&y) {
        return Err(Error::Domain(format!("beta0 requires y in [0, 1), got {y}")));
    }
    if a < 1 {
        return Err(Error::Domain("beta0 requires a >= 1".into()));
    }
    let om = 1.0 - y;
    let mut acc = 0.0;
    for j in 0..a as i64 {
        let cj = binomial(a - 1, j as u32) * if j % 2 == 0 { 1.0 } else { -1.0 };
        if j == -b {
            acc += cj * (-om.ln());
        } else {
            acc -= cj * om.powi((b + j) as i32) / (b + j) as f64;
        }
    }
    Ok(acc)
}

/// Complete beta value beta(k, k) = ((k-1)!)^2 / (2k-1)!.
pub fn complete_beta(k: u32) -> f64 {
    let f = factorial(k - 1);
    f * f / factorial(2 * k - 1)
}

/// The sinh-power integral int_0^artanh((1-r^2)/(1+r^2)) sinh^(2k-2) dtheta
/// in closed form, 2^(1-2k) beta(1 - r^2; 2k-1, 1-k).
pub fn sinh_power_integral(k: u32, r_sq: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&r_sq) {
        return Err(Error::Domain(format!("sinh_power_integral needs r^2 in [0,1], got {r_sq}")));
    }
    if r_sq == 0.0 {
        // artanh(1) endpoint: only reached at poles, which callers exclude.
        return Err(Error::SingularPoint("sinh integral endpoint artanh(1)".into()));
    }
    Ok(2f64.powi(1 - 2 * k as i32)
        * incomplete_beta_int(1.0 - r_sq, 2 * k - 1, 1 - k as i64))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) {
        assert!(
            (a - b).abs() <= tol * (1.0 + a.abs().max(b.abs())),
            "{a} vs {b} (tol {tol})"
        );
    }

    #[test]
    fn gamma_exact_values() {
        close(gamma(1.0), 1.0, 1e-15);
        close(gamma(0.5), std::f64::consts::PI.sqrt(), 1e-15);
        close(gamma(2.5), 1.5 * 0.5 * std::f64::consts::PI.sqrt(), 1e-15);
        close(gamma(6.0), 120.0, 1e-15);
        // Lanczos path.
        close(gamma(4.3), 3.3 * 2.3 * 1.3 * gamma(1.3), 1e-12);
    }

    #[test]
    fn digamma_values() {
        close(digamma(1.0), -EULER_GAMMA, 1e-14);
        close(digamma(0.5), -EULER_GAMMA - 2.0 * std::f64::consts::LN_2, 1e-14);
        close(digamma(2.0), 1.0 - EULER_GAMMA, 1e-14);
        // Generic path vs recurrence.
        close(digamma(3.7), digamma(2.7) + 1.0 / 2.7, 1e-12);
    }

    #[test]
    fn f21_basic_values() {
        close(gauss_2f1(0.7, 1.3, 2.1, 0.0).unwrap(), 1.0, 1e-15);
        // -ln(1-w)/w closed form.
        close(
            gauss_2f1(1.0, 1.0, 2.0, 0.5).unwrap(),
            2.0 * std::f64::consts::LN_2,
            1e-13,
        );
        // Binomial case (a, b; b; w) = (1-w)^(-a).
        close(gauss_2f1(2.0, 5.0, 5.0, 0.3).unwrap(), 0.7f64.powi(-2), 1e-13);
    }

    #[test]
    fn f21_near_one_log_cases() {
        // artanh route: 2F1(1, 1/2; 3/2; w) = artanh(sqrt(w))/sqrt(w),
        // with c - a - b = 0 exercising the m = 0 logarithmic branch.
        for &w in &[0.76f64, 0.9, 0.99, 0.9999, 0.999_999_9] {
            // artanh(sqrt(w)) through the cancellation-free form of 1 - sqrt(w).
            let s = w.sqrt();
            let expect = 0.5 * ((1.0 + s) * (1.0 + s) / (1.0 - w)).ln() / s;
            close(gauss_2f1(1.0, 0.5, 1.5, w).unwrap(), expect, 1e-12);
        }
        // m > 0 branch: 2F1(1/2, 1/2; 2; w); Euler transform to the
        // series-convergent regime as reference.
        for &w in &[0.8, 0.95, 0.999] {
            let lhs = gauss_2f1(0.5, 0.5, 2.0, w).unwrap();
            let rhs = (1.0 - w) * series_2f1(1.5, 1.5, 2.0, w).unwrap_or(f64::NAN);
            if rhs.is_finite() {
                close(lhs, rhs, 1e-9);
            }
        }
        // m < 0 branch: 2F1(3/2, 2; 5/2; w) = Euler * 2F1(1, 1/2; 5/2; w).
        for &w in &[0.8, 0.95, 0.995] {
            let lhs = gauss_2f1(1.5, 2.0, 2.5, w).unwrap();
            let rhs = (1.0 - w).powf(-1.0) * gauss_2f1(1.0, 0.5, 2.5, w).unwrap();
            close(lhs, rhs, 1e-11);
        }
    }

    #[test]
    fn f21_series_vs_connection_at_switch_point() {
        // The raw series still converges a little above the switch point;
        // both branches must agree there at the same argument.
        for (a, b, c) in [(1.5, 1.0, 2.5), (2.5, 2.0, 2.5), (1.0, 0.5, 1.5), (2.0, 1.5, 2.5)] {
            for &w in &[0.76f64, 0.8] {
                let series = series_2f1(a, b, c, w).unwrap();
                let connection = gauss_2f1(a, b, c, w).unwrap();
                close(series, connection, 1e-12);
            }
        }
    }

    #[test]
    fn f21_terminating() {
        // b = -2: polynomial 1 - 2aw/c + a(a+1)w^2 (c(c+1))^{-1} * 2!/2...
        let v = gauss_2f1(1.5, -2.0, 2.5, 0.9).unwrap();
        let direct = 1.0 + (1.5 * -2.0 / 2.5) * 0.9
            + (1.5 * 2.5 * (-2.0) * (-1.0) / (2.5 * 3.5 * 2.0)) * 0.81;
        close(v, direct, 1e-14);
    }

    #[test]
    fn f21_domain_errors() {
        assert!(gauss_2f1(1.0, 1.0, 2.0, 1.0).is_err());
        assert!(gauss_2f1(1.0, 1.0, 2.0, -0.1).is_err());
        assert!(gauss_2f1(1.0, 1.0, 0.0, 0.5).is_err());
    }

    #[test]
    fn euler_transformation_random_samples() {
        // 2F1(a,b;c;w) = (1-w)^(c-a-b) 2F1(c-a, c-b; c; w).
        let mut state = 123u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let k = 2.0 + (next() * 3.0).floor();
            let n = 1.0 + (next() * (2.0 * k - 1.0)).floor();
            let (a, b, c) = (k - (n - 1.0) / 2.0, k - n / 2.0, k + 0.5);
            let w = next() * 0.95;
            let lhs = gauss_2f1(a, b, c, w).unwrap();
            let rhs = (1.0 - w).powf(c - a - b) * gauss_2f1(c - a, c - b, c, w).unwrap();
            close(lhs, rhs, 1e-11);
        }
    }

    #[test]
    fn legendre_q_closed_forms() {
        // Q_0(Z) = artanh(1/Z), Q_1(Z) = Z artanh(1/Z) - 1.
        close(legendre_q(1, 2.0).unwrap(), 0.5 * 3f64.ln(), 1e-13);
        close(legendre_q(2, 2.0).unwrap(), 3f64.ln() - 1.0, 1e-13);
        for &z in &[1.01, 1.5, 3.0, 10.0, 100.0] {
            close(legendre_q(1, z).unwrap(), (1.0 / z).atanh(), 1e-12);
            close(legendre_q(2, z).unwrap(), z * (1.0 / z).atanh() - 1.0, 1e-12);
        }
        // Monotone decay towards infinity.
        let mut prev = legendre_q(2, 2.0).unwrap();
        for &z in &[3.0, 5.0, 10.0, 40.0] {
            let v = legendre_q(2, z).unwrap();
            assert!(v < prev && v > 0.0);
            prev = v;
        }
        assert!(legendre_q(2, 1.0).is_err());
    }

    #[test]
    fn legendre_q_assoc_reduces_and_differentiates() {
        for (k, z) in [(1u32, 1.7), (2, 2.0), (3, 1.3), (4, 5.0)] {
            close(
                legendre_q_assoc(k, 0, z).unwrap(),
                legendre_q(k, z).unwrap(),
                1e-12,
            );
        }
        // Q^1_{k-1}(Z) = (Z^2-1)^(1/2) d/dZ Q_{k-1}(Z), via central differences
        // on the Q_1 closed form.
        let z = 2.0f64;
        let h = 1e-6;
        let q1 = |z: f64| z * (1.0 / z).atanh() - 1.0;
        let dq = (q1(z + h) - q1(z - h)) / (2.0 * h);
        close(
            legendre_q_assoc(2, 1, z).unwrap(),
            (z * z - 1.0).sqrt() * dq,
            1e-8,
        );
        // Sign pattern (-1)^j.
        for j in 0..4u32 {
            let v = legendre_q_assoc(3, j, 1.9).unwrap();
            assert!(v * sign_pow(j) > 0.0, "j = {j}: {v}");
        }
    }

    #[test]
    fn incomplete_beta_simple_cases() {
        for &y in &[0.1, 0.5, 0.9] {
            close(incomplete_beta(y, 1.0, 1.0).unwrap(), y, 1e-14);
            close(incomplete_beta(y, 3.5, 1.0).unwrap(), y.powf(3.5) / 3.5, 1e-13);
        }
        assert!(incomplete_beta(1.0, 2.0, -1.0).is_err());
        assert!(incomplete_beta(-0.1, 2.0, 1.0).is_err());
    }

    /// Adaptive Simpson oracle for the negative-parameter example.
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, fa: f64, fm: f64, fb: f64, tol: f64, depth: u32) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
        let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
        let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            simpson(f, a, m, fa, flm, fm, tol / 2.0, depth - 1)
                + simpson(f, m, b, fm, frm, fb, tol / 2.0, depth - 1)
        }
    }

    fn quad<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
        let m = 0.5 * (a + b);
        let (fa, fm, fb) = (f(a), f(m), f(b));
        simpson(&f, a, b, fa, fm, fb, tol, 40)
    }

    #[test]
    fn incomplete_beta_negative_parameter_vs_quadrature() {
        // beta(0.5; 3, -2) = int_0^0.5 t^2 (1-t)^(-3) dt.
        let oracle = quad(|t| t * t * (1.0 - t).powi(-3), 0.0, 0.5, 1e-12);
        close(incomplete_beta(0.5, 3.0, -2.0).unwrap(), oracle, 1e-9);
        // Same through the hypergeometric route (perturb alpha off-integer).
        let hyp = incomplete_beta(0.5, 3.0 + 1e-13, -2.0).unwrap();
        close(hyp, oracle, 1e-7);
    }

    #[test]
    fn beta0_and_c_const() {
        close(c_const(1, 1), 1.0, 1e-15);
        for &y in &[0.05, 0.4, 0.8] {
            close(beta0(y, 1, 1).unwrap(), y - 1.0, 1e-14);
            let direct = incomplete_beta(y, 5.0, -2.0).unwrap() - c_const(5, -2);
            close(beta0(y, 5, -2).unwrap(), direct, 1e-11);
        }
    }

    #[test]
    fn beta0_positive_parameter_identity() {
        // beta_0(1-r^2; 2k-1, m) = -beta(r^2; m, 2k-1) for m in N.
        let mut state = 99u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let k = 2 + (next() * 3.0) as u32;
            let m = 1 + (next() * 4.0) as i64;
            let r = 0.05 + 0.9 * next();
            let lhs = beta0(1.0 - r * r, 2 * k - 1, m).unwrap();
            let rhs = -incomplete_beta(r * r, m as f64, (2 * k - 1) as f64).unwrap();
            close(lhs, rhs, 1e-11);
        }
    }

    #[test]
    fn sinh_integral_closed_form_vs_quadrature() {
        for k in [2u32, 3, 4] {
            for &r in &[0.1f64, 0.3, 0.5, 0.7, 0.9] {
                let upper = ((1.0 - r * r) / (1.0 + r * r)).atanh();
                let oracle = quad(|t: f64| t.sinh().powi(2 * k as i32 - 2), 0.0, upper, 1e-12);
                close(sinh_power_integral(k, r * r).unwrap(), oracle, 1e-9);
            }
        }
    }

    #[test]
    fn complete_beta_values() {
        close(complete_beta(1), 1.0, 1e-15);
        close(complete_beta(2), 1.0 / 6.0, 1e-15);
        close(complete_beta(3), 1.0 / 30.0, 1e-15);
    }

    #[test]
    fn contiguous_relation_of_the_raising_ladder() {
        // (c-a) F(a-1,b;c;w) = (-bw + c-a) F(a,b;c;w) + w(1-w)(ab/c) F(a+1,b+1;c+1;w),
        // sampled over the parameter family of the class-sum hypergeometrics.
        let mut state = 2024u64;
        let mut next = move || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            (state >> 11) as f64 / (1u64 << 53) as f64
        };
        for _ in 0..50 {
            let k = 2.0 + (next() * 3.0).floor();
            let n = 1.0 + (next() * (2.0 * k - 2.0)).floor();
            let (a, b, c) = (k - (n - 1.0) / 2.0, k - n / 2.0, k + 0.5);
            let w = next() * 0.9;
            let lhs = (c - a) * gauss_2f1(a - 1.0, b, c, w).unwrap();
            let rhs = (-b * w + c - a) * gauss_2f1(a, b, c, w).unwrap()
                + w * (1.0 - w) * a * b / c * gauss_2f1(a + 1.0, b + 1.0, c + 1.0, w).unwrap();
            close(lhs, rhs, 1e-10);
        }
    }

    #[test]
    fn derivative_relation_vs_central_differences() {
        let (a, b, c) = (1.5, 2.0, 2.5);
        for &w in &[0.2, 0.5, 0.7] {
            let h = 1e-6;
            let fd = (gauss_2f1(a, b, c, w + h).unwrap() - gauss_2f1(a, b, c, w - h).unwrap())
                / (2.0 * h);
            let closed = a * b / c * gauss_2f1(a + 1.0, b + 1.0, c + 1.0, w).unwrap();
            close(fd, closed, 1e-7);
        }
    }
}
