//! The higher Green's function G_k(z, zz) on SL2(Z) and its raised images
//! R_0^j G_k in closed form.
//!
//! G_k sums -Q_{k-1}(cosh d(z, M zz)) over the full modular group; the
//! raised kernels replace the Legendre function by its derivative form,
//! picking up the polynomial factor (R_0 cosh)^j.  Both decompose into
//! T-coset fibers exactly as the two-variable families in `modforms`, with
//! the Legendre kernel expanded in 1/cosh^2 on far fibers and summed
//! directly near the singular orbit.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::{self, HPoint};
use crate::modforms::{
    coset_geometry, coset_guard, coset_kernel_slice, orbit_close, HypCoeffs, SINGULAR_GUARD_R,
};
use crate::policy::{EvalResult, SumPolicy, Weight};
use crate::specfun;

/// -sum_{M in SL2(Z)} Q_{k-1}(cosh d(z, M zz)): the higher Green's
/// function, with its logarithmic singularity on the orbit of zz.
pub fn eval_green(k: Weight, z: HPoint, zz: HPoint, policy: &SumPolicy) -> Result<EvalResult> {
    eval_raised_green(k, 0, z, zz, policy)
}

/// R_0^j G_k(z, zz) in closed form: each group term contributes
///   (2^k (k-1)! (k+j-1)!/(2k-1)!) (-1)^j (R_0 cosh)^j / (2 cosh^(k+j))
///   2F1((k+j+1)/2, (k+j)/2; k+1/2; 1/cosh^2),
/// with R_0 cosh(z, w) = -(conj z - w)^2 conj(X_w(z)) / (2 y^2 Im w), and
/// the whole sum carries the -2 of the one-per-±pair normalization.
pub fn eval_raised_green(
    k: Weight,
    j: u32,
    z: HPoint,
    zz: HPoint,
    policy: &SumPolicy,
) -> Result<EvalResult> {
    let ku = k.k();
    let ki = ku as i32;
    let kf = ku as f64;
    let ji = j as i32;
    if orbit_close(z, zz, SINGULAR_GUARD_R) {
        return Err(Error::SingularPoint("Green's function evaluated on the diagonal orbit".into()));
    }
    let z = HPoint::new(z.x - z.x.round(), z.y);
    let scale = 1.0 + zz.x.abs() + zz.y;
    let norm_cut = (policy.coefficient_bound as f64 * scale).powi(2).min(1e14);
    let slices = hyperbolic::coset_slices(zz, norm_cut);
    let eps = (policy.tail_tolerance * 1e-5).max(1e-18);
    let pre = 2f64.powi(ki) * specfun::factorial(ku - 1) * specfun::factorial(ku + j - 1)
        / specfun::factorial(2 * ku - 1);
    let mut terms = Vec::with_capacity(slices.len());
    let mut extra_tail = 0.0;
    let mut used = 0usize;
    for slice in &slices {
        let geo = coset_geometry(slice, z);
        coset_guard(&geo, z)?;
        // (-1)^j (R_0 cosh)^j = (2 y^2 w2)^(-j) (m+g1)^j (m+g2)^j.
        let front = pre * 0.5 * (2.0 * z.y * z.y * geo.w2).powi(-ji);
        let sv = coset_kernel_slice(
            &geo,
            z,
            &[(geo.gamma1, ji), (geo.gamma2, ji)],
            ki + ji,
            Complex64::new(front, 0.0),
            &mut HypCoeffs::new((kf + ji as f64 + 1.0) / 2.0, (kf + ji as f64) / 2.0, kf + 0.5),
            false,
            |m| raised_kernel(k, j, pre, z, HPoint::new(slice.w0.re + m as f64, slice.w2)),
            eps,
            2 * ki,
        )?;
        extra_tail += sv.wing;
        used += sv.used;
        terms.push((slice.norm, sv.value));
    }
    let key_max = terms.iter().map(|e| e.0).fold(1.0, f64::max);
    let (sum, increment) = crate::modforms::extrapolated_sum(&mut terms, key_max);
    Ok(EvalResult::new(-2.0 * sum, 2.0 * (increment + extra_tail), used))
}

/// One group term of R_0^j Q_{k-1}(cosh d(z, w)), exact.
fn raised_kernel(k: Weight, j: u32, pre: f64, z: HPoint, w: HPoint) -> Result<Complex64> {
    let ki = k.k() as i32;
    let kf = k.k() as f64;
    let ji = j as i32;
    let cosh_d = hyperbolic::cosh_dist(z, w);
    if j == 0 {
        // Plain Legendre kernel.
        return Ok(Complex64::new(specfun::legendre_q(k.k(), cosh_d)?, 0.0));
    }
    let zc = z.to_complex();
    let r0 = -(zc.conj() - w.to_complex()).powi(2) * hyperbolic::x_coord(w, z).conj()
        / (2.0 * z.y * z.y * w.y);
    let om = 1.0 - 1.0 / (cosh_d * cosh_d);
    let hyp = specfun::gauss_2f1_c(
        (kf + ji as f64 + 1.0) / 2.0,
        (kf + ji as f64) / 2.0,
        kf + 0.5,
        1.0 / (cosh_d * cosh_d),
        om,
    )?;
    let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
    Ok(pre * sign * r0.powi(ji) / (2.0 * cosh_d.powi(ki + ji)) * hyp)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn w2() -> Weight {
        Weight::new(2).unwrap()
    }

    #[test]
    fn green_is_real_and_symmetric() {
        let pol = SumPolicy::new(120, 1e-9).unwrap();
        let z = HPoint::new(0.0, 2.0);
        let w = HPoint::new(1.0, 1.0);
        let a = eval_green(w2(), z, w, &pol).unwrap();
        let b = eval_green(w2(), w, z, &pol).unwrap();
        assert!(a.value.im.abs() < 1e-12);
        assert!(b.value.im.abs() < 1e-12);
        assert!(
            (a.value - b.value).norm() < 1e-8 * a.value.norm().max(1.0),
            "{} vs {}",
            a.value,
            b.value
        );
        assert!(a.value.re < 0.0);
    }

    #[test]
    fn green_rejects_diagonal() {
        let pol = SumPolicy::new(40, 1e-7).unwrap();
        let z = HPoint::new(0.3, 1.3);
        assert!(matches!(
            eval_green(w2(), z, z, &pol),
            Err(Error::SingularPoint(_))
        ));
        // Orbit copy of the same point.
        let tz = HPoint::new(z.x + 3.0, z.y);
        assert!(eval_green(w2(), tz, z, &pol).is_err());
    }

    #[test]
    fn raised_green_j0_matches_green() {
        let pol = SumPolicy::new(80, 1e-8).unwrap();
        let z = HPoint::new(0.2, 1.8);
        let w = HPoint::new(0.0, 1.0);
        let a = eval_green(w2(), z, w, &pol).unwrap();
        let b = eval_raised_green(w2(), 0, z, w, &pol).unwrap();
        assert_eq!(a.value, b.value);
    }
}
