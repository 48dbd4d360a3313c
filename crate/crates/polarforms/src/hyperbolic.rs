//! Upper half-plane geometry: the Moebius action, hyperbolic distance,
//! elliptic coordinates, reduction to the standard fundamental domain, and
//! enumeration of SL2(Z) matrices for truncated group sums.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::qform::UnimodularMatrix;

/// Point z = x + iy of the upper half-plane (y > 0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HPoint {
    pub x: f64,
    pub y: f64,
}

impl HPoint {
    pub fn new(x: f64, y: f64) -> Self {
        debug_assert!(y > 0.0, "HPoint requires y > 0, got y = {y}");
        HPoint { x, y }
    }

    pub fn from_complex(z: Complex64) -> Self {
        HPoint::new(z.re, z.im)
    }

    pub fn to_complex(self) -> Complex64 {
        Complex64::new(self.x, self.y)
    }

    pub fn conj(self) -> Complex64 {
        Complex64::new(self.x, -self.y)
    }
}

/// Order-2 elliptic point i.
pub fn elliptic_point_i() -> HPoint {
    HPoint::new(0.0, 1.0)
}

/// Order-3 elliptic point rho = (-1 + i sqrt(3)) / 2.
pub fn elliptic_point_rho() -> HPoint {
    HPoint::new(-0.5, 3f64.sqrt() / 2.0)
}

/// (a z + b) / (c z + d); the imaginary part stays positive.
pub fn moebius(m: &UnimodularMatrix, z: HPoint) -> HPoint {
    let zc = z.to_complex();
    let num = Complex64::new(m.a as f64, 0.0) * zc + Complex64::new(m.b as f64, 0.0);
    let den = Complex64::new(m.c as f64, 0.0) * zc + Complex64::new(m.d as f64, 0.0);
    let den2 = den.norm_sqr();
    // Im(Mz) = y / |cz+d|^2, computed directly to avoid cancellation.
    HPoint::new((num * den.conj()).re / den2, z.y / den2)
}

/// cosh of the hyperbolic distance: 1 + |z - w|^2 / (2 y Im w).
pub fn cosh_dist(z: HPoint, w: HPoint) -> f64 {
    let dx = z.x - w.x;
    let dy = z.y - w.y;
    1.0 + (dx * dx + dy * dy) / (2.0 * z.y * w.y)
}

/// Elliptic coordinate X_rho(z) = (z - rho) / (z - conj(rho)).
pub fn x_coord(rho: HPoint, z: HPoint) -> Complex64 {
    (z.to_complex() - rho.to_complex()) / (z.to_complex() - rho.conj())
}

/// r_rho(z) = |X_rho(z)| = tanh(d(z, rho) / 2), in [0, 1).
pub fn r_coord(rho: HPoint, z: HPoint) -> f64 {
    x_coord(rho, z).norm()
}

const BOUNDARY_TOL: f64 = 1e-12;

/// Translate z into the standard fundamental domain |Re| <= 1/2, |z| >= 1.
/// Returns the reduced point and the exact matrix with M z = z*.
/// Boundary ties go to the Re <= 0 side.
pub fn reduce_point(z: HPoint) -> (HPoint, UnimodularMatrix) {
    let mut m = UnimodularMatrix::identity();
    let mut cur = z;
    for _ in 0..200 {
        let n = cur.x.round();
        if n != 0.0 {
            let t = UnimodularMatrix::translation(-(n as i64));
            m = t.mul(&m);
            cur = moebius(&m, z);
        }
        if cur.x * cur.x + cur.y * cur.y < 1.0 - BOUNDARY_TOL {
            let s = UnimodularMatrix::inversion();
            m = s.mul(&m);
            cur = moebius(&m, z);
        } else {
            break;
        }
    }
    // Boundary normalization: Re = 1/2 maps to Re = -1/2, and points on
    // the unit arc with Re > 0 map to the Re < 0 half.
    if cur.x > 0.5 - BOUNDARY_TOL {
        m = UnimodularMatrix::translation(-1).mul(&m);
        cur = moebius(&m, z);
    }
    let norm = cur.x * cur.x + cur.y * cur.y;
    if (norm - 1.0).abs() < BOUNDARY_TOL && cur.x > BOUNDARY_TOL {
        m = UnimodularMatrix::inversion().mul(&m);
        cur = moebius(&m, z);
    }
    (cur, m)
}

const ELLIPTIC_TOL: f64 = 1e-9;

/// Order of the PSL2(Z)-stabilizer: 2 at [i], 3 at [rho], 1 elsewhere.
/// Decided metrically after reduction; desk-scale inputs keep distinct
/// elliptic orbits far apart relative to the threshold.
pub fn stabilizer_order(z: HPoint) -> u32 {
    let (zs, _) = reduce_point(z);
    let di = (zs.to_complex() - elliptic_point_i().to_complex()).norm();
    if di < ELLIPTIC_TOL {
        return 2;
    }
    let rho = elliptic_point_rho().to_complex();
    let d3 = (zs.to_complex() - rho).norm();
    let d3b = (zs.to_complex() - (rho + 1.0)).norm();
    if d3 < ELLIPTIC_TOL || d3b < ELLIPTIC_TOL {
        return 3;
    }
    1
}

/// One representative of each pair {M, -M} in SL2(Z) with max |entry|
/// bounded by `bound`.  Callers apply coset weights; for even weights the
/// two members of a pair contribute identical terms.
pub fn matrices_up_to_height(bound: i64) -> Vec<UnimodularMatrix> {
    assert!(bound >= 1);
    let mut out = Vec::new();
    for c in 0..=bound {
        for d in -bound..=bound {
            if gcd(c, d.abs()) != 1 {
                continue;
            }
            // Normalize the pair sign: c > 0, or c = 0 and d > 0.
            if c == 0 && d <= 0 {
                continue;
            }
            let (a0, b0) = bezout(c, d);
            // All completions of (c, d) are T^m-shifts of (a0, b0).
            for m in m_range(a0, c, bound).into_iter() {
                let a = a0 + m * c;
                let b = b0 + m * d;
                if a.abs() <= bound && b.abs() <= bound {
                    out.push(UnimodularMatrix::new(a, b, c, d));
                }
            }
        }
    }
    out
}

/// A left T-coset of SL2(Z) acting on a base point: all matrices with
/// bottom row ±(c, d) move `zz` to w0 + m, m in Z.  The group sums are
/// evaluated fiber by fiber over these slices.
#[derive(Debug, Clone, Copy)]
pub struct CosetSlice {
    pub c: i64,
    pub d: i64,
    /// M0 zz for one completion M0 of the bottom row.
    pub w0: Complex64,
    /// Im(M0 zz) = Im(zz) / |c zz + d|^2, constant along the fiber.
    pub w2: f64,
    /// |c zz + d|^2, the slice's distance scale.
    pub norm: f64,
}

/// One slice per pair ±(c, d) of coprime bottom rows with
/// |c zz + d|^2 <= norm_cut.  Together the slices partition PSL2(Z).
pub fn coset_slices(zz: HPoint, norm_cut: f64) -> Vec<CosetSlice> {
    let mut out = Vec::new();
    let zc = zz.to_complex();
    // c = 0: the identity fiber.
    if norm_cut >= 1.0 {
        out.push(CosetSlice { c: 0, d: 1, w0: zc, w2: zz.y, norm: 1.0 });
    }
    let c_max = (norm_cut.sqrt() / zz.y).floor() as i64;
    for c in 1..=c_max {
        let cy = c as f64 * zz.y;
        let half_width = (norm_cut - cy * cy).sqrt();
        let center = -(c as f64) * zz.x;
        let d_lo = (center - half_width).ceil() as i64;
        let d_hi = (center + half_width).floor() as i64;
        for d in d_lo..=d_hi {
            if gcd(c, d.abs()) != 1 {
                continue;
            }
            let (a0, b0) = bezout(c, d);
            let m0 = UnimodularMatrix::new(a0, b0, c, d);
            let w = moebius(&m0, zz);
            let den = (c as f64 * zz.x + d as f64).powi(2) + cy * cy;
            out.push(CosetSlice { c, d, w0: w.to_complex(), w2: w.y, norm: den });
        }
    }
    out
}

/// Memoized variant of [`matrices_up_to_height`]; the group-sum evaluators
/// call it once per height in a run, so the list is shared.
pub fn matrices_up_to_height_cached(bound: i64) -> std::sync::Arc<Vec<UnimodularMatrix>> {
    use std::collections::HashMap;
    use std::sync::{Arc, Mutex, OnceLock};
    static CACHE: OnceLock<Mutex<HashMap<i64, Arc<Vec<UnimodularMatrix>>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    let mut guard = cache.lock().unwrap();
    guard
        .entry(bound)
        .or_insert_with(|| Arc::new(matrices_up_to_height(bound)))
        .clone()
}

fn m_range(a0: i64, c: i64, bound: i64) -> std::ops::RangeInclusive<i64> {
    if c == 0 {
        // a is fixed (=1 after sign normalization); b free.
        return -bound..=bound;
    }
    let lo = (-bound - a0).div_euclid(c.abs()) - 1;
    let hi = (bound - a0).div_euclid(c.abs()) + 1;
    lo..=hi
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        let t = a % b;
        a = b;
        b = t;
    }
    a.abs()
}

/// Some (a, b) with a d - b c = 1 for coprime (c, d).
fn bezout(c: i64, d: i64) -> (i64, i64) {
    // Extended gcd on (d, c): find u, v with u d + v c = 1, then a = u, b = -v.
    let (mut r0, mut r1) = (d, c);
    let (mut s0, mut s1) = (1i64, 0i64);
    let (mut t0, mut t1) = (0i64, 1i64);
    while r1 != 0 {
        let q = r0.div_euclid(r1);
        (r0, r1) = (r1, r0 - q * r1);
        (s0, s1) = (s1, s0 - q * s1);
        (t0, t1) = (t1, t0 - q * t1);
    }
    // r0 = s0 d + t0 c = ±1
    if r0 == 1 {
        (s0, -t0)
    } else {
        (-s0, t0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn moebius_basics() {
        let i = HPoint::new(0.0, 1.0);
        let id = UnimodularMatrix::identity();
        let s = UnimodularMatrix::inversion();
        let t = UnimodularMatrix::translation(1);
        assert!((moebius(&id, i).to_complex() - i.to_complex()).norm() < 1e-15);
        assert!((moebius(&s, i).to_complex() - i.to_complex()).norm() < 1e-15);
        assert!((moebius(&t, i).to_complex() - Complex64::new(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn cosh_dist_values_and_invariance() {
        let i = HPoint::new(0.0, 1.0);
        assert!((cosh_dist(i, i) - 1.0).abs() < 1e-15);
        assert!((cosh_dist(i, HPoint::new(0.0, 2.0)) - 1.25).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mats = matrices_up_to_height(10);
        for _ in 0..50 {
            let z = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let w = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.2..3.0));
            let m = mats[rng.gen_range(0..mats.len())];
            let lhs = cosh_dist(moebius(&m, z), moebius(&m, w));
            let rhs = cosh_dist(z, w);
            assert!((lhs - rhs).abs() < 1e-10 * rhs.abs().max(1.0));
        }
    }

    #[test]
    fn cosh_dist_to_cm_point_is_qz_over_sqrt_d() {
        use crate::qform::class_representatives;
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for d in [3i64, 4, 23] {
            for q in class_representatives(d).unwrap() {
                let tau = q.cm_point().unwrap();
                for _ in 0..10 {
                    let z = HPoint::new(rng.gen_range(-1.0..1.0), rng.gen_range(0.3..3.0));
                    let lhs = cosh_dist(z, tau);
                    let rhs = q.q_z(z) / (d as f64).sqrt();
                    assert!((lhs - rhs).abs() < 1e-10 * rhs.abs());
                }
            }
        }
    }

    #[test]
    fn x_coord_values() {
        let i = HPoint::new(0.0, 1.0);
        assert!(x_coord(i, i).norm() < 1e-15);
        let x = x_coord(i, HPoint::new(0.0, 2.0));
        assert!((x - Complex64::new(1.0 / 3.0, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn r_coord_is_tanh_half_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let z = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..4.0));
            let w = HPoint::new(rng.gen_range(-2.0..2.0), rng.gen_range(0.1..4.0));
            let r = r_coord(w, z);
            assert!(r < 1.0);
            let d = cosh_dist(z, w).acosh();
            assert!((r - (d / 2.0).tanh()).abs() < 1e-12);
        }
        assert_eq!(r_coord(HPoint::new(0.3, 0.9), HPoint::new(0.3, 0.9)), 0.0);
    }

    #[test]
    fn reduce_point_examples() {
        let (z, m) = reduce_point(HPoint::new(0.0, 2.0));
        assert_eq!(m, UnimodularMatrix::identity());
        assert!((z.to_complex() - Complex64::new(0.0, 2.0)).norm() < 1e-15);

        let (z, m) = reduce_point(HPoint::new(0.0, 0.25));
        assert_eq!(m, UnimodularMatrix::inversion());
        assert!((z.to_complex() - Complex64::new(0.0, 4.0)).norm() < 1e-14);

        let (z, m) = reduce_point(HPoint::new(1.0, 2.0));
        assert_eq!(m, UnimodularMatrix::translation(-1));
        assert!((z.to_complex() - Complex64::new(0.0, 2.0)).norm() < 1e-15);
    }

    #[test]
    fn reduce_point_lands_in_domain_and_matrix_is_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let z = HPoint::new(rng.gen_range(-8.0..8.0), rng.gen_range(0.01..5.0));
            let (zs, m) = reduce_point(z);
            assert!(zs.x.abs() <= 0.5 + 1e-9);
            assert!(zs.x * zs.x + zs.y * zs.y >= 1.0 - 1e-9);
            let check = moebius(&m, z);
            assert!((check.to_complex() - zs.to_complex()).norm() < 1e-12 * (1.0 + zs.y));
        }
    }

    #[test]
    fn stabilizer_orders() {
        assert_eq!(stabilizer_order(HPoint::new(0.0, 1.0)), 2);
        assert_eq!(stabilizer_order(elliptic_point_rho()), 3);
        assert_eq!(stabilizer_order(HPoint::new(0.5, 3f64.sqrt() / 2.0)), 3);
        assert_eq!(stabilizer_order(HPoint::new(0.0, 2.0)), 1);
        // A translate of i still has order 2.
        assert_eq!(stabilizer_order(HPoint::new(3.0, 1.0)), 2);
        // S-image of rho.
        let rho = elliptic_point_rho();
        let s = UnimodularMatrix::inversion();
        assert_eq!(stabilizer_order(moebius(&s, rho)), 3);
    }

    #[test]
    fn matrix_enumeration_det_and_dedup() {
        let mats = matrices_up_to_height(1);
        for m in &mats {
            assert_eq!(m.det(), 1);
            assert!(m.height() <= 1);
        }
        // One per ±pair: no matrix appears along with its negative.
        for m in &mats {
            assert!(!mats.contains(&m.neg()));
        }
        // Exhaustive oracle: scan all 3^4 sign patterns.
        let mut oracle = Vec::new();
        for a in -1..=1i64 {
            for b in -1..=1i64 {
                for c in -1..=1i64 {
                    for d in -1..=1i64 {
                        if a * d - b * c == 1 {
                            let m = UnimodularMatrix::new(a, b, c, d);
                            if !oracle.contains(&m.neg()) {
                                oracle.push(m);
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(mats.len(), oracle.len());
        let id = UnimodularMatrix::identity();
        let s = UnimodularMatrix::inversion();
        let t = UnimodularMatrix::translation(1);
        for needed in [id, t, t.inverse()] {
            assert!(mats.contains(&needed) || mats.contains(&needed.neg()));
        }
        assert!(mats.contains(&s) || mats.contains(&s.neg()));
        let st = s.mul(&t);
        assert!(mats.contains(&st) || mats.contains(&st.neg()));
    }

    #[test]
    fn matrix_enumeration_matches_exhaustive_scan_height_4() {
        let bound = 4i64;
        let mats = matrices_up_to_height(bound);
        let mut count = 0usize;
        for a in -bound..=bound {
            for b in -bound..=bound {
                for c in -bound..=bound {
                    for d in -bound..=bound {
                        if a * d - b * c == 1 {
                            count += 1;
                        }
                    }
                }
            }
        }
        assert_eq!(2 * mats.len(), count);
    }
}
