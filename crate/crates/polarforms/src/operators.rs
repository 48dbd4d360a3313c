//! Numerical differential operators on functions of the upper half-plane:
//! Wirtinger derivatives, the xi operator, the raising operator and its
//! iterates, D-powers, and the weight-kappa hyperbolic Laplacian.
//!
//! These are verification-grade central-difference stencils with Richardson
//! extrapolation.  Everything they check also exists in closed form
//! elsewhere in the crate; the finite differences are the independent
//! oracle, not the production evaluators.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::hyperbolic::HPoint;

/// An evaluation contract: any callable on the half-plane, assumed
/// real-analytic on the stencil neighborhood of the target point.
pub type FieldFunction<'a> = dyn Fn(HPoint) -> Result<Complex64> + 'a;

/// Step control for the stencils.
#[derive(Debug, Clone, Copy)]
pub struct FdConfig {
    /// Base step as a fraction of the evaluation height y.
    pub step_fraction: f64,
    /// Richardson levels (halving the step each level).
    pub richardson_levels: u32,
}

impl Default for FdConfig {
    fn default() -> Self {
        FdConfig { step_fraction: 1e-4, richardson_levels: 2 }
    }
}

impl FdConfig {
    /// Wider steps for high-order derivatives, where cancellation wins
    /// over truncation.
    pub fn for_order(order: u32) -> FdConfig {
        match order {
            0 | 1 => FdConfig { step_fraction: 1e-4, richardson_levels: 2 },
            2 => FdConfig { step_fraction: 1e-3, richardson_levels: 2 },
            _ => FdConfig { step_fraction: 8e-3, richardson_levels: 2 },
        }
    }
}

/// Mixed partial d^ox/dx^ox d^oy/dy^oy by tensor-product central stencils
/// of second-order accuracy at step h.
fn mixed_partial(
    f: &FieldFunction,
    z: HPoint,
    ox: u32,
    oy: u32,
    h: f64,
) -> Result<Complex64> {
    let wx = central_weights(ox);
    let wy = central_weights(oy);
    let rx = (wx.len() / 2) as i32;
    let ry = (wy.len() / 2) as i32;
    let mut acc = Complex64::new(0.0, 0.0);
    for (i, &cx) in wx.iter().enumerate() {
        if cx == 0.0 {
            continue;
        }
        for (j, &cy) in wy.iter().enumerate() {
            if cy == 0.0 {
                continue;
            }
            let dx = (i as i32 - rx) as f64 * h;
            let dy = (j as i32 - ry) as f64 * h;
            acc += cx * cy * f(HPoint::new(z.x + dx, z.y + dy))?;
        }
    }
    Ok(acc / h.powi((ox + oy) as i32))
}

/// Central-difference weights of second-order accuracy.
fn central_weights(order: u32) -> &'static [f64] {
    match order {
        0 => &[1.0],
        1 => &[-0.5, 0.0, 0.5],
        2 => &[1.0, -2.0, 1.0],
        3 => &[-0.5, 1.0, 0.0, -1.0, 0.5],
        4 => &[1.0, -4.0, 6.0, -4.0, 1.0],
        _ => panic!("stencil order {order} not tabulated"),
    }
}

/// Richardson extrapolation of a step-dependent estimate with error O(h^2).
fn richardson<E>(mut estimate: E, h0: f64, levels: u32) -> Result<(Complex64, f64)>
where
    E: FnMut(f64) -> Result<Complex64>,
{
    let mut table: Vec<Complex64> = Vec::with_capacity(levels as usize + 1);
    let mut h = h0;
    for _ in 0..=levels {
        table.push(estimate(h)?);
        h /= 2.0;
    }
    let mut err = f64::INFINITY;
    let mut factor = 4.0;
    let mut current = table;
    while current.len() > 1 {
        let mut next = Vec::with_capacity(current.len() - 1);
        for i in 0..current.len() - 1 {
            next.push((factor * current[i + 1] - current[i]) / (factor - 1.0));
        }
        err = (next[next.len() - 1] - current[current.len() - 1]).norm();
        factor *= 4.0;
        current = next;
    }
    Ok((current[0], err))
}

/// Wirtinger derivative d/dz = (d/dx - i d/dy)/2.
pub fn d_z(f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    let h0 = cfg.step_fraction * z.y;
    let (v, _) = richardson(
        |h| {
            let fx = mixed_partial(f, z, 1, 0, h)?;
            let fy = mixed_partial(f, z, 0, 1, h)?;
            Ok((fx - Complex64::i() * fy) / 2.0)
        },
        h0,
        cfg.richardson_levels,
    )?;
    Ok(v)
}

/// Wirtinger derivative d/dzbar = (d/dx + i d/dy)/2.
pub fn d_zbar(f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    let h0 = cfg.step_fraction * z.y;
    let (v, _) = richardson(
        |h| {
            let fx = mixed_partial(f, z, 1, 0, h)?;
            let fy = mixed_partial(f, z, 0, 1, h)?;
            Ok((fx + Complex64::i() * fy) / 2.0)
        },
        h0,
        cfg.richardson_levels,
    )?;
    Ok(v)
}

/// xi_kappa(f) = 2 i y^kappa conj(d f / d zbar).
pub fn xi(kappa: i32, f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    let der = d_zbar(f, z, cfg)?;
    Ok(2.0 * Complex64::i() * z.y.powi(kappa) * der.conj())
}

/// Raising operator R_kappa = 2i d/dz + kappa / y.
pub fn raise(kappa: i32, f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    let der = d_z(f, z, cfg)?;
    Ok(2.0 * Complex64::i() * der + (kappa as f64 / z.y) * f(z)?)
}

/// Iterated raising R_kappa^j = R_(kappa+2j-2) o ... o R_kappa, by nested
/// stencils; j <= 3 at double precision.
pub fn raise_iter(kappa: i32, j: u32, f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    if j == 0 {
        return f(z);
    }
    if j > 3 {
        return Err(Error::Precision(format!(
            "iterated finite-difference raising is limited to j <= 3, got {j}"
        )));
    }
    raise_iter_inner(kappa, j, f, z, cfg)
}

fn raise_iter_inner(
    kappa: i32,
    j: u32,
    f: &FieldFunction,
    z: HPoint,
    cfg: &FdConfig,
) -> Result<Complex64> {
    if j == 1 {
        return raise(kappa, f, z, cfg);
    }
    let inner = |w: HPoint| raise_iter_inner(kappa, j - 1, f, w, cfg);
    raise(kappa + 2 * (j as i32 - 1), &inner, z, cfg)
}

/// D^p with D = (2 pi i)^(-1) d/dz, via the binomial expansion of d/dz^p
/// into mixed partials on a single tensor stencil.
pub fn dee_power(p: u32, f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    if p == 0 {
        return f(z);
    }
    if p > 4 {
        return Err(Error::Precision(format!("D^p is limited to p <= 4, got {p}")));
    }
    let h0 = cfg.step_fraction * z.y;
    let (v, err) = richardson(
        |h| {
            // d/dz^p = 2^-p sum_j C(p, j) (-i)^j d^(p-j)/dx^(p-j) d^j/dy^j.
            let mut acc = Complex64::new(0.0, 0.0);
            let mut binom = 1.0;
            for jj in 0..=p {
                let phase = Complex64::i().powi(-(jj as i32));
                acc += binom * phase * mixed_partial(f, z, p - jj, jj, h)?;
                binom *= (p - jj) as f64 / (jj + 1) as f64;
            }
            Ok(acc / 2f64.powi(p as i32))
        },
        h0,
        cfg.richardson_levels,
    )?;
    let scaled = v / (2.0 * std::f64::consts::PI * Complex64::i()).powi(p as i32);
    if err > 1e-2 * (1.0 + v.norm()) {
        return Err(Error::Precision(format!(
            "Richardson levels disagree in D^{p}: residual {err:.2e}"
        )));
    }
    Ok(scaled)
}

/// Weight-kappa hyperbolic Laplacian
/// Delta_kappa = -y^2 (d_xx + d_yy) + i kappa y (d_x + i d_y).
pub fn laplacian(kappa: i32, f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    let h0 = cfg.step_fraction * z.y;
    let (v, _) = richardson(
        |h| {
            let fxx = mixed_partial(f, z, 2, 0, h)?;
            let fyy = mixed_partial(f, z, 0, 2, h)?;
            let fx = mixed_partial(f, z, 1, 0, h)?;
            let fy = mixed_partial(f, z, 0, 1, h)?;
            Ok(-z.y * z.y * (fxx + fyy)
                + Complex64::i() * kappa as f64 * z.y * (fx + Complex64::i() * fy))
        },
        h0,
        cfg.richardson_levels,
    )?;
    Ok(v)
}

/// The composition -xi_(2-kappa)(xi_kappa(f)): the defining identity of the
/// Laplacian, used as a cross-check on the direct stencil.
pub fn laplacian_via_xi(kappa: i32, f: &FieldFunction, z: HPoint, cfg: &FdConfig) -> Result<Complex64> {
    let inner = |w: HPoint| xi(kappa, f, w, cfg);
    Ok(-xi(2 - kappa, &inner, z, cfg)?)
}
