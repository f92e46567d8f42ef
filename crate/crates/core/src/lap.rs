//! Limiting-absorption probes on Dirichlet boxes: shifted resolvent solves,
//! weighted resolvent norms as functions of the imaginary part, Chebyshev
//! time evolution, propagation integrals and pointwise decay traces.

use crate::conjugate::weight_apply;
use crate::error::{HexError, Result};
use crate::lattice::{LatticeSite, SublatticeTag, TruncationBox};
use crate::linalg::{dot, norm, random_cvec, sym_eigenvalues, CVec};
use crate::operators::AssembledOperator;
use crate::symbol::{grad_sqrt_beta, Momentum};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// Relative residual demanded of every resolvent solve.
pub const RESIDUAL_TOL: f64 = 1e-10;

/// Relative accuracy of the weighted resolvent norm.
pub const NORM_TOL: f64 = 1e-4;

/// First value of the `rho` sweep.
pub const RHO_START: f64 = 0.8;

/// Finite-size floor `max(1e-3, 4/N)` of the `rho` sweep.
pub fn rho_floor(n: usize) -> f64 {
    (4.0 / n as f64).max(1e-3)
}

/// Halving sequence from `start` down to `floor`, ending exactly at the floor.
pub fn rho_sweep(start: f64, floor: f64) -> Vec<f64> {
    let mut out = Vec::new();
    let mut r = start;
    while r > floor * (1.0 + 1e-12) {
        out.push(r);
        r *= 0.5;
    }
    out.push(floor);
    out
}

fn axpy(a: Complex64, x: &[Complex64], y: &mut [Complex64]) {
    y.iter_mut().zip(x).for_each(|(b, c)| *b += a * c);
}

/// Solves `(H - z) x = rhs` for Hermitian `H` and `Im z != 0` by conjugate
/// gradients on `((H - Re z)^2 + (Im z)^2) y = rhs`, followed by
/// `x = (H - conj z) y`. The returned solution meets the residual target on
/// the original system.
pub fn resolvent_solve(h: &AssembledOperator, z: Complex64, rhs: &[Complex64]) -> Result<CVec> {
    if z.im == 0.0 {
        return Err(HexError::InvalidArgument("resolvent_solve requires Im z != 0".into()));
    }
    let nb = norm(rhs);
    if nb == 0.0 {
        return Ok(vec![Complex64::new(0.0, 0.0); rhs.len()]);
    }
    let lam = z.re;
    let rho2 = z.im * z.im;
    let shifted = |v: &[Complex64]| -> CVec {
        let mut w = h.apply(v);
        w.iter_mut().zip(v).for_each(|(a, b)| *a -= lam * b);
        w
    };
    let normal = |v: &[Complex64]| -> CVec {
        let mut w = shifted(&shifted(v));
        w.iter_mut().zip(v).for_each(|(a, b)| *a += rho2 * b);
        w
    };
    let finish = |y: &[Complex64]| -> CVec {
        let mut x = shifted(y);
        x.iter_mut().zip(y).for_each(|(a, b)| *a += Complex64::new(0.0, z.im) * b);
        x
    };
    let residual = |x: &[Complex64]| -> f64 {
        let mut r = h.apply(x);
        r.iter_mut().zip(x).zip(rhs).for_each(|((a, b), c)| *a -= z * b + c);
        norm(&r) / nb
    };
    let max_iter = 20 * h.dim().max(100);
    let mut y = vec![Complex64::new(0.0, 0.0); rhs.len()];
    let mut r = rhs.to_vec();
    let mut p = r.clone();
    let mut rr = dot(&r, &r).re;
    // The inner target is tightened until the outer residual is met.
    let mut inner_tol = 0.1 * RESIDUAL_TOL * rho2.sqrt();
    let mut it = 0;
    loop {
        while it < max_iter && rr.sqrt() > inner_tol * nb {
            let ap = normal(&p);
            let alpha = rr / dot(&p, &ap).re;
            axpy(Complex64::new(alpha, 0.0), &p, &mut y);
            axpy(Complex64::new(-alpha, 0.0), &ap, &mut r);
            let rr_new = dot(&r, &r).re;
            let beta = rr_new / rr;
            rr = rr_new;
            p.iter_mut().zip(&r).for_each(|(pv, rv)| *pv = rv + beta * *pv);
            it += 1;
        }
        let x = finish(&y);
        let res = residual(&x);
        if res <= RESIDUAL_TOL {
            return Ok(x);
        }
        if it >= max_iter || inner_tol < 1e-18 {
            return Err(HexError::SolverStall {
                iterations: it,
                residual: res,
            });
        }
        inner_tol *= 0.1;
        // Restart from the true residual of the normal system.
        let ny = normal(&y);
        r = rhs.iter().zip(&ny).map(|(a, b)| a - b).collect();
        p = r.clone();
        rr = dot(&r, &r).re;
    }
}

/// Largest eigenvalue of a symmetric tridiagonal matrix.
fn tridiagonal_max(alpha: &[f64], beta: &[f64]) -> f64 {
    let k = alpha.len();
    let t = Mat::from_fn(k, k, |r, c| {
        if r == c {
            alpha[r]
        } else if r + 1 == c {
            beta[r]
        } else if c + 1 == r {
            beta[c]
        } else {
            0.0
        }
    });
    *sym_eigenvalues(&t).last().unwrap_or(&0.0)
}

/// Largest eigenvalue of a positive semi-definite Hermitian map by Lanczos
/// with full reorthogonalization, stopped at relative change below `tol`.
pub fn lanczos_max<F>(n: usize, mut apply: F, tol: f64, max_steps: usize, seed: u64) -> Result<f64>
where
    F: FnMut(&[Complex64]) -> Result<CVec>,
{
    let mut q = random_cvec(n, seed);
    let nq = norm(&q);
    q.iter_mut().for_each(|v| *v /= nq);
    let mut basis: Vec<CVec> = vec![q];
    let (mut alpha, mut beta) = (Vec::new(), Vec::new());
    let mut prev = 0.0;
    for step in 0..max_steps.min(n) {
        let mut w = apply(&basis[step])?;
        let a = dot(&basis[step], &w).re;
        alpha.push(a);
        for _ in 0..2 {
            for b in &basis {
                let c = dot(b, &w);
                axpy(-c, b, &mut w);
            }
        }
        let est = tridiagonal_max(&alpha, &beta);
        if step > 0 && (est - prev).abs() <= tol * est.abs() {
            return Ok(est);
        }
        prev = est;
        let nw = norm(&w);
        if nw <= 1e-14 * est.abs().max(1e-300) {
            return Ok(est);
        }
        beta.push(nw);
        basis.push(w.into_iter().map(|v| v / nw).collect());
    }
    Ok(prev)
}

/// `|| Lambda^{-s} (H - lambda - i rho)^{-1} Lambda^{-s} ||`, from the largest
/// eigenvalue of `T^* T`.
pub fn weighted_resolvent_norm(h: &AssembledOperator, lambda: f64, rho: f64, s: f64) -> Result<f64> {
    if rho <= 0.0 || s <= 0.5 {
        return Err(HexError::InvalidArgument(format!("need rho > 0 and s > 1/2, got rho={rho}, s={s}")));
    }
    let bbox = h.bbox;
    let z = Complex64::new(lambda, rho);
    let t = |v: &[Complex64], zz: Complex64| -> Result<CVec> {
        let x = resolvent_solve(h, zz, &weight_apply(-s, v, &bbox))?;
        Ok(weight_apply(-s, &x, &bbox))
    };
    // The relative tolerance on sigma^2 is twice the target on sigma; half of it is used.
    let sq = lanczos_max(h.dim(), |v| t(&t(v, z)?, z.conj()), 0.25 * NORM_TOL, 200, 7)?;
    Ok(sq.sqrt())
}

/// Weighted resolvent norms along a decreasing `rho` sequence at fixed energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolventCurve {
    pub lambda: f64,
    pub s: f64,
    pub rho: Vec<f64>,
    pub norms: Vec<f64>,
    pub plateau: bool,
}

/// Largest relative growth per halving of `rho` over the last step of a curve
/// for which it counts as levelled off.
pub const PLATEAU_GROWTH: f64 = 0.10;

/// Growth of the norm over the last step, normalized to one halving of `rho`.
pub fn last_step_growth(rho: &[f64], norms: &[f64]) -> f64 {
    let k = norms.len();
    if k < 2 {
        return f64::INFINITY;
    }
    let halvings = (rho[k - 2] / rho[k - 1]).log2();
    (norms[k - 1] / norms[k - 2]).powf(1.0 / halvings) - 1.0
}

/// Whether the curve has levelled off by its last point.
pub fn plateau_flag(rho: &[f64], norms: &[f64]) -> bool {
    last_step_growth(rho, norms) <= PLATEAU_GROWTH
}

impl ResolventCurve {
    /// Writes one row per `rho`: `lambda,s,rho,norm`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["lambda", "s", "rho", "norm"])?;
        for (r, v) in self.rho.iter().zip(&self.norms) {
            w.write_record([self.lambda.to_string(), self.s.to_string(), r.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Evaluates the weighted norm along `rhos` (in parallel over `rho`).
pub fn resolvent_curve(h: &AssembledOperator, lambda: f64, s: f64, rhos: &[f64]) -> Result<ResolventCurve> {
    if rhos.windows(2).any(|w| w[1] >= w[0]) {
        return Err(HexError::InvalidArgument("rho values must be strictly decreasing".into()));
    }
    let norms = rhos
        .par_iter()
        .map(|&r| weighted_resolvent_norm(h, lambda, r, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(ResolventCurve {
        lambda,
        s,
        rho: rhos.to_vec(),
        plateau: plateau_flag(rhos, &norms),
        norms,
    })
}

/// Bessel functions `J_0(x), ..., J_kmax(x)` for `x >= 0` by Miller's
/// backward recurrence normalized with `J_0 + 2 sum J_{2k} = 1`.
pub fn bessel_j(kmax: usize, x: f64) -> Vec<f64> {
    assert!(x >= 0.0);
    if x == 0.0 {
        let mut v = vec![0.0; kmax + 1];
        v[0] = 1.0;
        return v;
    }
    let start = {
        let s = kmax.max(x.ceil() as usize) + 30 + (10.0 * x.sqrt()) as usize;
        s + s % 2
    };
    let mut j = vec![0.0; start + 2];
    j[start] = 1e-300;
    for k in (1..=start).rev() {
        j[k - 1] = 2.0 * k as f64 / x * j[k] - j[k + 1];
        if j[k - 1].abs() > 1e250 {
            j.iter_mut().for_each(|v| *v *= 1e-250);
        }
    }
    let sum = j[0] + 2.0 * j.iter().step_by(2).skip(1).sum::<f64>();
    j.truncate(kmax + 1);
    j.iter().map(|v| v / sum).collect()
}

/// Chebyshev degree `ceil(1.1 a |t|) + 40` for a spectral radius bound `a`.
pub fn chebyshev_degree(a: f64, t: f64) -> usize {
    (1.1 * a * t.abs()).ceil() as usize + 40
}

/// Tail threshold on the last Chebyshev coefficient.
const TAIL_TOL: f64 = 1e-16;

/// Chebyshev coefficients of `exp(-i t a x)` on `[-1, 1]`, extended until the
/// last coefficient is below the tail threshold.
pub fn evolution_coefficients(a: f64, t: f64) -> Vec<Complex64> {
    let x = (a * t).abs();
    let mut k = chebyshev_degree(a, t);
    let mut j = bessel_j(k, x);
    while j[k].abs() > TAIL_TOL || j[k - 1].abs() > TAIL_TOL {
        k += 20;
        j = bessel_j(k, x);
    }
    // (-i)^k, with the sign of t entering through J_k(-x) = (-1)^k J_k(x).
    let unit = if t >= 0.0 { Complex64::new(0.0, -1.0) } else { Complex64::new(0.0, 1.0) };
    let mut pow = Complex64::new(1.0, 0.0);
    j.iter()
        .enumerate()
        .map(|(m, v)| {
            let c = if m == 0 { 1.0 } else { 2.0 } * v * pow;
            pow *= unit;
            c
        })
        .collect()
}

/// Evaluates `sum c_k T_k(H / a) f` by the three-term recurrence.
pub fn chebyshev_apply(h: &AssembledOperator, a: f64, coeffs: &[Complex64], f: &[Complex64]) -> CVec {
    let mut out: CVec = f.iter().map(|v| coeffs[0] * v).collect();
    if coeffs.len() == 1 {
        return out;
    }
    let mut t_prev = f.to_vec();
    let mut t_cur: CVec = h.apply(f).into_iter().map(|v| v / a).collect();
    axpy(coeffs[1], &t_cur, &mut out);
    for c in &coeffs[2..] {
        let mut t_next = h.apply(&t_cur);
        t_next
            .iter_mut()
            .zip(&t_prev)
            .for_each(|(n, p)| *n = 2.0 * *n / a - p);
        axpy(*c, &t_next, &mut out);
        t_prev = std::mem::replace(&mut t_cur, t_next);
    }
    out
}

/// Spectral radius bound used for Chebyshev scaling: the Gershgorin bound
/// with a small safety factor.
pub fn spectral_bound(h: &AssembledOperator) -> f64 {
    1.01 * h.matrix.gershgorin_bound().max(1e-12)
}

/// `exp(-i t H) f` by Chebyshev expansion.
pub fn evolve(h: &AssembledOperator, f: &[Complex64], t: f64) -> CVec {
    if t == 0.0 {
        return f.to_vec();
    }
    let a = spectral_bound(h);
    chebyshev_apply(h, a, &evolution_coefficients(a, t), f)
}

/// Time stepper reusing one coefficient set for a fixed step.
pub struct Propagator<'a> {
    h: &'a AssembledOperator,
    a: f64,
    coeffs: Vec<Complex64>,
}

impl<'a> Propagator<'a> {
    /// Stepper for `exp(-i dt H)`.
    pub fn new(h: &'a AssembledOperator, dt: f64) -> Self {
        let a = spectral_bound(h);
        Propagator {
            h,
            a,
            coeffs: evolution_coefficients(a, dt),
        }
    }

    /// One step.
    pub fn step(&self, f: &[Complex64]) -> CVec {
        chebyshev_apply(self.h, self.a, &self.coeffs, f)
    }
}

/// Jackson damping factors for a Chebyshev series of the given length.
pub fn jackson_kernel(len: usize) -> Vec<f64> {
    let np = (len + 1) as f64;
    (0..len)
        .map(|k| {
            let k = k as f64;
            ((np - k) * (PI * k / np).cos() + (PI * k / np).sin() / (PI / np).tan()) / np
        })
        .collect()
}

/// Degree of the Chebyshev spectral filter.
pub const FILTER_DEGREE: usize = 600;

/// Approximates `E_[a,b](H) f` by a Jackson-damped Chebyshev expansion of the indicator.
pub fn spectral_filter(h: &AssembledOperator, a: f64, b: f64, f: &[Complex64], degree: usize) -> CVec {
    let s = spectral_bound(h);
    let (ta, tb) = ((a / s).clamp(-1.0, 1.0).acos(), (b / s).clamp(-1.0, 1.0).acos());
    let g = jackson_kernel(degree + 1);
    let coeffs: Vec<Complex64> = (0..=degree)
        .map(|k| {
            let c = if k == 0 {
                (ta - tb) / PI
            } else {
                2.0 * ((k as f64 * ta).sin() - (k as f64 * tb).sin()) / (PI * k as f64)
            };
            Complex64::new(g[k] * c, 0.0)
        })
        .collect();
    chebyshev_apply(h, s, &coeffs, f)
}

/// Largest dimension for which the projection is computed by dense diagonalization.
pub const DENSE_PROJECTION_DIM: usize = 4096;

/// `E_[a,b](H) f`: exact for real symmetric operators of dimension at most
/// [`DENSE_PROJECTION_DIM`], a Jackson-filtered Chebyshev approximation otherwise.
pub fn project(h: &AssembledOperator, a: f64, b: f64, f: &[Complex64]) -> CVec {
    if h.dim() > DENSE_PROJECTION_DIM || h.matrix.max_imag() > 1e-14 {
        return spectral_filter(h, a, b, f, FILTER_DEGREE);
    }
    let (vals, vecs) = crate::linalg::sym_eigen(&h.matrix.to_dense_real());
    let mut out = vec![Complex64::new(0.0, 0.0); f.len()];
    for (k, &e) in vals.iter().enumerate() {
        if e < a || e > b {
            continue;
        }
        let c: Complex64 = (0..f.len()).map(|r| vecs[(r, k)] * f[r]).sum();
        for (r, o) in out.iter_mut().enumerate() {
            *o += c * vecs[(r, k)];
        }
    }
    out
}

/// Inverse participation ratio above which an eigenvector counts as localized.
pub const LOCALIZATION_IPR: f64 = 0.02;

/// Eigenvalues of a real symmetric box operator whose eigenvectors are
/// localized in the bulk: inverse participation ratio `sum |v|^4` above `ipr`
/// and more than half of the mass in the central quarter of the box. The
/// second condition discards edge states of Dirichlet boxes.
pub fn localized_eigenvalues(h: &AssembledOperator, ipr: f64) -> Result<Vec<f64>> {
    if h.matrix.max_imag() > 1e-14 {
        return Err(HexError::InvalidArgument("localization test requires a real symmetric matrix".into()));
    }
    let (vals, vecs) = crate::linalg::sym_eigen(&h.matrix.to_dense_real());
    Ok(vals
        .iter()
        .enumerate()
        .filter(|(k, _)| {
            let ipr_k: f64 = (0..h.dim()).map(|r| vecs[(r, *k)].powi(4)).sum();
            let central: f64 = (0..h.dim())
                .filter(|&r| {
                    let s = h.bbox.site(r);
                    4 * s.n1.abs() <= h.bbox.size as i64 && 4 * s.n2.abs() <= h.bbox.size as i64
                })
                .map(|r| vecs[(r, *k)].powi(2))
                .sum();
            ipr_k > ipr && central > 0.5
        })
        .map(|(_, e)| *e)
        .collect())
}

/// Time-integrated weighted norm of the projected evolution.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropagationRecord {
    pub a: f64,
    pub b: f64,
    pub s: f64,
    pub horizon: f64,
    pub dt: f64,
    /// Checkpoint times `T_k`.
    pub checkpoints: Vec<f64>,
    /// `int_0^{T_k} || Lambda^{-s} e^{-itH} E f ||^2 dt`.
    pub partial: Vec<f64>,
    /// `|| E f ||^2`.
    pub projected_mass: f64,
    pub saturated: bool,
}

/// Largest share of the total that the last quarter of the horizon may contribute.
pub const SATURATION_SHARE: f64 = 0.05;

impl PropagationRecord {
    /// Total integral over the horizon.
    pub fn total(&self) -> f64 {
        *self.partial.last().unwrap_or(&0.0)
    }

    /// Partial integral at the checkpoint closest to `t`.
    pub fn at(&self, t: f64) -> f64 {
        let k = self
            .checkpoints
            .iter()
            .enumerate()
            .min_by(|x, y| (x.1 - t).abs().total_cmp(&(y.1 - t).abs()))
            .map(|x| x.0)
            .unwrap_or(0);
        self.partial.get(k).copied().unwrap_or(0.0)
    }

    /// Share of the total contributed by the last quarter of the horizon.
    pub fn tail_share(&self) -> f64 {
        let tot = self.total();
        if tot <= 0.0 {
            return 0.0;
        }
        (tot - self.at(0.75 * self.horizon)) / tot
    }

    /// Writes one row per checkpoint: `T,integral`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["T", "integral"])?;
        for (t, v) in self.checkpoints.iter().zip(&self.partial) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Trapezoidal accumulation of `|| Lambda^{-s} e^{-itH} E_[a,b] f ||^2` over `[0, T]`.
pub fn propagation_integral(h: &AssembledOperator, a: f64, b: f64, f: &[Complex64], s: f64, horizon: f64, dt: f64) -> Result<PropagationRecord> {
    if dt <= 0.0 || horizon <= 0.0 {
        return Err(HexError::InvalidArgument("horizon and time step must be positive".into()));
    }
    let steps = (horizon / dt).round() as usize;
    let g = project(h, a, b, f);
    let projected_mass = norm(&g).powi(2);
    let bbox = h.bbox;
    let density = |v: &[Complex64]| norm(&weight_apply(-s, v, &bbox)).powi(2);
    let prop = Propagator::new(h, dt);
    let mut state = g;
    let mut prev = density(&state);
    let mut acc = 0.0;
    let mut checkpoints = vec![0.0];
    let mut partial = vec![0.0];
    for k in 1..=steps {
        state = prop.step(&state);
        let cur = density(&state);
        acc += 0.5 * dt * (prev + cur);
        prev = cur;
        checkpoints.push(k as f64 * dt);
        partial.push(acc);
    }
    let mut rec = PropagationRecord {
        a,
        b,
        s,
        horizon: steps as f64 * dt,
        dt,
        checkpoints,
        partial,
        projected_mass,
        saturated: false,
    };
    rec.saturated = rec.tail_share() < SATURATION_SHARE;
    Ok(rec)
}

/// Modulus of the evolved field at one site over a time grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayTrace {
    pub times: Vec<f64>,
    pub amplitude: Vec<f64>,
}

impl DecayTrace {
    /// Largest amplitude for times in `[t0, t1]`.
    pub fn window_max(&self, t0: f64, t1: f64) -> f64 {
        self.times
            .iter()
            .zip(&self.amplitude)
            .filter(|(t, _)| **t >= t0 && **t <= t1)
            .map(|(_, a)| *a)
            .fold(0.0, f64::max)
    }

    /// Writes one row per time: `t,amplitude`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["t", "amplitude"])?;
        for (t, v) in self.times.iter().zip(&self.amplitude) {
            w.write_record([t.to_string(), v.to_string()])?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `|e^{-itH} f (site)|` for `t = 0, dt, ..., t_max` (negative `dt` runs backwards).
pub fn pointwise_decay(h: &AssembledOperator, f: &[Complex64], site: LatticeSite, dt: f64, t_max: f64) -> Result<DecayTrace> {
    let idx = h.bbox.flat_index(site)?;
    let steps = (t_max / dt.abs()).round() as usize;
    let prop = Propagator::new(h, dt);
    let mut state = f.to_vec();
    let mut times = vec![0.0];
    let mut amplitude = vec![state[idx].norm()];
    for k in 1..=steps {
        state = prop.step(&state);
        times.push(k as f64 * dt);
        amplitude.push(state[idx].norm());
    }
    Ok(DecayTrace { times, amplitude })
}

/// Unit vector at one site.
pub fn delta(bbox: &TruncationBox, site: LatticeSite) -> Result<CVec> {
    let mut f = vec![Complex64::new(0.0, 0.0); bbox.dim()];
    f[bbox.flat_index(site)?] = Complex64::new(1.0, 0.0);
    Ok(f)
}

/// The origin site on the first sublattice.
pub fn origin() -> LatticeSite {
    LatticeSite::new(0, 0, SublatticeTag::P1)
}

/// Largest component of the band group velocity `grad(sqrt(beta))/3` over an `m x m` grid.
pub fn max_group_velocity(m: usize) -> f64 {
    (0..m * m)
        .map(|k| {
            let x = Momentum::new(
                2.0 * PI * (k % m) as f64 / m as f64 + 1e-9,
                2.0 * PI * (k / m) as f64 / m as f64 + 1e-9,
            );
            let g = grad_sqrt_beta(x);
            g[0].abs().max(g[1].abs()) / 3.0
        })
        .fold(0.0, f64::max)
}

/// Time for a wavefront from the box center to reach the boundary and return.
pub fn boundary_return_time(bbox: &TruncationBox) -> f64 {
    bbox.size as f64 / max_group_velocity(256)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::linalg::{max_abs_diff, sym_eigen, SparseMatrix};
    use crate::operators::{free_hamiltonian, AssembledOperator};
    use faer::linalg::solvers::Solve;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn free(n: usize) -> AssembledOperator {
        free_hamiltonian(&TruncationBox::centered(n, Boundary::Dirichlet))
    }

    #[test]
    fn bessel_values() {
        let j = bessel_j(6, 1.0);
        assert!((j[0] - 0.765_197_686_557_966_6).abs() < 1e-14);
        assert!((j[1] - 0.440_050_585_744_933_5).abs() < 1e-14);
        let j = bessel_j(10, 10.0);
        assert!((j[5] + 0.234_061_528_186_793_6).abs() < 1e-13);
        let j = bessel_j(200, 100.0);
        assert!((j[0] - 0.019_985_850_304_223_12).abs() < 1e-12);
    }

    #[test]
    fn rho_sweep_ends_at_floor() {
        let r = rho_sweep(RHO_START, rho_floor(48));
        assert_eq!(r, vec![0.8, 0.4, 0.2, 0.1, 4.0 / 48.0]);
        assert_eq!(rho_floor(10_000), 1e-3);
    }

    #[test]
    fn resolvent_bound_imaginary_shift() {
        let h = free(12);
        let b = random_cvec(h.dim(), 1);
        let x = resolvent_solve(&h, Complex64::new(0.0, 2.0), &b).unwrap();
        assert!(norm(&x) <= norm(&b) / 2.0 + 1e-12);
    }

    #[test]
    fn resolvent_off_spectrum_real_part() {
        let h = free(12);
        let b = random_cvec(h.dim(), 2);
        let x = resolvent_solve(&h, Complex64::new(5.0, 1e-9), &b).unwrap();
        assert!(norm(&x) <= norm(&b) / 4.0 + 1e-9);
    }

    #[test]
    fn resolvent_rejects_real_shift() {
        let h = free(4);
        let b = random_cvec(h.dim(), 2);
        assert!(resolvent_solve(&h, Complex64::new(0.3, 0.0), &b).is_err());
    }

    #[test]
    fn resolvent_matches_dense_solve() {
        let n = 50;
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut trip = Vec::new();
        let mut dense = Mat::<Complex64>::zeros(n, n);
        for r in 0..n {
            for c in r..n {
                let v = if r == c {
                    Complex64::new(rng.gen_range(-1.0..1.0), 0.0)
                } else {
                    Complex64::new(rng.gen_range(-0.2..0.2), rng.gen_range(-0.2..0.2))
                };
                trip.push((r, c, v));
                dense[(r, c)] = v;
                if r != c {
                    trip.push((c, r, v.conj()));
                    dense[(c, r)] = v.conj();
                }
            }
        }
        let bbox = TruncationBox::new(5, Boundary::Dirichlet);
        let h = AssembledOperator {
            bbox,
            matrix: SparseMatrix::from_triplets(n, n, trip),
            hermitian_hint: true,
        };
        let z = Complex64::new(0.2, 0.05);
        let b = random_cvec(n, 4);
        let x = resolvent_solve(&h, z, &b).unwrap();
        let mut m = dense.clone();
        for k in 0..n {
            m[(k, k)] -= z;
        }
        let rhs = Mat::from_fn(n, 1, |r, _| b[r]);
        let sol = m.partial_piv_lu().solve(&rhs);
        let xd: CVec = (0..n).map(|r| sol[(r, 0)]).collect();
        assert!(max_abs_diff(&x, &xd) < 1e-9);
    }

    #[test]
    fn weighted_norm_off_spectrum() {
        let h = free(16);
        let s = 0.6;
        let v = weighted_resolvent_norm(&h, 5.0, 1e-3, s).unwrap();
        // Lambda >= sqrt 2 gives Lambda^{-2s} <= 2^{-s}; the distance to the spectrum is at least 4.
        assert!(v <= 2f64.powf(-s) / 4.0 + 1e-9);
        assert!(v >= 2f64.powf(-s) / 6.5);
    }

    #[test]
    fn weighted_norm_monotone_in_s() {
        let h = free(10);
        let a = weighted_resolvent_norm(&h, 0.6, 0.2, 0.6).unwrap();
        let b = weighted_resolvent_norm(&h, 0.6, 0.2, 0.9).unwrap();
        assert!(b <= a * (1.0 + NORM_TOL));
    }

    #[test]
    fn evolution_identity_at_zero() {
        let h = free(8);
        let f = random_cvec(h.dim(), 5);
        assert_eq!(evolve(&h, &f, 0.0), f);
    }

    #[test]
    fn evolution_matches_dense_eigensolve() {
        let h = free(8);
        let (vals, vecs) = sym_eigen(&h.matrix.to_dense_real());
        let f = random_cvec(h.dim(), 6);
        for t in [0.7, -3.0, 12.5] {
            let got = evolve(&h, &f, t);
            let mut want = vec![Complex64::new(0.0, 0.0); f.len()];
            for (k, e) in vals.iter().enumerate() {
                let c: Complex64 = (0..f.len()).map(|r| vecs[(r, k)] * f[r]).sum::<Complex64>() * Complex64::from_polar(1.0, -t * e);
                for (r, w) in want.iter_mut().enumerate() {
                    *w += c * vecs[(r, k)];
                }
            }
            assert!(max_abs_diff(&got, &want) < 1e-8, "t = {t}");
        }
        let v: CVec = (0..f.len()).map(|r| Complex64::new(vecs[(r, 10)], 0.0)).collect();
        let got = evolve(&h, &v, 4.0);
        let want: CVec = v.iter().map(|x| x * Complex64::from_polar(1.0, -4.0 * vals[10])).collect();
        assert!(max_abs_diff(&got, &want) < 1e-9);
    }

    #[test]
    fn evolution_unitarity_long_time() {
        let h = free(48);
        let f = delta(&h.bbox, origin()).unwrap();
        let g = evolve(&h, &f, 100.0);
        assert!((norm(&g) - 1.0).abs() < 1e-8);
    }

    #[test]
    fn projection_kills_orthogonal_input() {
        let h = free(12);
        let (vals, vecs) = sym_eigen(&h.matrix.to_dense_real());
        let k = vals.iter().position(|&e| e > 0.1 && e < 0.4).unwrap();
        let f: CVec = (0..h.dim()).map(|r| Complex64::new(vecs[(r, k)], 0.0)).collect();
        let rec = propagation_integral(&h, 0.5, 0.9, &f, 0.6, 10.0, 0.5).unwrap();
        assert!(rec.total() < 1e-20);
    }

    #[test]
    fn filter_approximates_dense_projection() {
        let h = free(12);
        let f = delta(&h.bbox, origin()).unwrap();
        let exact = project(&h, 0.5, 0.9, &f);
        let approx = spectral_filter(&h, 0.5, 0.9, &f, FILTER_DEGREE);
        let e = norm(&exact).powi(2);
        assert!((norm(&approx).powi(2) - e).abs() < 0.05 * e);
    }

    #[test]
    fn propagation_partials_non_decreasing() {
        let h = free(16);
        let f = delta(&h.bbox, origin()).unwrap();
        let rec = propagation_integral(&h, 0.5, 0.9, &f, 0.6, 8.0, 0.25).unwrap();
        assert!(rec.partial.windows(2).all(|w| w[1] >= w[0]));
        assert!(rec.projected_mass > 0.0 && rec.projected_mass < 1.0);
    }

    #[test]
    fn time_reversal_of_trace() {
        let h = free(16);
        let f = random_cvec(h.dim(), 8);
        let fc: CVec = f.iter().map(|v| v.conj()).collect();
        let fw = pointwise_decay(&h, &f, origin(), 0.5, 10.0).unwrap();
        let bw = pointwise_decay(&h, &fc, origin(), -0.5, 10.0).unwrap();
        for (a, b) in fw.amplitude.iter().zip(&bw.amplitude) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn localized_states_are_detected() {
        let bbox = TruncationBox::centered(12, Boundary::Dirichlet);
        assert!(localized_eigenvalues(&free_hamiltonian(&bbox), LOCALIZATION_IPR).unwrap().is_empty());
        let v = crate::operators::PotentialField::new(std::sync::Arc::new(|s: LatticeSite| if s.n1 == 0 && s.n2 == 0 && s.tag == SublatticeTag::P1 { 3.0 } else { 0.0 }));
        let h = crate::operators::hamiltonian(&crate::operators::MetricField::trivial(), &v, &bbox);
        let loc = localized_eigenvalues(&h, LOCALIZATION_IPR).unwrap();
        assert_eq!(loc.len(), 1);
        assert!(loc[0] > 1.0);
    }

    #[test]
    fn plateau_rule() {
        let rho = [0.4, 0.2, 0.1];
        assert!(plateau_flag(&rho, &[1.0, 1.2, 1.21]));
        assert!(!plateau_flag(&rho, &[1.0, 1.2, 1.5]));
    }
}
