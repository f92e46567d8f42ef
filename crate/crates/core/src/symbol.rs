//! Momentum-space side of the free Laplacian.
//!
//! With the Fourier transform `F f(x) = (1/2pi) sum_n f(n) e^{-i n.x}` the
//! Laplacian becomes multiplication by the Hermitian matrix
//! `F(x) = (1/3) [[0, conj(w)], [w, 0]]` where `w(x) = 1 + e^{i x1} + e^{i x2}`.
//! Its eigenvalues are `+-sqrt(beta)/3` with `beta = |w|^2`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// A 2x2 complex matrix stored row-major.
pub type Mat2 = [[Complex64; 2]; 2];

/// Below this value of `beta` a momentum is treated as a Dirac point.
pub const TOL_DIRAC: f64 = 1e-12;

/// A point of the torus `[-pi, pi]^2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Momentum {
    pub x1: f64,
    pub x2: f64,
}

impl Momentum {
    /// Builds a momentum, wrapping each component into `[-pi, pi)`.
    pub fn new(x1: f64, x2: f64) -> Self {
        Self {
            x1: wrap_angle(x1),
            x2: wrap_angle(x2),
        }
    }

    /// Builds a momentum without wrapping (used for the closed boundary `pi`).
    pub const fn raw(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }
}

/// Wraps an angle into `[-pi, pi)`.
pub fn wrap_angle(x: f64) -> f64 {
    let y = (x + PI).rem_euclid(2.0 * PI) - PI;
    if y >= PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Grid coordinate `-pi + 2 pi m / M`.
pub fn grid_coordinate(m: usize, size: usize) -> f64 {
    -PI + 2.0 * PI * m as f64 / size as f64
}

/// `w(x) = 1 + e^{i x1} + e^{i x2}`.
pub fn w(x: Momentum) -> Complex64 {
    Complex64::new(1.0 + x.x1.cos() + x.x2.cos(), x.x1.sin() + x.x2.sin())
}

/// Gradient of `w`.
pub fn grad_w(x: Momentum) -> [Complex64; 2] {
    let i = Complex64::i();
    [i * Complex64::cis(x.x1), i * Complex64::cis(x.x2)]
}

/// `beta(x) = 3 + 2 (cos x1 + cos x2 + cos(x1 - x2))`.
pub fn beta(x: Momentum) -> f64 {
    3.0 + 2.0 * (x.x1.cos() + x.x2.cos() + (x.x1 - x.x2).cos())
}

/// Gradient of `beta`.
pub fn grad_beta(x: Momentum) -> [f64; 2] {
    let s12 = (x.x1 - x.x2).sin();
    [-2.0 * (x.x1.sin() + s12), -2.0 * (x.x2.sin() - s12)]
}

/// Laplacian of `beta`.
pub fn laplacian_beta(x: Momentum) -> f64 {
    -2.0 * (x.x1.cos() + x.x2.cos() + 2.0 * (x.x1 - x.x2).cos())
}

/// Squared Euclidean norm of the gradient of `beta`.
pub fn grad_beta_sq(x: Momentum) -> f64 {
    let g = grad_beta(x);
    g[0] * g[0] + g[1] * g[1]
}

/// Gradient of `sqrt(beta)`; zero at Dirac points by convention.
pub fn grad_sqrt_beta(x: Momentum) -> [f64; 2] {
    let b = beta(x);
    if b < TOL_DIRAC {
        return [0.0, 0.0];
    }
    let g = grad_beta(x);
    let s = 2.0 * b.sqrt();
    [g[0] / s, g[1] / s]
}

/// The symbol matrix `F(x)`.
pub fn symbol_matrix(x: Momentum) -> Mat2 {
    let wx = w(x) / 3.0;
    let z = Complex64::new(0.0, 0.0);
    [[z, wx.conj()], [wx, z]]
}

/// Diagonalisation data of `F(x)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenData {
    /// Diagonal of `D`: `(sqrt(beta)/3, -sqrt(beta)/3)`, or zeros at a Dirac point.
    pub d: [f64; 2],
    /// Columns are eigenvectors: `[[1, 1], [u, -u]]` with `u = w / sqrt(beta)`.
    pub p: Mat2,
    /// Inverse of `p`.
    pub pinv: Mat2,
    /// True when `beta(x) <= TOL_DIRAC`.
    pub dirac_flag: bool,
}

/// Closed-form diagonalisation `F = P D P^{-1}`.
pub fn eigendecomposition(x: Momentum) -> EigenData {
    let b = beta(x);
    let one = Complex64::new(1.0, 0.0);
    let zero = Complex64::new(0.0, 0.0);
    if b <= TOL_DIRAC {
        let id = [[one, zero], [zero, one]];
        return EigenData {
            d: [0.0, 0.0],
            p: id,
            pinv: id,
            dirac_flag: true,
        };
    }
    let sb = b.sqrt();
    let wx = w(x);
    let ubar = wx / sb;
    let u = wx.conj() / sb;
    EigenData {
        d: [sb / 3.0, -sb / 3.0],
        p: [[one, one], [ubar, -ubar]],
        pinv: [[one * 0.5, u * 0.5], [one * 0.5, -u * 0.5]],
        dirac_flag: false,
    }
}

/// Product of two 2x2 matrices.
pub fn mat2_mul(a: &Mat2, b: &Mat2) -> Mat2 {
    let mut c = [[Complex64::new(0.0, 0.0); 2]; 2];
    for i in 0..2 {
        for j in 0..2 {
            c[i][j] = a[i][0] * b[0][j] + a[i][1] * b[1][j];
        }
    }
    c
}

/// Largest entry modulus of `a - b`.
pub fn mat2_max_diff(a: &Mat2, b: &Mat2) -> f64 {
    let mut m: f64 = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            m = m.max((a[i][j] - b[i][j]).norm());
        }
    }
    m
}

/// Diagonal matrix from two reals.
pub fn mat2_diag(d: [f64; 2]) -> Mat2 {
    let z = Complex64::new(0.0, 0.0);
    [[Complex64::new(d[0], 0.0), z], [z, Complex64::new(d[1], 0.0)]]
}

/// A critical point of `sqrt(beta)` together with its critical value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub x: Momentum,
    pub sqrt_beta: f64,
}

/// The nine critical points of `sqrt(beta)` away from the Dirac points, and the
/// sorted set of distinct critical values.
pub fn critical_points() -> (Vec<CriticalPoint>, Vec<f64>) {
    let coords = [-PI, 0.0, PI];
    let mut pts = Vec::with_capacity(9);
    for &a in &coords {
        for &b in &coords {
            let x = Momentum::raw(a, b);
            pts.push(CriticalPoint {
                x,
                sqrt_beta: beta(x).max(0.0).sqrt(),
            });
        }
    }
    let mut values: Vec<f64> = Vec::new();
    for p in &pts {
        let v = p.sqrt_beta.round();
        if !values.iter().any(|&u| (u - v).abs() < 1e-9) {
            values.push(v);
        }
    }
    values.sort_by(f64::total_cmp);
    (pts, values)
}

/// Threshold energies `+-sqrt(beta(Gamma))/3` together with `0`, sorted.
pub fn thresholds() -> Vec<f64> {
    let (_, values) = critical_points();
    let mut t = vec![0.0];
    for v in values {
        t.push(v / 3.0);
        t.push(-v / 3.0);
    }
    t.sort_by(f64::total_cmp);
    t
}

/// All momenta where `beta` vanishes, i.e. the Dirac points.
pub fn dirac_points() -> [Momentum; 2] {
    [
        Momentum::raw(2.0 * PI / 3.0, -2.0 * PI / 3.0),
        Momentum::raw(-2.0 * PI / 3.0, 2.0 * PI / 3.0),
    ]
}

/// One row of the dispersion table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DispersionPoint {
    pub x1: f64,
    pub x2: f64,
    pub beta: f64,
    pub lambda_plus: f64,
    pub lambda_minus: f64,
}

/// Band energies on the `M x M` grid `x = -pi + 2 pi m / M`.
pub fn dispersion_grid(size: usize) -> Vec<DispersionPoint> {
    assert!(size >= 2, "grid size must be at least 2");
    let mut out = Vec::with_capacity(size * size);
    for m1 in 0..size {
        for m2 in 0..size {
            let x = Momentum::raw(grid_coordinate(m1, size), grid_coordinate(m2, size));
            let b = beta(x).max(0.0);
            out.push(DispersionPoint {
                x1: x.x1,
                x2: x.x2,
                beta: b,
                lambda_plus: b.sqrt() / 3.0,
                lambda_minus: -b.sqrt() / 3.0,
            });
        }
    }
    out
}

/// Writes a dispersion table as CSV with columns `x1,x2,beta,lambda_plus,lambda_minus`.
pub fn write_dispersion_csv<W: Write>(points: &[DispersionPoint], out: W) -> crate::Result<()> {
    let mut wtr = csv::Writer::from_writer(out);
    for p in points {
        wtr.serialize(p)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Eigenvalues of the periodic `N x N` box Laplacian predicted by the symbol,
/// sorted ascending: `+-sqrt(beta(2 pi m / N))/3` for all `N^2` momenta.
pub fn periodic_spectrum(size: usize) -> Vec<f64> {
    let mut ev = Vec::with_capacity(2 * size * size);
    for m1 in 0..size {
        for m2 in 0..size {
            let x = Momentum::raw(
                2.0 * PI * m1 as f64 / size as f64,
                2.0 * PI * m2 as f64 / size as f64,
            );
            let s = beta(x).max(0.0).sqrt() / 3.0;
            ev.push(s);
            ev.push(-s);
        }
    }
    ev.sort_by(f64::total_cmp);
    ev
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn beta_examples() {
        assert!((beta(Momentum::raw(0.0, 0.0)) - 9.0).abs() < 1e-14);
        assert!((beta(Momentum::raw(PI, 0.0)) - 1.0).abs() < 1e-14);
        assert!(beta(Momentum::raw(2.0 * PI / 3.0, -2.0 * PI / 3.0)).abs() < 1e-14);
    }

    #[test]
    fn beta_at_the_diagonal_third_point_is_three() {
        let x = Momentum::raw(2.0 * PI / 3.0, 2.0 * PI / 3.0);
        assert!((beta(x) - 3.0).abs() < 1e-14);
        assert!(!eigendecomposition(x).dirac_flag);
    }

    #[test]
    fn symbol_examples() {
        let f = symbol_matrix(Momentum::raw(0.0, 0.0));
        assert!((f[0][1] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        assert!((f[1][0] - Complex64::new(1.0, 0.0)).norm() < 1e-15);
        let g = symbol_matrix(Momentum::raw(2.0 * PI / 3.0, -2.0 * PI / 3.0));
        assert!(g.iter().flatten().all(|z| z.norm() < 1e-15));
        let e = eigendecomposition(Momentum::raw(2.0 * PI / 3.0, -2.0 * PI / 3.0));
        assert!(e.dirac_flag && e.d == [0.0, 0.0]);
    }

    #[test]
    fn eigenvalues_at_pi_zero() {
        // Eigenvalues of the Hermitian off-diagonal matrix [[0, a], [conj a, 0]] are +-|a|.
        let f = symbol_matrix(Momentum::raw(PI, 0.0));
        let ev = f[0][1].norm();
        assert!((ev - 1.0 / 3.0).abs() < 1e-15);
        let d = eigendecomposition(Momentum::raw(PI, 0.0)).d;
        assert!((d[0] - 1.0 / 3.0).abs() < 1e-15 && (d[1] + 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn reconstruction_at_generic_point() {
        let x = Momentum::raw(0.7, -1.3);
        let e = eigendecomposition(x);
        let rec = mat2_mul(&mat2_mul(&e.p, &mat2_diag(e.d)), &e.pinv);
        assert!(mat2_max_diff(&rec, &symbol_matrix(x)) < 1e-12);
        let id = mat2_mul(&e.p, &e.pinv);
        assert!(mat2_max_diff(&id, &mat2_diag([1.0, 1.0])) < 1e-12);
    }

    #[test]
    fn critical_point_set() {
        let (pts, values) = critical_points();
        assert_eq!(pts.len(), 9);
        assert_eq!(values, vec![1.0, 3.0]);
        for p in &pts {
            let g = grad_sqrt_beta(p.x);
            assert!(g[0].hypot(g[1]) < 1e-10);
        }
        assert!(pts
            .iter()
            .any(|p| p.x == Momentum::raw(0.0, 0.0) && (p.sqrt_beta - 3.0).abs() < 1e-14));
        assert!(pts
            .iter()
            .any(|p| p.x == Momentum::raw(PI, 0.0) && (p.sqrt_beta - 1.0).abs() < 1e-14));
    }

    #[test]
    fn threshold_list() {
        assert_eq!(thresholds(), vec![-1.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0]);
    }

    #[test]
    fn dispersion_two_by_two() {
        let g = dispersion_grid(2);
        let mut v: Vec<f64> = g.iter().flat_map(|p| [p.lambda_plus, p.lambda_minus]).collect();
        v.sort_by(f64::total_cmp);
        let expect = [-1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (a, b) in v.iter().zip(expect) {
            assert!((a - b).abs() < 1e-14);
        }
        assert!(dispersion_grid(16).iter().all(|p| p.lambda_plus <= 1.0 + 1e-15));
    }

    #[test]
    fn dispersion_csv_header() {
        let mut buf = Vec::new();
        write_dispersion_csv(&dispersion_grid(2), &mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("x1,x2,beta,lambda_plus,lambda_minus\n"));
        assert_eq!(s.lines().count(), 5);
    }

    #[test]
    fn finite_difference_gradient_at_gamma() {
        let h = 1e-4;
        for p in critical_points().0 {
            let f = |a: f64, b: f64| beta(Momentum::raw(a, b)).sqrt();
            let g1 = (f(p.x.x1 + h, p.x.x2) - f(p.x.x1 - h, p.x.x2)) / (2.0 * h);
            let g2 = (f(p.x.x1, p.x.x2 + h) - f(p.x.x1, p.x.x2 - h)) / (2.0 * h);
            assert!(g1.abs() < 1e-6 && g2.abs() < 1e-6);
        }
    }
}
