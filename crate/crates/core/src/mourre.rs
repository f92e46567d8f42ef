//! Commutators with the conjugate operator, spectral projections and the
//! numerical Mourre estimate.
//!
//! The commutator `C = i(HA - AH)` is computed by matrix-vector products on an
//! outer Dirichlet box and compressed to the sites at depth at least
//! [`COMMUTATOR_MARGIN`]. With that margin every intermediate vector stays
//! inside the outer box, so the compression coincides with the compression of
//! the infinite-lattice commutator. Projections use the Dirichlet restriction
//! of `H` to the same interior block.

use crate::conjugate::{ConjugateOperator, TorusGrid};
use crate::error::{HexError, Result};
use crate::lattice::{Boundary, TruncationBox};
use crate::linalg::{sym_eigen, sym_eigenvalues, symmetry_defect, SparseMatrix};
use crate::operators::{assemble, MetricField, PotentialField, StencilOperator};
use crate::symbol::{beta, grad_beta_sq, grid_coordinate, thresholds, Momentum};
use faer::Mat;
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Depth (in cells) of the discarded boundary layer.
pub const COMMUTATOR_MARGIN: usize = 4;

/// Factor of the symbol constant that the projected commutator must reach.
pub const FINITE_SIZE_FACTOR: f64 = 0.5;

/// A closed energy window `[a, b]` inside `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyInterval {
    pub a: f64,
    pub b: f64,
    pub threshold_margin: f64,
}

impl EnergyInterval {
    /// Validated interval.
    pub fn new(a: f64, b: f64, threshold_margin: f64) -> Result<Self> {
        if !(a < b) || a < -1.0 || b > 1.0 || !(threshold_margin > 0.0) {
            return Err(HexError::InvalidArgument(format!(
                "energy interval [{a}, {b}] with margin {threshold_margin} must satisfy -1 <= a < b <= 1 and margin > 0"
            )));
        }
        Ok(Self { a, b, threshold_margin })
    }

    /// Distance from the interval to the nearest threshold.
    pub fn distance_to_thresholds(&self) -> f64 {
        thresholds()
            .into_iter()
            .map(|t| {
                if t < self.a {
                    self.a - t
                } else if t > self.b {
                    t - self.b
                } else {
                    0.0
                }
            })
            .fold(f64::INFINITY, f64::min)
    }

    /// True when every threshold is at least `threshold_margin` away.
    pub fn respects_margin(&self) -> bool {
        self.distance_to_thresholds() >= self.threshold_margin - 1e-15
    }

    /// Membership.
    pub fn contains(&self, e: f64) -> bool {
        e >= self.a && e <= self.b
    }

    /// Membership of `e` in `|I| u -|I|`.
    pub fn contains_abs(&self, e: f64) -> bool {
        self.contains(e) || self.contains(-e)
    }

    /// The reflected interval `[-b, -a]`.
    pub fn mirror(&self) -> Self {
        Self {
            a: -self.b,
            b: -self.a,
            threshold_margin: self.threshold_margin,
        }
    }
}

/// Outcome of a Mourre check on one interval.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MourreReport {
    pub interval: EnergyInterval,
    /// Infimum of the commutator symbol over the preimage of the interval.
    pub c_symbol: f64,
    /// Smallest eigenvalue of the projected commutator.
    pub c_matrix: f64,
    /// Rank of the spectral projection.
    pub rank: usize,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
}

impl MourreReport {
    /// `c_symbol > 0` and `c_matrix >= factor * c_symbol`.
    pub fn passes(&self, factor: f64) -> bool {
        self.c_symbol > 0.0 && self.c_matrix >= factor * self.c_symbol
    }
}

/// Interior compression of a commutator.
#[derive(Debug, Clone)]
pub struct CommutatorCompression {
    /// The interior block as a box of its own.
    pub inner: TruncationBox,
    /// Outer flat index of each inner flat index.
    pub map: Vec<usize>,
    /// Real part of the compressed matrix.
    pub matrix: Mat<f64>,
    /// Largest imaginary entry (zero for real `H` and real-antisymmetric `-iA`).
    pub max_imag: f64,
}

impl CommutatorCompression {
    /// Largest entry of `C - C^T`.
    pub fn hermitian_defect(&self) -> f64 {
        symmetry_defect(&self.matrix)
    }
}

/// The interior block of a Dirichlet box and its index map.
pub fn interior(outer: &TruncationBox, margin: usize) -> Result<(TruncationBox, Vec<usize>)> {
    if outer.bc != Boundary::Dirichlet || outer.size <= 2 * margin {
        return Err(HexError::InvalidArgument(format!(
            "commutator compression needs a Dirichlet box larger than {} cells",
            2 * margin
        )));
    }
    let inner = TruncationBox {
        size: outer.size - 2 * margin,
        bc: Boundary::Dirichlet,
        lo: outer.lo + margin as i64,
    };
    let map = inner.sites().map(|s| outer.flat_index(s)).collect::<Result<Vec<_>>>()?;
    Ok((inner, map))
}

/// Interior compression of `i(HA - AH)` for sparse `H` and `A` on the same Dirichlet box.
pub fn commutator_matrix(h: &SparseMatrix, a: &SparseMatrix, outer: &TruncationBox, margin: usize) -> Result<CommutatorCompression> {
    let (inner, map) = interior(outer, margin)?;
    let dim = outer.dim();
    let cols: Vec<Vec<Complex64>> = map
        .par_iter()
        .map(|&j| {
            let mut e = vec![Complex64::new(0.0, 0.0); dim];
            e[j] = Complex64::new(1.0, 0.0);
            let hae = h.matvec(&a.matvec(&e));
            let ahe = a.matvec(&h.matvec(&e));
            map.iter()
                .map(|&r| Complex64::i() * (hae[r] - ahe[r]))
                .collect()
        })
        .collect();
    let k = map.len();
    let matrix = Mat::from_fn(k, k, |r, c| cols[c][r].re);
    let max_imag = cols.iter().flatten().fold(0.0f64, |m, v| m.max(v.im.abs()));
    Ok(CommutatorCompression {
        inner,
        map,
        matrix,
        max_imag,
    })
}

/// Dense real compression of a sparse matrix to the given index set.
pub fn compress(h: &SparseMatrix, map: &[usize]) -> Mat<f64> {
    Mat::from_fn(map.len(), map.len(), |r, c| h.get(map[r], map[c]).re)
}

/// Grid defect of the scalar commutator identity on the given test function.
pub fn commutator_symbol_check(m: usize, g: &TorusGrid) -> Result<f64> {
    if m < 64 || g.m != m {
        return Err(HexError::InvalidArgument(format!("commutator symbol check needs M >= 64, got {m}")));
    }
    Ok(crate::conjugate::commutator_symbol_defect(g))
}

/// The commutator symbol `(5/12) beta |grad beta|^2`.
pub fn commutator_symbol(x: Momentum) -> f64 {
    5.0 / 12.0 * beta(x) * grad_beta_sq(x)
}

/// Minimum of the commutator symbol over the grid points whose band energy
/// `sqrt(beta)/3` lies in `|I| u -|I|`.
pub fn mourre_constant(interval: &EnergyInterval, m: usize) -> Result<f64> {
    let best = (0..m)
        .into_par_iter()
        .map(|a| {
            let mut best = f64::INFINITY;
            for b in 0..m {
                let x = Momentum::raw(grid_coordinate(a, m), grid_coordinate(b, m));
                if interval.contains_abs(beta(x).max(0.0).sqrt() / 3.0) {
                    best = best.min(commutator_symbol(x));
                }
            }
            best
        })
        .reduce(|| f64::INFINITY, f64::min);
    if best.is_finite() {
        Ok(best)
    } else {
        Err(HexError::EmptyPreimage {
            a: interval.a,
            b: interval.b,
            m,
        })
    }
}

/// Eigenvectors of a real symmetric matrix with eigenvalues in an interval.
#[derive(Debug, Clone)]
pub struct SpectralProjection {
    /// Orthonormal columns spanning the range.
    pub vectors: Mat<f64>,
    /// The selected eigenvalues.
    pub eigenvalues: Vec<f64>,
}

impl SpectralProjection {
    /// Rank.
    pub fn rank(&self) -> usize {
        self.eigenvalues.len()
    }

    /// The projector `V V^T` as a dense matrix.
    pub fn projector(&self) -> Mat<f64> {
        &self.vectors * self.vectors.transpose()
    }
}

/// Largest dimension accepted by dense projections.
pub const MAX_DENSE_DIM: usize = 8192;

/// Spectral projection of a dense real symmetric matrix onto `[a, b]`.
pub fn spectral_projection_dense(h: &Mat<f64>, interval: &EnergyInterval) -> Result<SpectralProjection> {
    if h.nrows() > MAX_DENSE_DIM {
        return Err(HexError::InvalidArgument(format!(
            "dense projection limited to dimension {MAX_DENSE_DIM}, got {}",
            h.nrows()
        )));
    }
    let (vals, vecs) = sym_eigen(h);
    let keep: Vec<usize> = (0..vals.len()).filter(|&k| interval.contains(vals[k])).collect();
    let vectors = Mat::from_fn(h.nrows(), keep.len(), |r, c| vecs[(r, keep[c])]);
    Ok(SpectralProjection {
        vectors,
        eigenvalues: keep.iter().map(|&k| vals[k]).collect(),
    })
}

/// Spectral projection of an assembled real symmetric operator.
pub fn spectral_projection(h: &crate::operators::AssembledOperator, interval: &EnergyInterval) -> Result<SpectralProjection> {
    if h.matrix.max_imag() > 1e-14 {
        return Err(HexError::InvalidArgument("spectral projection requires a real symmetric matrix".into()));
    }
    spectral_projection_dense(&h.matrix.to_dense_real(), interval)
}

/// Smallest eigenvalue of `V^T C V` and the rank of `V`.
pub fn projected_minimum(c: &Mat<f64>, proj: &SpectralProjection, interval: &EnergyInterval) -> Result<f64> {
    if proj.rank() == 0 {
        return Err(HexError::DegenerateProjection {
            a: interval.a,
            b: interval.b,
        });
    }
    let v = &proj.vectors;
    let pc = v.transpose() * c * v;
    let sym = Mat::from_fn(pc.nrows(), pc.ncols(), |r, s| 0.5 * (pc[(r, s)] + pc[(s, r)]));
    Ok(sym_eigenvalues(&sym)[0])
}

/// Full Mourre check for a Hamiltonian stencil on an inner box of side `n`
/// (centered, Dirichlet); the commutator is formed on a box enlarged by the margin.
pub fn mourre_check(
    h: &StencilOperator,
    a: &ConjugateOperator,
    n: usize,
    interval: &EnergyInterval,
    m: usize,
) -> Result<MourreReport> {
    let outer = TruncationBox::centered(n + 2 * COMMUTATOR_MARGIN, Boundary::Dirichlet);
    let hm = assemble(h, &outer, true).matrix;
    let am = assemble(&a.stencil(), &outer, true).matrix;
    let comp = commutator_matrix(&hm, &am, &outer, COMMUTATOR_MARGIN)?;
    let hin = compress(&hm, &comp.map);
    let proj = spectral_projection_dense(&hin, interval)?;
    let c_matrix = projected_minimum(&comp.matrix, &proj, interval)?;
    let c_symbol = mourre_constant(interval, m)?;
    Ok(MourreReport {
        interval: *interval,
        c_symbol,
        c_matrix,
        rank: proj.rank(),
        n,
        m,
    })
}

/// One point of a perturbation-strength sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ThetaPoint {
    pub theta: f64,
    pub c_matrix: f64,
}

/// Projected-commutator minimum for the perturbation scaled by each `theta`.
pub fn theta_sweep(
    mf: &MetricField,
    v: &PotentialField,
    thetas: &[f64],
    n: usize,
    interval: &EnergyInterval,
) -> Result<Vec<ThetaPoint>> {
    let a = ConjugateOperator::canonical();
    let outer = TruncationBox::centered(n + 2 * COMMUTATOR_MARGIN, Boundary::Dirichlet);
    let am = assemble(&a.stencil(), &outer, true).matrix;
    thetas
        .iter()
        .map(|&theta| {
            let st = crate::operators::tilde_delta(&mf.scaled(theta)).plus(&v.scaled(theta).stencil());
            let hm = assemble(&st, &outer, true).matrix;
            let comp = commutator_matrix(&hm, &am, &outer, COMMUTATOR_MARGIN)?;
            let proj = spectral_projection_dense(&compress(&hm, &comp.map), interval)?;
            Ok(ThetaPoint {
                theta,
                c_matrix: projected_minimum(&comp.matrix, &proj, interval)?,
            })
        })
        .collect()
}

/// True when the distances `|c(theta) - target|` do not increase (up to `tol`)
/// along the sweep order.
pub fn approaches_monotonically(points: &[ThetaPoint], target: f64, tol: f64) -> bool {
    points
        .windows(2)
        .all(|w| (w[1].c_matrix - target).abs() <= (w[0].c_matrix - target).abs() + tol)
}

/// Symbol constants for intervals `[1/3 + d, b]` as `d` runs through `distances`.
pub fn threshold_degeneration(distances: &[f64], b: f64, m: usize) -> Result<Vec<f64>> {
    distances
        .iter()
        .map(|&d| mourre_constant(&EnergyInterval::new(1.0 / 3.0 + d, b, d)?, m))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::plane_wave;
    use crate::operators::{free_hamiltonian, laplacian_hex};

    fn iv(a: f64, b: f64) -> EnergyInterval {
        EnergyInterval::new(a, b, 0.05).unwrap()
    }

    #[test]
    fn interval_validation_and_margin() {
        assert!(EnergyInterval::new(0.5, 0.4, 0.1).is_err());
        assert!(EnergyInterval::new(0.5, 1.2, 0.1).is_err());
        assert!(iv(0.5, 0.9).respects_margin());
        assert!(!iv(0.3, 0.9).respects_margin());
        assert_eq!(iv(0.5, 0.9).mirror(), iv(-0.9, -0.5));
    }

    #[test]
    fn self_commutator_and_identity_vanish() {
        let outer = TruncationBox::centered(12, Boundary::Dirichlet);
        let h = free_hamiltonian(&outer).matrix;
        let c = commutator_matrix(&h, &h, &outer, COMMUTATOR_MARGIN).unwrap();
        assert!(c.matrix.norm_max() < 1e-14 && c.max_imag < 1e-14);
        let id = SparseMatrix::from_triplets(
            outer.dim(),
            outer.dim(),
            (0..outer.dim()).map(|k| (k, k, Complex64::new(1.0, 0.0))).collect(),
        );
        let c = commutator_matrix(&h, &id, &outer, COMMUTATOR_MARGIN).unwrap();
        assert!(c.matrix.norm_max() < 1e-14);
    }

    #[test]
    fn free_commutator_is_real_symmetric() {
        let outer = TruncationBox::centered(16, Boundary::Dirichlet);
        let h = free_hamiltonian(&outer).matrix;
        let a = assemble(&ConjugateOperator::canonical().stencil(), &outer, true).matrix;
        let c = commutator_matrix(&h, &a, &outer, COMMUTATOR_MARGIN).unwrap();
        assert!(c.hermitian_defect() < 1e-10);
        assert!(c.max_imag < 1e-10);
    }

    #[test]
    fn free_commutator_is_a_multiplier_with_the_expected_symbol() {
        // Column of C at an interior site, Fourier transformed, equals the symbol times the delta's transform.
        let outer = TruncationBox::centered(20, Boundary::Dirichlet);
        let h = free_hamiltonian(&outer).matrix;
        let a = assemble(&ConjugateOperator::canonical().stencil(), &outer, true).matrix;
        let c = commutator_matrix(&h, &a, &outer, COMMUTATOR_MARGIN).unwrap();
        let j = c.inner.flat_index(crate::lattice::LatticeSite::new(0, 0, crate::lattice::SublatticeTag::P1)).unwrap();
        let col: Vec<Complex64> = (0..c.matrix.nrows()).map(|r| Complex64::new(c.matrix[(r, j)], 0.0)).collect();
        for x in [Momentum::raw(0.3, -1.2), Momentum::raw(2.0, 0.5)] {
            let (v, _) = crate::conjugate::fourier_at(&col, &c.inner, x);
            let expect = commutator_symbol(x) / (2.0 * std::f64::consts::PI);
            assert!((v[0] - expect).norm() < 1e-10, "{v:?} {expect}");
            assert!(v[1].norm() < 1e-10);
        }
    }

    #[test]
    fn symbol_check_on_test_functions() {
        assert!(commutator_symbol_check(64, &TorusGrid::sample(64, plane_wave(0, 0))).unwrap() < 1e-8);
        assert!(commutator_symbol_check(128, &TorusGrid::sample(128, plane_wave(1, 2))).unwrap() < 1e-8);
        assert!(commutator_symbol_check(32, &TorusGrid::sample(32, plane_wave(0, 0))).is_err());
    }

    #[test]
    fn mourre_constant_behaviour() {
        let c = mourre_constant(&iv(0.5, 0.9), 512).unwrap();
        assert!(c > 0.0);
        let near = mourre_constant(&iv(0.99, 0.999), 512).unwrap();
        assert!(near > 0.0 && near < c);
        let deg = threshold_degeneration(&[0.2, 0.1, 0.05, 0.025], 0.9, 512).unwrap();
        assert!(deg.windows(2).all(|w| w[1] < w[0]));
        assert!(matches!(
            mourre_constant(&EnergyInterval::new(0.999_999, 0.999_9999, 1e-9).unwrap(), 8),
            Err(HexError::EmptyPreimage { .. })
        ));
    }

    #[test]
    fn projection_identities() {
        let b = TruncationBox::new(8, Boundary::Periodic);
        let h = free_hamiltonian(&b);
        let all = spectral_projection(&h, &EnergyInterval::new(-1.0, 1.0, 0.01).unwrap()).unwrap();
        let p = all.projector();
        for r in 0..b.dim() {
            for c in 0..b.dim() {
                let id = if r == c { 1.0 } else { 0.0 };
                assert!((p[(r, c)] - id).abs() < 1e-10);
            }
        }
        let none = spectral_projection(&h, &EnergyInterval::new(0.999_5, 0.999_9, 1e-4).unwrap()).unwrap();
        assert_eq!(none.rank(), 0);
        let b16 = TruncationBox::new(16, Boundary::Periodic);
        let i = iv(0.5, 0.9);
        let e = spectral_projection(&free_hamiltonian(&b16), &i).unwrap();
        let count = crate::symbol::periodic_spectrum(16).into_iter().filter(|&v| i.contains(v)).count();
        assert_eq!(e.rank(), count);
        let pe = e.projector();
        let pp = &pe * &pe;
        assert!((&pp - &pe).norm_max() < 1e-10);
    }

    #[test]
    fn degenerate_projection_is_reported() {
        let st = laplacian_hex();
        let r = mourre_check(&st, &ConjugateOperator::canonical(), 4, &EnergyInterval::new(0.999, 0.9999, 1e-4).unwrap(), 256);
        assert!(matches!(r, Err(HexError::DegenerateProjection { .. }) | Err(HexError::EmptyPreimage { .. })));
    }

    #[test]
    fn free_mourre_estimate_and_mirror_symmetry() {
        let st = laplacian_hex();
        let a = ConjugateOperator::canonical();
        let r = mourre_check(&st, &a, 16, &iv(0.5, 0.9), 256).unwrap();
        assert!(r.c_matrix > 0.0 && r.rank > 0);
        let m = mourre_check(&st, &a, 16, &iv(-0.9, -0.5), 256).unwrap();
        assert!((r.c_matrix - m.c_matrix).abs() < 1e-8);
        assert_eq!(r.rank, m.rank);
    }
}
