//! Position-side operators: the free Laplacian, its metric-weighted version,
//! the gauge transform to the unweighted space, the compact remainder pieces
//! and the full Hamiltonian.
//!
//! A [`StencilOperator`] is a finite list of terms. A term with offset `o`,
//! source tag `from`, target tag `to` and coefficient `c` contributes
//! `c(n) f(n + o, from)` to the output at `(n, to)`. In this convention the
//! shift `U1` (which reads `f(n1 - 1, n2)`) has offset `(-1, 0)`.

use crate::error::Result;
use crate::lattice::{Boundary, LatticeSite, SublatticeTag, TruncationBox, P1_NEIGHBOR_OFFSETS};
use crate::linalg::{power_norm, CVec, SparseMatrix};
use num_complex::Complex64;
use std::fmt;
use std::sync::Arc;

/// Position-dependent coefficient `c(n1, n2)`.
pub type CoeffFn = Arc<dyn Fn(i64, i64) -> Complex64 + Send + Sync>;

/// Coefficient of a stencil term.
#[derive(Clone)]
pub enum Coeff {
    Const(Complex64),
    Field(CoeffFn),
}

impl Coeff {
    /// Value at cell `(n1, n2)` of the output site.
    pub fn at(&self, n1: i64, n2: i64) -> Complex64 {
        match self {
            Coeff::Const(c) => *c,
            Coeff::Field(f) => f(n1, n2),
        }
    }
}

impl fmt::Debug for Coeff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Coeff::Const(c) => write!(f, "Const({c})"),
            Coeff::Field(_) => write!(f, "Field(..)"),
        }
    }
}

/// One entry of a stencil.
#[derive(Debug, Clone)]
pub struct StencilTerm {
    pub offset: (i64, i64),
    pub from: SublatticeTag,
    pub to: SublatticeTag,
    pub coeff: Coeff,
}

/// Matrix-free operator on fields over the lattice.
#[derive(Debug, Clone, Default)]
pub struct StencilOperator {
    pub terms: Vec<StencilTerm>,
}

impl StencilOperator {
    /// Empty (zero) stencil.
    pub fn zero() -> Self {
        Self { terms: Vec::new() }
    }

    /// Appends a term.
    pub fn push(&mut self, offset: (i64, i64), from: SublatticeTag, to: SublatticeTag, coeff: Coeff) {
        self.terms.push(StencilTerm {
            offset,
            from,
            to,
            coeff,
        });
    }

    /// Sum of two stencils.
    pub fn plus(&self, other: &StencilOperator) -> StencilOperator {
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().cloned());
        StencilOperator { terms }
    }

    /// Stencil multiplied by a scalar.
    pub fn scaled(&self, s: Complex64) -> StencilOperator {
        let terms = self
            .terms
            .iter()
            .map(|t| StencilTerm {
                coeff: match &t.coeff {
                    Coeff::Const(c) => Coeff::Const(c * s),
                    Coeff::Field(f) => {
                        let f = f.clone();
                        Coeff::Field(Arc::new(move |a, b| f(a, b) * s))
                    }
                },
                ..t.clone()
            })
            .collect();
        StencilOperator { terms }
    }

    /// `self - other`.
    pub fn minus(&self, other: &StencilOperator) -> StencilOperator {
        self.plus(&other.scaled(Complex64::new(-1.0, 0.0)))
    }

    /// Terms writing into sublattice `to`.
    pub fn block(&self, to: SublatticeTag) -> StencilOperator {
        StencilOperator {
            terms: self.terms.iter().filter(|t| t.to == to).cloned().collect(),
        }
    }

    /// Largest offset component in absolute value.
    pub fn reach(&self) -> i64 {
        self.terms
            .iter()
            .map(|t| t.offset.0.abs().max(t.offset.1.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Euclidean norm of the row of the (infinite) matrix at `site`, with
    /// terms hitting the same source site merged first.
    pub fn row_norm(&self, site: LatticeSite) -> f64 {
        let mut acc: Vec<((i64, i64, SublatticeTag), Complex64)> = Vec::new();
        for t in self.terms.iter().filter(|t| t.to == site.tag) {
            let key = (t.offset.0, t.offset.1, t.from);
            let c = t.coeff.at(site.n1, site.n2);
            match acc.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => *v += c,
                None => acc.push((key, c)),
            }
        }
        acc.iter().map(|(_, v)| v.norm_sqr()).sum::<f64>().sqrt()
    }
}

/// A stencil assembled on a truncation box.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    pub bbox: TruncationBox,
    pub matrix: SparseMatrix,
    pub hermitian_hint: bool,
}

impl AssembledOperator {
    /// Matrix-vector product.
    pub fn apply(&self, f: &[Complex64]) -> CVec {
        self.matrix.matvec(f)
    }

    /// Dimension `2 N^2`.
    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }
}

/// Assembles a stencil on a box. Dirichlet boxes drop couplings leaving the
/// box; periodic boxes wrap them. Traversal order is fixed, so the sparse
/// structure is reproducible.
pub fn assemble(st: &StencilOperator, bbox: &TruncationBox, hermitian_hint: bool) -> AssembledOperator {
    let mut trip = Vec::with_capacity(bbox.dim() * st.terms.len() / 2);
    for row in 0..bbox.dim() {
        let s = bbox.site(row);
        for t in st.terms.iter().filter(|t| t.to == s.tag) {
            let src = LatticeSite::new(s.n1 + t.offset.0, s.n2 + t.offset.1, t.from);
            if let Some(col) = bbox.try_index(src) {
                trip.push((row, col, t.coeff.at(s.n1, s.n2)));
            }
        }
    }
    AssembledOperator {
        bbox: *bbox,
        matrix: SparseMatrix::from_triplets(bbox.dim(), bbox.dim(), trip),
        hermitian_hint,
    }
}

/// Matrix-free application of a stencil to a field stored in the flat layout of `bbox`.
pub fn apply(st: &StencilOperator, f: &[Complex64], bbox: &TruncationBox) -> CVec {
    assert_eq!(f.len(), bbox.dim());
    let mut out = vec![Complex64::new(0.0, 0.0); bbox.dim()];
    for (row, o) in out.iter_mut().enumerate() {
        let s = bbox.site(row);
        for t in st.terms.iter().filter(|t| t.to == s.tag) {
            let src = LatticeSite::new(s.n1 + t.offset.0, s.n2 + t.offset.1, t.from);
            if let Some(col) = bbox.try_index(src) {
                *o += t.coeff.at(s.n1, s.n2) * f[col];
            }
        }
    }
    out
}

fn neighbor_offsets(to: SublatticeTag) -> [(i64, i64); 3] {
    match to {
        SublatticeTag::P1 => P1_NEIGHBOR_OFFSETS,
        SublatticeTag::P2 => P1_NEIGHBOR_OFFSETS.map(|(a, b)| (-a, -b)),
    }
}

/// The free Laplacian: the `P2 -> P1` block is `(1/3)(1 + U1 + U2)` and the
/// `P1 -> P2` block is `(1/3)(1 + U1^* + U2^*)`.
pub fn laplacian_hex() -> StencilOperator {
    let mut st = StencilOperator::zero();
    for to in [SublatticeTag::P1, SublatticeTag::P2] {
        for o in neighbor_offsets(to) {
            st.push(o, to.other(), to, Coeff::Const(Complex64::new(1.0 / 3.0, 0.0)));
        }
    }
    st
}

/// Site function, e.g. a metric perturbation or a potential.
pub type SiteFn = Arc<dyn Fn(LatticeSite) -> f64 + Send + Sync>;
/// Edge function, evaluated on ordered pairs of neighbouring sites.
pub type EdgeFn = Arc<dyn Fn(LatticeSite, LatticeSite) -> f64 + Send + Sync>;

/// Vertex weights `m = 1 + eta` and edge weights `E = 1 + eps`.
/// The edge function must be symmetric in its two arguments.
#[derive(Clone)]
pub struct MetricField {
    pub eta: SiteFn,
    pub eps: EdgeFn,
}

impl fmt::Debug for MetricField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MetricField(..)")
    }
}

impl MetricField {
    /// `eta = 0`, `eps = 0`.
    pub fn trivial() -> Self {
        Self {
            eta: Arc::new(|_| 0.0),
            eps: Arc::new(|_, _| 0.0),
        }
    }

    /// Builds a metric from closures.
    pub fn new(eta: SiteFn, eps: EdgeFn) -> Self {
        Self { eta, eps }
    }

    /// Vertex weight `m(s)`.
    pub fn m(&self, s: LatticeSite) -> f64 {
        1.0 + (self.eta)(s)
    }

    /// Edge weight `E(s, t)`.
    pub fn edge(&self, s: LatticeSite, t: LatticeSite) -> f64 {
        1.0 + (self.eps)(s, t)
    }

    /// The same metric with `eta` and `eps` multiplied by `theta`.
    pub fn scaled(&self, theta: f64) -> Self {
        let eta = self.eta.clone();
        let eps = self.eps.clone();
        Self {
            eta: Arc::new(move |s| theta * eta(s)),
            eps: Arc::new(move |s, t| theta * eps(s, t)),
        }
    }
}

/// Real potential on sites.
#[derive(Clone)]
pub struct PotentialField {
    pub v: SiteFn,
}

impl fmt::Debug for PotentialField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PotentialField(..)")
    }
}

impl PotentialField {
    /// `V = 0`.
    pub fn zero() -> Self {
        Self {
            v: Arc::new(|_| 0.0),
        }
    }

    /// Constant potential.
    pub fn constant(c: f64) -> Self {
        Self {
            v: Arc::new(move |_| c),
        }
    }

    /// Potential from a closure.
    pub fn new(v: SiteFn) -> Self {
        Self { v }
    }

    /// The potential multiplied by `theta`.
    pub fn scaled(&self, theta: f64) -> Self {
        let v = self.v.clone();
        Self {
            v: Arc::new(move |s| theta * v(s)),
        }
    }

    /// Diagonal stencil of the multiplication operator.
    pub fn stencil(&self) -> StencilOperator {
        let mut st = StencilOperator::zero();
        for tag in [SublatticeTag::P1, SublatticeTag::P2] {
            let v = self.v.clone();
            st.push(
                (0, 0),
                tag,
                tag,
                Coeff::Field(Arc::new(move |a, b| Complex64::new(v(LatticeSite::new(a, b, tag)), 0.0))),
            );
        }
        st
    }
}

/// Builds a nearest-neighbour stencil with coefficient `weight(target, source)`.
fn hopping_stencil<F>(weight: F) -> StencilOperator
where
    F: Fn(LatticeSite, LatticeSite) -> f64 + Send + Sync + Clone + 'static,
{
    let mut st = StencilOperator::zero();
    for to in [SublatticeTag::P1, SublatticeTag::P2] {
        for o in neighbor_offsets(to) {
            let w = weight.clone();
            st.push(
                o,
                to.other(),
                to,
                Coeff::Field(Arc::new(move |a, b| {
                    let x = LatticeSite::new(a, b, to);
                    let y = LatticeSite::new(a + o.0, b + o.1, to.other());
                    Complex64::new(w(x, y), 0.0)
                })),
            );
        }
    }
    st
}

/// The metric Laplacian `(Delta_{m,E} f)(x) = (1/(3 m(x))) sum_{y ~ x} E(x, y) f(y)`.
pub fn weighted_laplacian(mf: &MetricField) -> StencilOperator {
    let mf = mf.clone();
    hopping_stencil(move |x, y| mf.edge(x, y) / (3.0 * mf.m(x)))
}

/// Diagonal unitary `T f = f / sqrt(m)` from the unweighted space to the
/// `m`-weighted space, sampled on a box.
#[derive(Debug, Clone, PartialEq)]
pub struct GaugeTransform {
    /// `1 / sqrt(m)` per flat index.
    pub diag: Vec<f64>,
    /// `m` per flat index.
    pub weight: Vec<f64>,
}

impl GaugeTransform {
    /// `T f`.
    pub fn apply(&self, f: &[Complex64]) -> CVec {
        f.iter().zip(&self.diag).map(|(v, d)| v * d).collect()
    }

    /// `T^{-1} g`.
    pub fn apply_inverse(&self, g: &[Complex64]) -> CVec {
        g.iter().zip(&self.diag).map(|(v, d)| v / d).collect()
    }

    /// Inner product of the `m`-weighted space.
    pub fn weighted_dot(&self, f: &[Complex64], g: &[Complex64]) -> Complex64 {
        f.iter()
            .zip(g)
            .zip(&self.weight)
            .map(|((a, b), m)| a.conj() * b * m)
            .sum()
    }
}

/// Samples `T_{1 -> m}` on a box.
pub fn gauge_transform(mf: &MetricField, bbox: &TruncationBox) -> GaugeTransform {
    let weight: Vec<f64> = bbox.sites().map(|s| mf.m(s)).collect();
    GaugeTransform {
        diag: weight.iter().map(|m| 1.0 / m.sqrt()).collect(),
        weight,
    }
}

/// `T^{-1} Delta_{m,E} T` written as a stencil: coefficient `E(x,y) / (3 sqrt(m(x) m(y)))`.
pub fn tilde_delta(mf: &MetricField) -> StencilOperator {
    let mf = mf.clone();
    hopping_stencil(move |x, y| mf.edge(x, y) / (3.0 * (mf.m(x) * mf.m(y)).sqrt()))
}

/// The difference between the free and the gauge-fixed Laplacian, per output
/// sublattice, with its split by neighbour direction.
#[derive(Debug, Clone)]
pub struct PerturbationPieces {
    /// `D_1` (output on `P1`) and `D_2` (output on `P2`).
    pub d: [StencilOperator; 2],
    /// For each block, the pieces along the on-cell, first-axis and second-axis bonds.
    pub split: [[StencilOperator; 3]; 2],
}

/// `D_i = Delta_{i,H} - tilde Delta_i`.
pub fn perturbation_di(mf: &MetricField) -> PerturbationPieces {
    let diff = laplacian_hex().minus(&tilde_delta(mf));
    let block = |to: SublatticeTag| diff.block(to);
    let split = |to: SublatticeTag| {
        let offs = neighbor_offsets(to);
        offs.map(|o| StencilOperator {
            terms: diff
                .terms
                .iter()
                .filter(|t| t.to == to && t.offset == o)
                .cloned()
                .collect(),
        })
    };
    PerturbationPieces {
        d: [block(SublatticeTag::P1), block(SublatticeTag::P2)],
        split: [split(SublatticeTag::P1), split(SublatticeTag::P2)],
    }
}

/// Gauge-fixed Hamiltonian `tilde Delta + V` assembled on a box.
pub fn hamiltonian(mf: &MetricField, v: &PotentialField, bbox: &TruncationBox) -> AssembledOperator {
    let st = tilde_delta(mf).plus(&v.stencil());
    assemble(&st, bbox, true)
}

/// Free Laplacian assembled on a box.
pub fn free_hamiltonian(bbox: &TruncationBox) -> AssembledOperator {
    assemble(&laplacian_hex(), bbox, true)
}

/// Sublattice sign flip `(f1, f2) -> (f1, -f2)` as a diagonal of signs.
pub fn sublattice_flip(bbox: &TruncationBox) -> Vec<f64> {
    bbox.sites()
        .map(|s| if s.tag == SublatticeTag::P1 { 1.0 } else { -1.0 })
        .collect()
}

/// Power-iteration estimate of the operator norm.
pub fn norm_estimate(h: &AssembledOperator) -> f64 {
    power_norm(&h.matrix, 200, 7)
}

/// Number of eigenvalues outside `[-1 - delta, 1 + delta]`.
pub fn outlier_count(eigenvalues: &[f64], delta: f64) -> usize {
    eigenvalues.iter().filter(|&&e| e.abs() > 1.0 + delta).count()
}

/// Eigenvalues of a real symmetric assembled operator, ascending.
pub fn dense_spectrum(h: &AssembledOperator) -> Result<Vec<f64>> {
    if h.matrix.max_imag() > 1e-14 {
        return Err(crate::HexError::InvalidArgument(
            "dense spectrum requires a real symmetric matrix".into(),
        ));
    }
    Ok(crate::linalg::sym_eigenvalues(&h.matrix.to_dense_real()))
}

/// True when the box uses periodic wrapping.
pub fn is_periodic(bbox: &TruncationBox) -> bool {
    bbox.bc == Boundary::Periodic
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{max_abs_diff, random_cvec};
    use SublatticeTag::*;

    fn delta(bbox: &TruncationBox, s: LatticeSite) -> CVec {
        let mut f = vec![Complex64::new(0.0, 0.0); bbox.dim()];
        f[bbox.flat_index(s).unwrap()] = Complex64::new(1.0, 0.0);
        f
    }

    #[test]
    fn laplacian_delta_examples() {
        let b = TruncationBox::centered(8, Boundary::Dirichlet);
        let d = laplacian_hex();
        let out = apply(&d, &delta(&b, LatticeSite::new(0, 0, P2)), &b);
        let at = |s| out[b.flat_index(s).unwrap()];
        assert!((at(LatticeSite::new(0, 0, P1)).re - 1.0 / 3.0).abs() < 1e-15);
        let out = apply(&d, &delta(&b, LatticeSite::new(0, 0, P1)), &b);
        assert_eq!(out[b.flat_index(LatticeSite::new(1, 0, P2)).unwrap()].re, 0.0);
        assert!((out[b.flat_index(LatticeSite::new(-1, 0, P2)).unwrap()].re - 1.0 / 3.0).abs() < 1e-15);
        let out = apply(&d, &delta(&b, LatticeSite::new(1, 0, P2)), &b);
        assert_eq!(out[b.flat_index(LatticeSite::new(0, 0, P1)).unwrap()].re, 0.0);
        let out = apply(&d, &delta(&b, LatticeSite::new(-1, 0, P2)), &b);
        assert!((out[b.flat_index(LatticeSite::new(0, 0, P1)).unwrap()].re - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn constant_vector_is_fixed_on_periodic_box() {
        let b = TruncationBox::new(6, Boundary::Periodic);
        let f = vec![Complex64::new(1.0, 0.0); b.dim()];
        let out = apply(&laplacian_hex(), &f, &b);
        assert!(max_abs_diff(&out, &f) < 1e-15);
    }

    #[test]
    fn n2_periodic_spectrum() {
        let h = free_hamiltonian(&TruncationBox::new(2, Boundary::Periodic));
        let ev = dense_spectrum(&h).unwrap();
        let expect = [-1.0, -1.0 / 3.0, -1.0 / 3.0, -1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0, 1.0];
        for (a, b) in ev.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn constant_potential_shifts_spectrum() {
        let b = TruncationBox::new(4, Boundary::Periodic);
        let e0 = dense_spectrum(&free_hamiltonian(&b)).unwrap();
        let e1 = dense_spectrum(&hamiltonian(&MetricField::trivial(), &PotentialField::constant(0.25), &b)).unwrap();
        for (a, c) in e0.iter().zip(&e1) {
            assert!((a + 0.25 - c).abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_laplacian_special_cases() {
        let b = TruncationBox::new(6, Boundary::Periodic);
        let free = assemble(&laplacian_hex(), &b, true).matrix;
        let triv = assemble(&weighted_laplacian(&MetricField::trivial()), &b, true).matrix;
        assert!(free.max_abs_diff(&triv) < 1e-15);
        let m2 = MetricField::new(Arc::new(|_| 1.0), Arc::new(|_, _| 0.0));
        let half = assemble(&weighted_laplacian(&m2), &b, false).matrix;
        for r in 0..b.dim() {
            for (c, v) in free.row(r) {
                assert!((half.get(r, c) - v * 0.5).norm() < 1e-15);
            }
        }
        let x = LatticeSite::new(2, 2, P1);
        let y = LatticeSite::new(1, 2, P2);
        let one_edge = MetricField::new(
            Arc::new(|_| 0.0),
            Arc::new(move |s, t| if (s == x && t == y) || (s == y && t == x) { 1.0 } else { 0.0 }),
        );
        let w = assemble(&weighted_laplacian(&one_edge), &b, false).matrix;
        let (ix, iy) = (b.flat_index(x).unwrap(), b.flat_index(y).unwrap());
        let mut changed = 0;
        for r in 0..b.dim() {
            for (c, v) in free.row(r) {
                if (w.get(r, c) - v).norm() > 1e-15 {
                    changed += 1;
                    assert!((r, c) == (ix, iy) || (r, c) == (iy, ix));
                    assert!((w.get(r, c) - v * 2.0).norm() < 1e-15);
                }
            }
        }
        assert_eq!(changed, 2);
    }

    fn smooth_metric() -> MetricField {
        let eta: SiteFn = Arc::new(|s| 0.3 * (std::f64::consts::FRAC_PI_4 * (s.n1 + 2 * s.n2) as f64 + s.tag.component() as f64).sin());
        let e2 = eta.clone();
        MetricField::new(eta, Arc::new(move |s, t| 0.25 * (e2(s) + e2(t))))
    }

    #[test]
    fn gauge_transform_is_unitary() {
        let b = TruncationBox::new(4, Boundary::Periodic);
        let g = gauge_transform(&MetricField::new(Arc::new(|_| 3.0), Arc::new(|_, _| 0.0)), &b);
        assert!(g.diag.iter().all(|d| (d - 0.5).abs() < 1e-15));
        let g = gauge_transform(&smooth_metric(), &b);
        for k in 0..100 {
            let f = random_cvec(b.dim(), k);
            let h = random_cvec(b.dim(), 1000 + k);
            let lhs = g.weighted_dot(&g.apply(&f), &g.apply(&h));
            let rhs = crate::linalg::dot(&f, &h);
            assert!((lhs - rhs).norm() < 1e-12 * (1.0 + rhs.norm()));
        }
    }

    #[test]
    fn tilde_delta_is_the_conjugated_weighted_laplacian() {
        let b = TruncationBox::new(8, Boundary::Periodic);
        let mf = smooth_metric();
        let g = gauge_transform(&mf, &b);
        let wl = assemble(&weighted_laplacian(&mf), &b, false);
        let td = assemble(&tilde_delta(&mf), &b, true);
        assert!(td.matrix.hermitian_defect() < 1e-12);
        for k in 0..b.dim() {
            let mut e = vec![Complex64::new(0.0, 0.0); b.dim()];
            e[k] = Complex64::new(1.0, 0.0);
            let lhs = g.apply_inverse(&wl.apply(&g.apply(&e)));
            let rhs = td.apply(&e);
            assert!(max_abs_diff(&lhs, &rhs) < 1e-12);
        }
        let triv = assemble(&tilde_delta(&MetricField::trivial()), &b, true);
        assert!(triv.matrix.max_abs_diff(&free_hamiltonian(&b).matrix) < 1e-15);
    }

    #[test]
    fn di_identity_and_decay() {
        let b = TruncationBox::new(8, Boundary::Periodic);
        let mf = smooth_metric();
        let p = perturbation_di(&mf);
        for (k, tag) in [P1, P2].into_iter().enumerate() {
            let lhs = assemble(&p.d[k].plus(&tilde_delta(&mf).block(tag)), &b, false).matrix;
            let rhs = assemble(&laplacian_hex().block(tag), &b, false).matrix;
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
            let split_sum = p.split[k][0].plus(&p.split[k][1]).plus(&p.split[k][2]);
            let a = assemble(&split_sum, &b, false).matrix;
            let c = assemble(&p.d[k], &b, false).matrix;
            assert!(a.max_abs_diff(&c) < 1e-15);
        }
        let zero = perturbation_di(&MetricField::trivial());
        assert!(zero.d[0].row_norm(LatticeSite::new(3, 1, P1)) < 1e-15);
        let eta: SiteFn = Arc::new(|s| 1.0 / (1.0 + (s.n1 * s.n1 + s.n2 * s.n2) as f64));
        let e2 = eta.clone();
        let decaying = MetricField::new(eta, Arc::new(move |s, t| 0.25 * (e2(s) + e2(t))));
        let pd = perturbation_di(&decaying);
        let near = pd.d[0].row_norm(LatticeSite::new(5, 0, P1));
        let far = pd.d[0].row_norm(LatticeSite::new(20, 0, P1));
        assert!(far < near);
    }

    #[test]
    fn matrix_free_matches_assembled() {
        let b = TruncationBox::new(16, Boundary::Periodic);
        let st = tilde_delta(&smooth_metric());
        let a = assemble(&st, &b, true);
        for k in 0..50 {
            let f = random_cvec(b.dim(), k);
            assert!(max_abs_diff(&apply(&st, &f, &b), &a.apply(&f)) < 1e-12);
        }
    }

    #[test]
    fn dirichlet_boundary_rows_are_shorter() {
        let b = TruncationBox::new(4, Boundary::Dirichlet);
        let h = free_hamiltonian(&b);
        let corner = b.flat_index(LatticeSite::new(0, 0, P1)).unwrap();
        let inner = b.flat_index(LatticeSite::new(2, 2, P1)).unwrap();
        assert!(h.matrix.row(corner).count() < h.matrix.row(inner).count());
    }

    #[test]
    fn sublattice_flip_anticommutes() {
        let b = TruncationBox::new(6, Boundary::Periodic);
        let h = free_hamiltonian(&b);
        let s = sublattice_flip(&b);
        let f = random_cvec(b.dim(), 3);
        let sf: CVec = f.iter().zip(&s).map(|(a, c)| a * c).collect();
        let lhs: CVec = h.apply(&sf).iter().zip(&s).map(|(a, c)| a * c).collect();
        let rhs: CVec = h.apply(&f).iter().map(|a| -a).collect();
        assert!(max_abs_diff(&lhs, &rhs) < 1e-15);
    }

    #[test]
    fn norm_bound() {
        let b = TruncationBox::new(8, Boundary::Periodic);
        let h = hamiltonian(&MetricField::trivial(), &PotentialField::constant(0.1), &b);
        assert!(norm_estimate(&h) <= 1.1 + 1e-9);
        assert!(h.matrix.gershgorin_bound() <= 1.1 + 1e-12);
    }
}
