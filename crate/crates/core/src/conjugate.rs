//! The conjugate operator in momentum and position representation.
//!
//! On the torus the scalar operator is
//! `hat A = (i/2)(grad beta^{5/2} . grad + div grad beta^{5/2})`, which acts as
//! `hat A g = (i/2)(2 a . grad g + (div a) g)` with `a = (5/2) beta^{3/2} grad beta`.
//! The matrix-valued version is `A_F = P diag(hat A, -hat A) P^{-1}`, whose
//! off-diagonal blocks are `hat A(u .)` and `conj(u) hat A` with
//! `u = conj(w) / sqrt(beta)`. Both blocks have trigonometric-polynomial
//! coefficients and vanish at the Dirac points.
//!
//! On the lattice the block `A_1` (from `P1` to `P2`) is a shift polynomial
//! with coefficients linear in the position operators:
//! `A_1 = c_00 R_00(U) + sum_l c_l (Q1 l1 - Q2 l2) R_l(U)` in operator notation,
//! where the ordering of `Q` against the shifts is a parameter ([`QOrder`]).
//! `A_2` is the adjoint of `A_1`.

use crate::error::{HexError, Result};
use crate::lattice::{LatticeSite, SublatticeTag, TruncationBox};
use crate::linalg::CVec;
use crate::operators::{apply, Coeff, StencilOperator};
use crate::symbol::{beta, grad_beta, grad_beta_sq, grad_sqrt_beta, grad_w, laplacian_beta, w, Momentum};
use num_complex::Complex64;
use rustfft::FftPlanner;
use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

/// Laurent polynomial in two commuting shifts: `(i, j) -> coefficient of U1^i U2^j`,
/// where a negative power stands for the adjoint shift.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Laurent(pub BTreeMap<(i32, i32), i64>);

impl Laurent {
    /// Monomial `c U1^i U2^j`.
    pub fn monomial(i: i32, j: i32, c: i64) -> Self {
        let mut m = BTreeMap::new();
        if c != 0 {
            m.insert((i, j), c);
        }
        Laurent(m)
    }

    /// Polynomial from a coefficient list.
    pub fn from_terms(terms: &[((i32, i32), i64)]) -> Self {
        let mut p = Laurent::default();
        for &((i, j), c) in terms {
            p = p.add(&Laurent::monomial(i, j, c));
        }
        p
    }

    /// Coefficient of `U1^i U2^j`.
    pub fn get(&self, i: i32, j: i32) -> i64 {
        self.0.get(&(i, j)).copied().unwrap_or(0)
    }

    /// Sum.
    pub fn add(&self, other: &Laurent) -> Laurent {
        let mut m = self.0.clone();
        for (k, v) in &other.0 {
            *m.entry(*k).or_insert(0) += v;
        }
        m.retain(|_, v| *v != 0);
        Laurent(m)
    }

    /// Scalar multiple.
    pub fn scale(&self, c: i64) -> Laurent {
        let mut m: BTreeMap<_, _> = self.0.iter().map(|(k, v)| (*k, v * c)).collect();
        m.retain(|_, v| *v != 0);
        Laurent(m)
    }

    /// Product.
    pub fn mul(&self, other: &Laurent) -> Laurent {
        let mut m: BTreeMap<(i32, i32), i64> = BTreeMap::new();
        for ((i, j), a) in &self.0 {
            for ((k, l), b) in &other.0 {
                *m.entry((i + k, j + l)).or_insert(0) += a * b;
            }
        }
        m.retain(|_, v| *v != 0);
        Laurent(m)
    }

    /// Multiplies each coefficient by the corresponding power of `U1` (axis 0) or `U2` (axis 1).
    pub fn weighted_by_power(&self, axis: usize) -> Laurent {
        let mut m: BTreeMap<_, _> = self
            .0
            .iter()
            .map(|(k, v)| (*k, v * if axis == 0 { k.0 as i64 } else { k.1 as i64 }))
            .collect();
        m.retain(|_, v| *v != 0);
        Laurent(m)
    }

    /// Support as a sorted list of exponent pairs.
    pub fn support(&self) -> Vec<(i32, i32)> {
        self.0.keys().copied().collect()
    }
}

/// The four `(l1, l2)` labels in storage order.
pub const LABELS: [(u8, u8); 4] = [(0, 0), (1, 0), (0, 1), (1, 1)];

/// Position of a label in [`LABELS`].
pub fn label_index(l: (u8, u8)) -> usize {
    LABELS.iter().position(|&x| x == l).expect("label must be one of the four tables")
}

/// Scalar prefactor of a table: `-5i/8` for `(0,0)`, `5i/2` otherwise.
pub fn prefactor(l: (u8, u8)) -> Complex64 {
    if l == (0, 0) {
        Complex64::new(0.0, -5.0 / 8.0)
    } else {
        Complex64::new(0.0, 2.5)
    }
}

/// Four integer coefficient tables indexed by `(l1, l2)`; prefactors are kept separately.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoeffTable {
    pub tables: [Laurent; 4],
}

impl CoeffTable {
    /// Table for a label.
    pub fn get(&self, l: (u8, u8)) -> &Laurent {
        &self.tables[label_index(l)]
    }

    /// Mutable table for a label.
    pub fn get_mut(&mut self, l: (u8, u8)) -> &mut Laurent {
        &mut self.tables[label_index(l)]
    }

    /// Writes all four tables as CSV with columns `l1,l2,i,j,alpha`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["l1", "l2", "i", "j", "alpha"])?;
        for l in LABELS {
            for ((i, j), v) in &self.get(l).0 {
                wtr.write_record([
                    l.0.to_string(),
                    l.1.to_string(),
                    i.to_string(),
                    j.to_string(),
                    v.to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }

    /// Parses the CSV layout written by [`CoeffTable::write_csv`].
    pub fn read_csv(text: &str) -> Result<Self> {
        let mut t = CoeffTable {
            tables: Default::default(),
        };
        let mut rdr = csv::Reader::from_reader(text.as_bytes());
        for rec in rdr.records() {
            let rec = rec?;
            let p = |k: usize| -> Result<i64> {
                rec.get(k)
                    .and_then(|s| s.trim().parse().ok())
                    .ok_or_else(|| HexError::Io(format!("bad alpha csv record {rec:?}")))
            };
            let l = (p(0)? as u8, p(1)? as u8);
            let m = Laurent::monomial(p(2)? as i32, p(3)? as i32, p(4)?);
            let slot = t.get_mut(l);
            *slot = slot.add(&m);
        }
        Ok(t)
    }
}

/// Golden copy of the reference coefficient tables.
pub const ALPHA_CSV: &str = include_str!("../data/alpha_tables.csv");

/// The reference coefficient tables, hard-coded.
pub fn alpha_tables() -> CoeffTable {
    let t00 = Laurent::from_terms(&[
        ((0, 0), 2),
        ((-2, 0), 19),
        ((0, -2), 19),
        ((2, 0), 5),
        ((0, 2), 5),
        ((-3, 0), 5),
        ((0, -3), 5),
        ((0, 1), 16),
        ((1, 0), 16),
        ((-2, -1), 9),
        ((-1, -2), 9),
        ((1, -2), 25),
        ((-2, 1), 25),
        ((1, -1), 24),
        ((-1, 1), 24),
        ((-1, 2), 12),
        ((2, -1), 12),
        ((-3, 1), 7),
        ((1, -3), 7),
        ((-2, 2), 15),
        ((2, -2), 15),
        ((2, -3), 8),
        ((-3, 2), 8),
        ((-1, -1), 18),
        ((1, 1), 4),
        ((-1, 0), 5),
        ((0, -1), 5),
    ]);
    let t10 = Laurent::from_terms(&[
        ((0, 0), -4),
        ((-3, 0), 1),
        ((0, -2), 1),
        ((-3, 1), 1),
        ((-1, -2), 1),
        ((2, 0), -1),
        ((1, 1), -1),
        ((1, -2), -1),
        ((2, -2), -1),
        ((-2, -1), 2),
        ((-2, 1), 2),
        ((0, 1), -2),
        ((2, -1), -2),
        ((-2, 0), 5),
        ((-1, -1), 5),
        ((1, -1), -5),
        ((1, 0), -5),
        ((-1, 0), 4),
    ]);
    let t01 = Laurent::from_terms(&[
        ((0, 0), -4),
        ((0, -3), 1),
        ((-2, 0), 1),
        ((1, -3), 1),
        ((-2, -1), 1),
        ((0, 2), -1),
        ((1, 1), -1),
        ((-2, 1), -1),
        ((-2, 2), -1),
        ((-1, -2), 2),
        ((1, -2), 2),
        ((-1, 2), -2),
        ((1, 0), -2),
        ((0, -2), 5),
        ((-1, -1), 5),
        ((-1, 1), -5),
        ((0, 1), -5),
        ((0, -1), 4),
    ]);
    let t11 = Laurent::from_terms(&[
        ((-1, 0), 4),
        ((0, 1), 1),
        ((-1, 2), 1),
        ((-3, 1), 1),
        ((-3, 2), 1),
        ((2, -2), -2),
        ((0, -2), -2),
        ((1, 0), -1),
        ((2, -3), -1),
        ((1, -3), -1),
        ((2, -1), -1),
        ((-2, 0), 2),
        ((-2, 2), 2),
        ((-1, 1), 5),
        ((-2, 1), 5),
        ((1, -1), -5),
        ((1, -2), -5),
        ((0, -1), -4),
    ]);
    CoeffTable {
        tables: [t00, t10, t01, t11],
    }
}

/// Building blocks of the long-form operator as Laurent polynomials.
pub struct LongForm {
    /// `(1 + U1^* + U2^*)^2 (1 + U1 + U2)`.
    pub aab: Laurent,
    /// `U1^* - U1`.
    pub d1: Laurent,
    /// `U2^* - U2`.
    pub d2: Laurent,
    /// `U1^* U2 - U1 U2^*`.
    pub s12: Laurent,
    /// Coefficient polynomial of `Q1`: `aab (d1 + s12)`.
    pub p1: Laurent,
    /// Coefficient polynomial of `Q2`: `aab (d2 - s12)`.
    pub p2: Laurent,
    /// Bracket of the zeroth-order part (multiplied by `-5i/8`).
    pub b: Laurent,
}

/// Expands the long-form products.
pub fn long_form() -> LongForm {
    let one = Laurent::monomial(0, 0, 1);
    let u1 = Laurent::monomial(1, 0, 1);
    let u2 = Laurent::monomial(0, 1, 1);
    let u1s = Laurent::monomial(-1, 0, 1);
    let u2s = Laurent::monomial(0, -1, 1);
    let a = one.add(&u1s).add(&u2s);
    let bb = one.add(&u1).add(&u2);
    let aab = a.mul(&a).mul(&bb);
    let d1 = u1s.add(&u1.scale(-1));
    let d2 = u2s.add(&u2.scale(-1));
    let s12 = u1s.mul(&u2).add(&u1.mul(&u2s).scale(-1));
    let p1 = aab.mul(&d1.add(&s12));
    let p2 = aab.mul(&d2.add(&s12.scale(-1)));
    let inner = d1
        .mul(&d1)
        .add(&d2.mul(&d2))
        .add(&s12.mul(&s12).scale(2))
        .add(&s12.mul(&d1.add(&d2.scale(-1))).scale(2));
    let cross = u1s.mul(&u2).add(&u1.mul(&u2s));
    let sym = u1s.add(&u1).add(&u2s).add(&u2).add(&cross.scale(2));
    let b = a.mul(&inner).scale(3).add(&aab.mul(&sym).scale(2));
    LongForm {
        aab,
        d1,
        d2,
        s12,
        p1,
        p2,
        b,
    }
}

/// Tables obtained by expanding the long form and matching it to
/// `R_00 + sum_l (Q1 l1 - Q2 l2) R_l`, reading each `Q` as a formal symbol.
pub fn expand_long_form() -> CoeffTable {
    let lf = long_form();
    CoeffTable {
        tables: [
            lf.b.clone(),
            lf.aab.mul(&lf.d1),
            lf.aab.mul(&lf.d2).scale(-1),
            lf.aab.mul(&lf.s12),
        ],
    }
}

/// One coefficient where two tables disagree.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TableDiff {
    pub l: (u8, u8),
    pub i: i32,
    pub j: i32,
    pub table: i64,
    pub expansion: i64,
}

/// All coefficient differences between a table and the expansion, in label then `(i, j)` order.
pub fn table_diffs(table: &CoeffTable, expansion: &CoeffTable) -> Vec<TableDiff> {
    let mut out = Vec::new();
    for l in LABELS {
        let (t, e) = (table.get(l), expansion.get(l));
        let mut keys: Vec<_> = t.0.keys().chain(e.0.keys()).copied().collect();
        keys.sort();
        keys.dedup();
        for (i, j) in keys {
            if t.get(i, j) != e.get(i, j) {
                out.push(TableDiff {
                    l,
                    i,
                    j,
                    table: t.get(i, j),
                    expansion: e.get(i, j),
                });
            }
        }
    }
    out
}

/// Compares a table with the long-form expansion and reports the first disagreement.
pub fn self_check(table: &CoeffTable) -> Result<()> {
    match table_diffs(table, &expand_long_form()).first() {
        None => Ok(()),
        Some(d) => Err(HexError::Mismatch {
            l1: d.l.0,
            l2: d.l.1,
            i: d.i,
            j: d.j,
            table: d.table,
            expansion: d.expansion,
        }),
    }
}

/// Where the position operators sit relative to the shift polynomial.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QOrder {
    /// `(Q1 l1 - Q2 l2) R(U)`: the position factor is evaluated at the output site.
    Left,
    /// `R(U) (Q1 l1 - Q2 l2)`: the position factor is evaluated at the source site.
    Right,
}

/// Position-side conjugate operator built from coefficient tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ConjugateOperator {
    pub tables: CoeffTable,
    pub order: QOrder,
}

impl ConjugateOperator {
    /// The operator that intertwines with the torus-side `A_F`: expanded tables, `Q` on the right.
    pub fn canonical() -> Self {
        Self {
            tables: expand_long_form(),
            order: QOrder::Right,
        }
    }

    /// Operator with given tables and ordering.
    pub fn new(tables: CoeffTable, order: QOrder) -> Self {
        Self { tables, order }
    }

    /// Coefficient of `U1^i U2^j` with the position factor evaluated at `(p1, p2)`.
    pub fn kappa(&self, i: i32, j: i32, p1: i64, p2: i64) -> Complex64 {
        let mut c = prefactor((0, 0)) * self.tables.get((0, 0)).get(i, j) as f64;
        for l in &LABELS[1..] {
            let a = self.tables.get(*l).get(i, j);
            if a != 0 {
                let q = l.0 as i64 * p1 - l.1 as i64 * p2;
                c += prefactor(*l) * (a * q) as f64;
            }
        }
        c
    }

    /// All exponent pairs used by any table.
    pub fn support(&self) -> Vec<(i32, i32)> {
        let mut s: Vec<_> = self.tables.tables.iter().flat_map(|t| t.support()).collect();
        s.sort();
        s.dedup();
        s
    }

    /// Stencil of `A_H`: the `P1 -> P2` block is `A_1`, the `P2 -> P1` block is its adjoint.
    pub fn stencil(&self) -> StencilOperator {
        let mut st = StencilOperator::zero();
        let me = Arc::new(self.clone());
        for (i, j) in self.support() {
            let (di, dj) = (i as i64, j as i64);
            // A_1: (A_1 f)(n) = sum kappa_ij(.) f(n - (i, j)).
            let m = me.clone();
            let order = self.order;
            st.push(
                (-di, -dj),
                SublatticeTag::P1,
                SublatticeTag::P2,
                Coeff::Field(Arc::new(move |a, b| match order {
                    QOrder::Right => m.kappa(i, j, a - di, b - dj),
                    QOrder::Left => m.kappa(i, j, a, b),
                })),
            );
            // A_2 = A_1^*: (A_2 g)(p) = sum conj(kappa_ij(.)) g(p + (i, j)).
            let m = me.clone();
            st.push(
                (di, dj),
                SublatticeTag::P2,
                SublatticeTag::P1,
                Coeff::Field(Arc::new(move |a, b| {
                    match order {
                        QOrder::Right => m.kappa(i, j, a, b),
                        QOrder::Left => m.kappa(i, j, a + di, b + dj),
                    }
                    .conj()
                })),
            );
        }
        st
    }

    /// Largest shift length used.
    pub fn reach(&self) -> i64 {
        self.support()
            .iter()
            .map(|(i, j)| i.abs().max(j.abs()) as i64)
            .max()
            .unwrap_or(0)
    }
}

/// Boundary margin required for exact position-side application.
pub const SUPPORT_MARGIN: i64 = 3;

/// Applies `A_H` to a field on a Dirichlet box; the field must vanish within
/// [`SUPPORT_MARGIN`] cells of the boundary.
pub fn conjugate_position_apply(op: &ConjugateOperator, f: &[Complex64], bbox: &TruncationBox) -> Result<CVec> {
    check_interior_support(f, bbox, SUPPORT_MARGIN)?;
    Ok(apply(&op.stencil(), f, bbox))
}

/// Fails when a nonzero entry sits less than `margin` cells from the boundary.
pub fn check_interior_support(f: &[Complex64], bbox: &TruncationBox, margin: i64) -> Result<()> {
    if bbox.bc == crate::lattice::Boundary::Dirichlet {
        for (k, v) in f.iter().enumerate() {
            if *v != Complex64::new(0.0, 0.0) {
                let s = bbox.site(k);
                if bbox.depth(s.n1, s.n2) < margin {
                    return Err(HexError::Support { margin: margin as usize });
                }
            }
        }
    }
    Ok(())
}

/// `<x> = sqrt(1/2 + x^2)`.
pub fn japanese(x: f64) -> f64 {
    (0.5 + x * x).sqrt()
}

/// `Lambda(n) = <n1> + <n2>`.
pub fn lambda(n1: i64, n2: i64) -> f64 {
    japanese(n1 as f64) + japanese(n2 as f64)
}

/// Multiplies a field by `Lambda^s` on both sublattices.
pub fn weight_apply(s: f64, f: &[Complex64], bbox: &TruncationBox) -> CVec {
    f.iter()
        .enumerate()
        .map(|(k, v)| {
            let site = bbox.site(k);
            v * lambda(site.n1, site.n2).powf(s)
        })
        .collect()
}

/// Vector field `a = (5/2) beta^{3/2} grad beta`.
pub fn a_field(x: Momentum) -> [f64; 2] {
    let b = beta(x).max(0.0);
    let g = grad_beta(x);
    let c = 2.5 * b.powf(1.5);
    [c * g[0], c * g[1]]
}

/// `div a = (5/2)((3/2) sqrt(beta) |grad beta|^2 + beta^{3/2} lap beta)`.
pub fn div_a(x: Momentum) -> f64 {
    let b = beta(x).max(0.0);
    2.5 * (1.5 * b.sqrt() * grad_beta_sq(x) + b.powf(1.5) * laplacian_beta(x))
}

/// `hat A g` at one point from the value and gradient of `g`.
pub fn hat_a_at(x: Momentum, g: Complex64, dg: [Complex64; 2]) -> Complex64 {
    let a = a_field(x);
    let i = Complex64::i();
    i * 0.5 * ((a[0] * dg[0] + a[1] * dg[1]) * 2.0 + g * div_a(x))
}

/// `hat A g` written with explicit trigonometric brackets: a first-order part
/// `5 i beta^{3/2} ((-sin x1 - sin(x1-x2)) d1 g + (-sin x2 + sin(x1-x2)) d2 g)`
/// and a zeroth-order part `(15i/2) sqrt(beta) S g - (5i/2) beta^{3/2} C g` with
/// `S = sin^2 x1 + sin^2 x2 + 2 sin^2(x1-x2) + 2 sin(x1-x2)(sin x1 - sin x2)` and
/// `C = cos x1 + cos x2 + 2 cos(x1-x2)`.
pub fn hat_a_trig_at(x: Momentum, g: Complex64, dg: [Complex64; 2]) -> Complex64 {
    hat_a_trig_with_zeroth(x, g, dg, 7.5, 2.5)
}

/// Same layout as [`hat_a_trig_at`] with free zeroth-order coefficients.
pub fn hat_a_trig_with_zeroth(x: Momentum, g: Complex64, dg: [Complex64; 2], cs: f64, cc: f64) -> Complex64 {
    let i = Complex64::i();
    let b = beta(x).max(0.0);
    let (s1, s2, s12) = (x.x1.sin(), x.x2.sin(), (x.x1 - x.x2).sin());
    let first = (dg[0] * (-s1 - s12) + dg[1] * (-s2 + s12)) * (5.0 * b.powf(1.5));
    let sbr = s1 * s1 + s2 * s2 + 2.0 * s12 * s12 + 2.0 * s12 * (s1 - s2);
    let cbr = x.x1.cos() + x.x2.cos() + 2.0 * (x.x1 - x.x2).cos();
    i * first + i * g * (cs * b.sqrt() * sbr - cc * b.powf(1.5) * cbr)
}

/// `conj(u) hat A g` with `conj(u) = w / sqrt(beta)`, written with polynomial coefficients.
pub fn ubar_hat_a_at(x: Momentum, g: Complex64, dg: [Complex64; 2]) -> Complex64 {
    let i = Complex64::i();
    let b = beta(x);
    let gb = grad_beta(x);
    let wx = w(x);
    let first = (dg[0] * gb[0] + dg[1] * gb[1]) * wx * (2.5 * b);
    let zeroth = wx * (2.5 * (1.5 * grad_beta_sq(x) + b * laplacian_beta(x)));
    i * first + i * 0.5 * zeroth * g
}

/// `hat A (u h)` with `u = conj(w) / sqrt(beta)`, written with polynomial coefficients.
pub fn hat_a_u_at(x: Momentum, h: Complex64, dh: [Complex64; 2]) -> Complex64 {
    let i = Complex64::i();
    let b = beta(x);
    let gb = grad_beta(x);
    let wc = w(x).conj();
    let gw = grad_w(x);
    let gwc = [gw[0].conj(), gw[1].conj()];
    let first = (dh[0] * gb[0] + dh[1] * gb[1]) * wc * (2.5 * b);
    let zeroth = (gwc[0] * gb[0] + gwc[1] * gb[1]) * b + wc * (0.25 * grad_beta_sq(x)) + wc * (0.5 * b * laplacian_beta(x));
    i * first + i * 2.5 * zeroth * h
}

/// `A_F` applied to a two-component function given by values and gradients at `x`.
pub fn a_f_at(x: Momentum, g: [Complex64; 2], dg: [[Complex64; 2]; 2]) -> [Complex64; 2] {
    [hat_a_u_at(x, g[1], dg[1]), ubar_hat_a_at(x, g[0], dg[0])]
}

/// Fourier transform `(1/2pi) sum_n f(n) e^{-i n.x}` of a two-component box field at `x`,
/// together with its gradient.
pub fn fourier_at(f: &[Complex64], bbox: &TruncationBox, x: Momentum) -> ([Complex64; 2], [[Complex64; 2]; 2]) {
    let mut val = [Complex64::new(0.0, 0.0); 2];
    let mut grad = [[Complex64::new(0.0, 0.0); 2]; 2];
    let i = Complex64::i();
    for (k, v) in f.iter().enumerate() {
        if *v == Complex64::new(0.0, 0.0) {
            continue;
        }
        let s = bbox.site(k);
        let e = Complex64::cis(-(s.n1 as f64 * x.x1 + s.n2 as f64 * x.x2)) * v / (2.0 * PI);
        let c = s.tag.component();
        val[c] += e;
        grad[c][0] += -i * s.n1 as f64 * e;
        grad[c][1] += -i * s.n2 as f64 * e;
    }
    (val, grad)
}

/// Largest defect of `F(A_H f) = A_F(F f)` over the momenta `xs`.
pub fn intertwining_defect(op: &ConjugateOperator, f: &[Complex64], bbox: &TruncationBox, xs: &[Momentum]) -> Result<f64> {
    let af = conjugate_position_apply(op, f, bbox)?;
    let mut worst: f64 = 0.0;
    for &x in xs {
        let (lhs, _) = fourier_at(&af, bbox, x);
        let (g, dg) = fourier_at(f, bbox, x);
        let rhs = a_f_at(x, g, dg);
        worst = worst.max((lhs[0] - rhs[0]).norm()).max((lhs[1] - rhs[1]).norm());
    }
    Ok(worst)
}

/// Samples of a function on the `M x M` torus grid `x = -pi + 2 pi m / M`, row-major in `m1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TorusGrid {
    pub m: usize,
    pub values: Vec<Complex64>,
}

impl TorusGrid {
    /// Samples `g` on the grid.
    pub fn sample<F: Fn(Momentum) -> Complex64>(m: usize, g: F) -> Self {
        let mut values = Vec::with_capacity(m * m);
        for a in 0..m {
            for b in 0..m {
                values.push(g(grid_point(m, a, b)));
            }
        }
        Self { m, values }
    }

    /// Spectral gradient: exact for trigonometric polynomials of degree below `M/2`.
    pub fn spectral_gradient(&self) -> [TorusGrid; 2] {
        let m = self.m;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(m);
        let inv = planner.plan_fft_inverse(m);
        let mut spectrum = self.values.clone();
        fft2(&mut spectrum, m, &*fwd);
        let wave = |k: usize| -> f64 {
            if 2 * k == m {
                0.0
            } else if 2 * k < m {
                k as f64
            } else {
                k as f64 - m as f64
            }
        };
        let scale = 1.0 / (m * m) as f64;
        let mut out = [self.clone(), self.clone()];
        for (axis, o) in out.iter_mut().enumerate() {
            let mut d: Vec<Complex64> = spectrum
                .iter()
                .enumerate()
                .map(|(idx, v)| {
                    let k = if axis == 0 { idx / m } else { idx % m };
                    v * Complex64::new(0.0, wave(k))
                })
                .collect();
            fft2(&mut d, m, &*inv);
            o.values = d.into_iter().map(|v| v * scale).collect();
        }
        out
    }

    /// Momentum of flat index `k`.
    pub fn point(&self, k: usize) -> Momentum {
        grid_point(self.m, k / self.m, k % self.m)
    }
}

/// Grid momentum `(-pi + 2 pi a / M, -pi + 2 pi b / M)`.
pub fn grid_point(m: usize, a: usize, b: usize) -> Momentum {
    Momentum::raw(crate::symbol::grid_coordinate(a, m), crate::symbol::grid_coordinate(b, m))
}

fn fft2(data: &mut [Complex64], m: usize, plan: &dyn rustfft::Fft<f64>) {
    for row in data.chunks_mut(m) {
        plan.process(row);
    }
    let mut col = vec![Complex64::new(0.0, 0.0); m];
    for c in 0..m {
        for r in 0..m {
            col[r] = data[r * m + c];
        }
        plan.process(&mut col);
        for r in 0..m {
            data[r * m + c] = col[r];
        }
    }
}

/// `hat A g` on a grid, using spectral derivatives of `g`.
pub fn conjugate_fourier_apply(g: &TorusGrid) -> TorusGrid {
    let d = g.spectral_gradient();
    let values = (0..g.values.len())
        .map(|k| hat_a_at(g.point(k), g.values[k], [d[0].values[k], d[1].values[k]]))
        .collect();
    TorusGrid { m: g.m, values }
}

/// Largest defect of `[sqrt(beta), i hat A] g = (5/4) beta |grad beta|^2 g` on the grid.
/// `hat A (sqrt(beta) g)` uses the product rule with the analytic gradient of `sqrt(beta)`.
pub fn commutator_symbol_defect(g: &TorusGrid) -> f64 {
    let d = g.spectral_gradient();
    let i = Complex64::i();
    let mut worst: f64 = 0.0;
    for k in 0..g.values.len() {
        let x = g.point(k);
        let sb = beta(x).max(0.0).sqrt();
        let gs = grad_sqrt_beta(x);
        let (gv, dg) = (g.values[k], [d[0].values[k], d[1].values[k]]);
        let a_g = hat_a_at(x, gv, dg);
        let d_sg = [dg[0] * sb + gv * gs[0], dg[1] * sb + gv * gs[1]];
        let a_sg = hat_a_at(x, gv * sb, d_sg);
        let lhs = i * (a_g * sb - a_sg);
        let rhs = gv * (1.25 * beta(x) * grad_beta_sq(x));
        worst = worst.max((lhs - rhs).norm());
    }
    worst
}

/// Largest defect of `[F, i A_F] g = (5/12) beta |grad beta|^2 g` for a two-component `g`.
pub fn matrix_commutator_defect(g: &[TorusGrid; 2]) -> f64 {
    let m = g[0].m;
    let i = Complex64::i();
    let dg = [g[0].spectral_gradient(), g[1].spectral_gradient()];
    // F g, sampled, then differentiated spectrally (trigonometric polynomial).
    let fg0 = TorusGrid::sample(m, |x| {
        let k = flat_of(m, x);
        w(x).conj() * g[1].values[k] / 3.0
    });
    let fg1 = TorusGrid::sample(m, |x| {
        let k = flat_of(m, x);
        w(x) * g[0].values[k] / 3.0
    });
    let dfg = [fg0.spectral_gradient(), fg1.spectral_gradient()];
    let mut worst: f64 = 0.0;
    for k in 0..m * m {
        let x = g[0].point(k);
        let gv = [g[0].values[k], g[1].values[k]];
        let gd = [[dg[0][0].values[k], dg[0][1].values[k]], [dg[1][0].values[k], dg[1][1].values[k]]];
        let ag = a_f_at(x, gv, gd);
        let wx = w(x) / 3.0;
        let f_ag = [wx.conj() * ag[1], wx * ag[0]];
        let fv = [fg0.values[k], fg1.values[k]];
        let fd = [[dfg[0][0].values[k], dfg[0][1].values[k]], [dfg[1][0].values[k], dfg[1][1].values[k]]];
        let a_fg = a_f_at(x, fv, fd);
        let c = 5.0 / 12.0 * beta(x) * grad_beta_sq(x);
        for comp in 0..2 {
            let lhs = i * (f_ag[comp] - a_fg[comp]);
            worst = worst.max((lhs - gv[comp] * c).norm());
        }
    }
    worst
}

fn flat_of(m: usize, x: Momentum) -> usize {
    let idx = |v: f64| (((v + PI) * m as f64 / (2.0 * PI)).round() as usize) % m;
    idx(x.x1) * m + idx(x.x2)
}

/// Trigonometric monomial `e^{i (k1 x1 + k2 x2)}`.
pub fn plane_wave(k1: i64, k2: i64) -> impl Fn(Momentum) -> Complex64 {
    move |x| Complex64::cis(k1 as f64 * x.x1 + k2 as f64 * x.x2)
}

/// Builds a field from a list of `(site, value)` pairs.
pub fn field_from_sites(bbox: &TruncationBox, entries: &[(LatticeSite, Complex64)]) -> Result<CVec> {
    let mut f = vec![Complex64::new(0.0, 0.0); bbox.dim()];
    for (s, v) in entries {
        f[bbox.flat_index(*s)?] += v;
    }
    Ok(f)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lattice::Boundary;
    use crate::linalg::{dot, norm};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn interior_field(bbox: &TruncationBox, seed: u64, radius: i64) -> CVec {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..bbox.dim())
            .map(|k| {
                let s = bbox.site(k);
                if s.n1.abs() <= radius && s.n2.abs() <= radius {
                    Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect()
    }

    #[test]
    fn reference_table_spot_values() {
        let t = alpha_tables();
        assert_eq!(t.get((0, 0)).get(0, 0), 2);
        assert_eq!(t.get((1, 1)).get(-1, 0), 4);
        assert_eq!(t.get((0, 0)).get(1, -1), 24);
        assert_eq!(t.get((0, 0)).get(-2, 0), 19);
    }

    #[test]
    fn golden_csv_matches_hard_coded_tables() {
        assert_eq!(CoeffTable::read_csv(ALPHA_CSV).unwrap(), alpha_tables());
        let mut buf = Vec::new();
        alpha_tables().write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), ALPHA_CSV);
    }

    #[test]
    fn expansion_matches_first_order_tables_up_to_one_sign() {
        let e = expand_long_form();
        let p = alpha_tables();
        assert_eq!(e.get((1, 0)), p.get((1, 0)));
        assert_eq!(e.get((1, 1)), p.get((1, 1)));
        assert_eq!(e.get((0, 1)).scale(-1), *p.get((0, 1)));
        assert_ne!(e.get((0, 0)), p.get((0, 0)));
        let err = self_check(&p).unwrap_err();
        assert!(matches!(err, HexError::Mismatch { l1: 0, l2: 0, .. }));
        assert!(self_check(&e).is_ok());
    }

    #[test]
    fn expansion_of_the_zeroth_order_bracket_has_expected_spot_values() {
        let b = long_form().b;
        assert_eq!(b.get(0, 0), 4);
        assert_eq!(b.get(-2, 0), 23);
        assert_eq!(b.get(1, -2), 38);
        assert_eq!(b.0.values().sum::<i64>(), 432);
    }

    #[test]
    fn weight_examples() {
        assert!((lambda(0, 0) - 2f64.sqrt()).abs() < 1e-15);
        let b = TruncationBox::centered(6, Boundary::Dirichlet);
        let f = interior_field(&b, 1, 2);
        assert_eq!(weight_apply(0.0, &f, &b), f);
        let back = weight_apply(-0.7, &weight_apply(0.7, &f, &b), &b);
        assert!(crate::linalg::max_abs_diff(&back, &f) < 1e-12);
    }

    #[test]
    fn adjointness_on_interior_data() {
        let b = TruncationBox::centered(20, Boundary::Dirichlet);
        let op = ConjugateOperator::canonical();
        for seed in 0..5 {
            let f = interior_field(&b, seed, 5);
            let g = interior_field(&b, 100 + seed, 5);
            let af = conjugate_position_apply(&op, &f, &b).unwrap();
            let ag = conjugate_position_apply(&op, &g, &b).unwrap();
            let lhs = dot(&g, &af);
            let rhs = dot(&ag, &f);
            assert!((lhs - rhs).norm() < 1e-10 * (1.0 + lhs.norm()));
        }
    }

    #[test]
    fn support_margin_is_enforced() {
        let b = TruncationBox::centered(10, Boundary::Dirichlet);
        let f = field_from_sites(&b, &[(LatticeSite::new(-5, 0, SublatticeTag::P1), Complex64::new(1.0, 0.0))]).unwrap();
        assert!(matches!(
            conjugate_position_apply(&ConjugateOperator::canonical(), &f, &b),
            Err(HexError::Support { .. })
        ));
    }

    #[test]
    fn delta_column_matches_hand_expansion() {
        let b = TruncationBox::centered(20, Boundary::Dirichlet);
        let op = ConjugateOperator::canonical();
        let src = LatticeSite::new(2, -1, SublatticeTag::P1);
        let f = field_from_sites(&b, &[(src, Complex64::new(1.0, 0.0))]).unwrap();
        let out = conjugate_position_apply(&op, &f, &b).unwrap();
        let t = expand_long_form();
        for (i, j) in op.support() {
            let mut expect = prefactor((0, 0)) * t.get((0, 0)).get(i, j) as f64;
            for l in &LABELS[1..] {
                let q = l.0 as i64 * 2 - l.1 as i64 * (-1);
                expect += prefactor(*l) * (t.get(*l).get(i, j) * q) as f64;
            }
            let at = LatticeSite::new(2 + i as i64, -1 + j as i64, SublatticeTag::P2);
            assert!((out[b.flat_index(at).unwrap()] - expect).norm() < 1e-12);
        }
    }

    #[test]
    fn fourier_intertwining_selects_q_on_the_right() {
        let b = TruncationBox::centered(24, Boundary::Dirichlet);
        let f = interior_field(&b, 7, 4);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut xs: Vec<Momentum> = (0..60)
            .map(|_| Momentum::raw(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)))
            .collect();
        xs.extend(crate::symbol::dirac_points());
        let good = intertwining_defect(&ConjugateOperator::canonical(), &f, &b, &xs).unwrap();
        assert!(good < 1e-8, "{good}");
        let left = ConjugateOperator::new(expand_long_form(), QOrder::Left);
        assert!(intertwining_defect(&left, &f, &b, &xs).unwrap() > 1e-3);
        let reference = ConjugateOperator::new(alpha_tables(), QOrder::Left);
        assert!(intertwining_defect(&reference, &f, &b, &xs).unwrap() > 1e-3);
    }

    #[test]
    fn weight_domination_is_finite() {
        let b = TruncationBox::centered(40, Boundary::Dirichlet);
        let op = ConjugateOperator::canonical();
        let mut worst: f64 = 0.0;
        for seed in 0..20 {
            let f = interior_field(&b, seed, 2 + (seed as i64 % 15));
            let af = conjugate_position_apply(&op, &f, &b).unwrap();
            worst = worst.max(norm(&af) / norm(&weight_apply(1.0, &f, &b)));
        }
        assert!(worst.is_finite() && worst < 1e3);
    }

    #[test]
    fn hat_a_two_forms_agree() {
        for m in [64usize, 128] {
            for (k1, k2) in [(0, 0), (1, 2), (-3, 1)] {
                let g = TorusGrid::sample(m, plane_wave(k1, k2));
                let d = g.spectral_gradient();
                for k in 0..g.values.len() {
                    let x = g.point(k);
                    let dg = [d[0].values[k], d[1].values[k]];
                    let a = hat_a_at(x, g.values[k], dg);
                    let b = hat_a_trig_at(x, g.values[k], dg);
                    assert!((a - b).norm() < 1e-10);
                }
            }
        }
    }

    #[test]
    fn doubled_zeroth_order_coefficients_do_not_match() {
        let x = Momentum::raw(0.4, -1.1);
        let one = Complex64::new(1.0, 0.0);
        let z = [Complex64::new(0.0, 0.0); 2];
        let good = hat_a_at(x, one, z);
        let doubled = hat_a_trig_with_zeroth(x, one, z, 15.0, 5.0);
        assert!((doubled - good * 2.0).norm() < 1e-12);
    }

    #[test]
    fn commutator_identity_on_trig_polynomials() {
        for (k1, k2) in [(0, 0), (1, 2), (-2, 3)] {
            let g = TorusGrid::sample(128, plane_wave(k1, k2));
            assert!(commutator_symbol_defect(&g) < 1e-8);
        }
        let g = [
            TorusGrid::sample(128, plane_wave(1, 0)),
            TorusGrid::sample(128, |x| plane_wave(0, -2)(x) * 0.5 + plane_wave(1, 1)(x)),
        ];
        assert!(matrix_commutator_defect(&g) < 1e-8);
    }

    #[test]
    fn spectral_gradient_is_exact_on_plane_waves() {
        let g = TorusGrid::sample(32, plane_wave(3, -5));
        let d = g.spectral_gradient();
        for k in 0..g.values.len() {
            let x = g.point(k);
            let e = plane_wave(3, -5)(x) * Complex64::i();
            assert!((d[0].values[k] - e * 3.0).norm() < 1e-12);
            assert!((d[1].values[k] + e * 5.0).norm() < 1e-12);
        }
    }

    #[test]
    fn a_f_vanishes_at_dirac_points() {
        for x in crate::symbol::dirac_points() {
            let one = [Complex64::new(1.0, 0.0), Complex64::new(0.3, -0.2)];
            let d = [[Complex64::new(0.1, 0.0), Complex64::new(0.0, 2.0)]; 2];
            let v = a_f_at(x, one, d);
            assert!(v[0].norm() < 1e-12 && v[1].norm() < 1e-12);
        }
    }
}
