//! Index sets, structural properties and three-term sum identities of the
//! coefficient tables, and regeneration of the reference S-value tables.
//!
//! For each label `(l1, l2)` the ten index sets are built from support tests:
//!
//! * `I0`: support of the table.
//! * `I1 = {(i,j) in I0 : (i+1,j) not in I0}`, `I2 = {(i,j) in I1 : (i,j+1) not in I0}`.
//! * `I3`, `I4`, `I5`: points of `I0` whose reflections `(-i,-j)`, `(-i-1,-j)`, `(-i,-j-1)` leave `I0`.
//! * `I6`, `I7`, `I8`, `I9`: further refinements of `I2`, `I3`, `I4`, `I5`.
//!
//! All arithmetic is over the integers, with zero tolerance.

use crate::conjugate::{CoeffTable, Laurent, LABELS};
use crate::error::{HexError, Result};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;

/// A set of exponent pairs.
pub type IndexSet = BTreeSet<(i32, i32)>;

/// The ten index sets of one table, plus the two `min(l1, l2)`-dependent selectors.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexSetFamily {
    pub l: (u8, u8),
    /// `I0` through `I9`.
    pub sets: Vec<IndexSet>,
    /// `{(i,j) in I0 : (-i-min, -j) not in I0}`.
    pub selector_3: IndexSet,
    /// `{(i,j) in selector_3 : (i-1-min, -j) not in I1 and (i-min, -j-1) not in I2}`, as displayed.
    pub selector_7: IndexSet,
}

impl IndexSetFamily {
    /// `min(l1, l2)`.
    pub fn min_l(&self) -> i32 {
        self.l.0.min(self.l.1) as i32
    }

    /// Set `I^k`.
    pub fn set(&self, k: usize) -> &IndexSet {
        &self.sets[k]
    }

    /// The definition chains `I1 in I0`, `I2 in I1`, `I6 in I2`, `I7 in I3`, `I8 in I4`, `I9 in I5`.
    pub fn chains_hold(&self) -> bool {
        [(1, 0), (2, 1), (6, 2), (7, 3), (8, 4), (9, 5)]
            .iter()
            .all(|&(a, b)| self.sets[a].is_subset(&self.sets[b]))
    }
}

fn has(s: &IndexSet, i: i32, j: i32) -> bool {
    s.contains(&(i, j))
}

/// Builds the family of one table.
pub fn build_family(table: &Laurent, l: (u8, u8)) -> IndexSetFamily {
    let i0: IndexSet = table.0.iter().filter(|(_, v)| **v != 0).map(|(k, _)| *k).collect();
    let filter = |base: &IndexSet, pred: &dyn Fn(i32, i32) -> bool| -> IndexSet {
        base.iter().copied().filter(|&(i, j)| pred(i, j)).collect()
    };
    let out = |i: i32, j: i32| !has(&i0, i, j);
    let i1 = filter(&i0, &|i, j| out(i + 1, j));
    let i2 = filter(&i1, &|i, j| out(i, j + 1));
    let i3 = filter(&i0, &|i, j| out(-i, -j));
    let i4 = filter(&i0, &|i, j| out(-i - 1, -j));
    let i5 = filter(&i0, &|i, j| out(-i, -j - 1));
    let i6 = filter(&i2, &|i, j| out(i - 1, j + 1));
    let i7 = filter(&i3, &|i, j| out(-i - 1, -j) && out(-i, -j - 1));
    let i8 = filter(&i4, &|i, j| out(-i - 2, -j) && out(-i - 1, -j - 1));
    let i9 = filter(&i5, &|i, j| out(-i - 1, -j - 1) && out(-i, -j - 2) && out(i, j + 1) && out(i + 1, j + 1));
    let mn = l.0.min(l.1) as i32;
    let selector_3 = filter(&i0, &|i, j| out(-i - mn, -j));
    let selector_7 = filter(&selector_3, &|i, j| !has(&i1, i - 1 - mn, -j) && !has(&i2, i - mn, -j - 1));
    IndexSetFamily {
        l,
        sets: vec![i0, i1, i2, i3, i4, i5, i6, i7, i8, i9],
        selector_3,
        selector_7,
    }
}

/// Families of all four tables in label order.
pub fn build_index_sets(table: &CoeffTable) -> Vec<IndexSetFamily> {
    LABELS.iter().map(|&l| build_family(table.get(l), l)).collect()
}

/// Outcome of the three structural points for one table.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StructureReport {
    pub l: (u8, u8),
    /// Points of `I^{4-min}` meeting none of the three alternatives of point 1.
    pub point1_failures: Vec<(i32, i32)>,
    /// Points of `I5` meeting none of the three alternatives of point 2.
    pub point2_failures: Vec<(i32, i32)>,
    /// Elements of `I9` (point 3 requires none).
    pub i9: Vec<(i32, i32)>,
    /// Points of `I^{7+min}` outside `I1 u I2 u I^{8-min}`.
    pub point3_inclusion_failures: Vec<(i32, i32)>,
    pub chains_hold: bool,
}

impl StructureReport {
    /// Point 1 holds.
    pub fn point1(&self) -> bool {
        self.point1_failures.is_empty()
    }

    /// Point 2 holds.
    pub fn point2(&self) -> bool {
        self.point2_failures.is_empty()
    }

    /// `I9` is empty.
    pub fn i9_empty(&self) -> bool {
        self.i9.is_empty()
    }

    /// The inclusion of point 3 holds.
    pub fn point3_inclusion(&self) -> bool {
        self.point3_inclusion_failures.is_empty()
    }
}

/// Checks points 1 to 3. `I^{3+min}` is the displayed selector (it coincides
/// with `I3` or `I4`); `I^{7+min}` is resolved to `I7` or `I8` as the
/// identification clause states.
pub fn verify_structure(fam: &IndexSetFamily) -> StructureReport {
    let mn = fam.min_l();
    let (i1, i2) = (fam.set(1), fam.set(2));
    let point1_failures = fam
        .set((4 - mn) as usize)
        .iter()
        .copied()
        .filter(|&(i, j)| {
            !(has(i1, -i - 2 + mn, -j) || has(i2, -i - 1 + mn, -j - 1) || has(&fam.selector_3, -i - mn + 1, j))
        })
        .collect();
    let point2_failures = fam
        .set(5)
        .iter()
        .copied()
        .filter(|&(i, j)| !(has(i1, -i - 1, -j - 1) || has(i2, -i, -j - 2) || has(fam.set(4), -i - 1, -j + 1)))
        .collect();
    let target: IndexSet = i1.union(i2).chain(fam.set((8 - mn) as usize)).copied().collect();
    let point3_inclusion_failures = fam
        .set((7 + mn) as usize)
        .iter()
        .copied()
        .filter(|p| !target.contains(p))
        .collect();
    StructureReport {
        l: fam.l,
        point1_failures,
        point2_failures,
        i9: fam.set(9).iter().copied().collect(),
        point3_inclusion_failures,
        chains_hold: fam.chains_hold(),
    }
}

/// The four three-term identities.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IdentityKind {
    Q1,
    Q2,
    Q3,
    Q9,
}

impl IdentityKind {
    /// All kinds.
    pub const ALL: [IdentityKind; 4] = [IdentityKind::Q1, IdentityKind::Q2, IdentityKind::Q3, IdentityKind::Q9];

    /// Index of the set the identity ranges over.
    pub fn domain(self) -> usize {
        match self {
            IdentityKind::Q1 => 0,
            IdentityKind::Q2 => 1,
            IdentityKind::Q3 => 2,
            IdentityKind::Q9 => 4,
        }
    }

    /// Short name.
    pub fn name(self) -> &'static str {
        match self {
            IdentityKind::Q1 => "Q1",
            IdentityKind::Q2 => "Q2",
            IdentityKind::Q3 => "Q3",
            IdentityKind::Q9 => "Q9",
        }
    }

    /// Parses a short name.
    pub fn parse(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| HexError::Io(format!("unknown identity kind {s}")))
    }
}

/// The two sides `(S1, S2)` of an identity at `(i, j)`, before the sign.
pub fn s_values(t: &Laurent, kind: IdentityKind, i: i32, j: i32) -> (i64, i64) {
    let g = |a: i32, b: i32| t.get(a, b);
    match kind {
        IdentityKind::Q1 => (
            g(i, j) + g(i - 1, j) + g(i, j - 1),
            g(-i, -j) + g(-i - 1, -j) + g(-i, -j - 1),
        ),
        IdentityKind::Q2 | IdentityKind::Q9 => (
            g(i, j) + g(i + 1, j) + g(i + 1, j - 1),
            g(-i - 1, -j) + g(-i - 2, -j) + g(-i - 1, -j - 1),
        ),
        IdentityKind::Q3 => (
            g(i, j) + g(i, j + 1) + g(i - 1, j + 1),
            g(-i, -j - 1) + g(-i - 1, -j - 1) + g(-i, -j - 2),
        ),
    }
}

/// `(-1)^{max(l1, l2)}`.
pub fn label_sign(l: (u8, u8)) -> i64 {
    if l.0.max(l.1) == 1 {
        -1
    } else {
        1
    }
}

/// One evaluated identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SumRow {
    pub l: (u8, u8),
    pub i: i32,
    pub j: i32,
    pub kind: IdentityKind,
    pub s1: i64,
    pub s2: i64,
}

impl SumRow {
    /// `S1 = (-1)^{max(l1,l2)} S2`.
    pub fn holds(&self) -> bool {
        self.s1 == label_sign(self.l) * self.s2
    }
}

/// Rows of one identity over its domain, in `(i, j)` order.
pub fn identity_rows(table: &CoeffTable, fam: &IndexSetFamily, kind: IdentityKind) -> Vec<SumRow> {
    let t = table.get(fam.l);
    fam.set(kind.domain())
        .iter()
        .map(|&(i, j)| {
            let (s1, s2) = s_values(t, kind, i, j);
            SumRow {
                l: fam.l,
                i,
                j,
                kind,
                s1,
                s2,
            }
        })
        .collect()
}

/// Evaluates every identity on its domain for all four tables; fails on the first violated row.
pub fn verify_sum_identities(table: &CoeffTable, fams: &[IndexSetFamily]) -> Result<Vec<SumRow>> {
    let mut rows = Vec::new();
    for fam in fams {
        for kind in IdentityKind::ALL {
            for r in identity_rows(table, fam, kind) {
                if !r.holds() {
                    return Err(HexError::IdentityViolation {
                        kind: kind.name().to_string(),
                        l1: r.l.0,
                        l2: r.l.1,
                        i: r.i,
                        j: r.j,
                        s1: r.s1,
                        s2: r.s2,
                    });
                }
                rows.push(r);
            }
        }
    }
    Ok(rows)
}

/// Label and identity behind each reference S table, by table number.
pub const TABLE_LAYOUT: [(u32, (u8, u8), IdentityKind); 16] = [
    (5, (0, 0), IdentityKind::Q1),
    (6, (0, 1), IdentityKind::Q1),
    (7, (1, 0), IdentityKind::Q1),
    (8, (1, 1), IdentityKind::Q1),
    (9, (0, 0), IdentityKind::Q2),
    (10, (0, 1), IdentityKind::Q2),
    (11, (1, 1), IdentityKind::Q2),
    (12, (1, 0), IdentityKind::Q3),
    (13, (0, 0), IdentityKind::Q3),
    (14, (1, 0), IdentityKind::Q3),
    (15, (0, 1), IdentityKind::Q3),
    (16, (1, 1), IdentityKind::Q3),
    (17, (0, 0), IdentityKind::Q9),
    (18, (1, 0), IdentityKind::Q9),
    (19, (0, 1), IdentityKind::Q9),
    (20, (1, 1), IdentityKind::Q9),
];

/// Transcription of the reference S tables: `table,l1,l2,i,j,kind,S1,S2`.
pub const GOLDEN_CSV: &str = include_str!("../data/s_tables_golden.csv");

/// Logged corrections to the transcription: `table,i,j,field,printed,resolved`.
pub const ERRATA_CSV: &str = include_str!("../data/s_tables_errata.csv");

/// One transcribed row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GoldenRow {
    pub table: u32,
    pub l: (u8, u8),
    pub i: i32,
    pub j: i32,
    pub kind: IdentityKind,
    pub s1: i64,
    pub s2: i64,
}

/// Parses the transcription.
pub fn golden_rows(text: &str) -> Result<Vec<GoldenRow>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
        let n = |k: usize| -> Result<i64> { f(k).parse().map_err(|_| HexError::Io(format!("bad golden record {rec:?}"))) };
        out.push(GoldenRow {
            table: n(0)? as u32,
            l: (n(1)? as u8, n(2)? as u8),
            i: n(3)? as i32,
            j: n(4)? as i32,
            kind: IdentityKind::parse(&f(5))?,
            s1: n(6)?,
            s2: n(7)?,
        });
    }
    Ok(out)
}

/// What an erratum corrects.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErratumField {
    S1,
    S2,
    DuplicateRow,
    ExtraRow,
    MissingRow,
}

/// One logged correction.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Erratum {
    pub table: u32,
    pub i: i32,
    pub j: i32,
    pub field: ErratumField,
    pub printed: String,
    pub resolved: String,
}

/// Parses the errata log.
pub fn errata(text: &str) -> Result<Vec<Erratum>> {
    let mut rdr = csv::Reader::from_reader(text.as_bytes());
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |k: usize| rec.get(k).unwrap_or("").trim().to_string();
        let n = |k: usize| -> Result<i64> { f(k).parse().map_err(|_| HexError::Io(format!("bad errata record {rec:?}"))) };
        let field = match f(3).as_str() {
            "S1" => ErratumField::S1,
            "S2" => ErratumField::S2,
            "duplicate_row" => ErratumField::DuplicateRow,
            "extra_row" => ErratumField::ExtraRow,
            "missing_row" => ErratumField::MissingRow,
            other => return Err(HexError::Io(format!("unknown errata field {other}"))),
        };
        out.push(Erratum {
            table: n(0)? as u32,
            i: n(1)? as i32,
            j: n(2)? as i32,
            field,
            printed: f(4),
            resolved: f(5),
        });
    }
    Ok(out)
}

fn parse_pair(s: &str) -> Result<(i64, i64)> {
    let mut it = s.split(';').map(|v| v.trim().parse::<i64>());
    match (it.next(), it.next()) {
        (Some(Ok(a)), Some(Ok(b))) => Ok((a, b)),
        _ => Err(HexError::Io(format!("bad value pair {s}"))),
    }
}

/// One regenerated table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EmittedTable {
    pub number: u32,
    pub l: (u8, u8),
    pub kind: IdentityKind,
    pub rows: Vec<SumRow>,
}

impl EmittedTable {
    /// CSV with columns `l1,l2,i,j,kind,S1,S2,match`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(out);
        wtr.write_record(["l1", "l2", "i", "j", "kind", "S1", "S2", "match"])?;
        for r in &self.rows {
            wtr.write_record([
                r.l.0.to_string(),
                r.l.1.to_string(),
                r.i.to_string(),
                r.j.to_string(),
                r.kind.name().to_string(),
                r.s1.to_string(),
                r.s2.to_string(),
                r.holds().to_string(),
            ])?;
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Regenerates every reference table from the coefficients alone.
pub fn emit_tables(table: &CoeffTable) -> Vec<EmittedTable> {
    let fams = build_index_sets(table);
    TABLE_LAYOUT
        .iter()
        .map(|&(number, l, kind)| {
            let fam = &fams[crate::conjugate::label_index(l)];
            EmittedTable {
                number,
                l,
                kind,
                rows: identity_rows(table, fam, kind),
            }
        })
        .collect()
}

/// A disagreement between regenerated and (corrected) transcribed rows.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct GoldenDiff {
    pub table: u32,
    pub i: i32,
    pub j: i32,
    /// `(S1, S2)` from the transcription, if the row exists there.
    pub golden: Option<(i64, i64)>,
    /// `(S1, S2)` regenerated, if the row exists there.
    pub emitted: Option<(i64, i64)>,
}

/// Applies the errata to the transcription. Every erratum must match the
/// transcribed value it claims to correct.
pub fn corrected_golden(golden: &[GoldenRow], errata: &[Erratum]) -> Result<BTreeMap<u32, BTreeMap<(i32, i32), (i64, i64)>>> {
    let mut tables: BTreeMap<u32, BTreeMap<(i32, i32), (i64, i64)>> = BTreeMap::new();
    let mut seen: BTreeSet<(u32, i32, i32)> = BTreeSet::new();
    let find = |t: u32, i: i32, j: i32, f: ErratumField| errata.iter().find(|e| e.table == t && e.i == i && e.j == j && e.field == f);
    for g in golden {
        let map = tables.entry(g.table).or_default();
        if !seen.insert((g.table, g.i, g.j)) {
            if find(g.table, g.i, g.j, ErratumField::DuplicateRow).is_none() {
                return Err(HexError::GoldenMismatch(format!("unlogged duplicate row ({}, {}) in table {}", g.i, g.j, g.table)));
            }
            continue;
        }
        if let Some(e) = find(g.table, g.i, g.j, ErratumField::ExtraRow) {
            check_logged(e, &format!("{};{}", g.s1, g.s2))?;
            continue;
        }
        let mut v = (g.s1, g.s2);
        if let Some(e) = find(g.table, g.i, g.j, ErratumField::S1) {
            check_logged(e, &g.s1.to_string())?;
            v.0 = e.resolved.parse().map_err(|_| HexError::Io(format!("bad erratum {e:?}")))?;
        }
        if let Some(e) = find(g.table, g.i, g.j, ErratumField::S2) {
            check_logged(e, &g.s2.to_string())?;
            v.1 = e.resolved.parse().map_err(|_| HexError::Io(format!("bad erratum {e:?}")))?;
        }
        map.insert((g.i, g.j), v);
    }
    for e in errata.iter().filter(|e| e.field == ErratumField::MissingRow) {
        tables.entry(e.table).or_default().insert((e.i, e.j), parse_pair(&e.resolved)?);
    }
    Ok(tables)
}

fn check_logged(e: &Erratum, actual: &str) -> Result<()> {
    if e.printed == actual {
        Ok(())
    } else {
        Err(HexError::GoldenMismatch(format!(
            "erratum {e:?} does not match transcribed value {actual}"
        )))
    }
}

/// Row-level differences between regenerated tables and a corrected transcription.
pub fn diff_tables(emitted: &[EmittedTable], golden: &BTreeMap<u32, BTreeMap<(i32, i32), (i64, i64)>>) -> Vec<GoldenDiff> {
    let empty = BTreeMap::new();
    let mut out = Vec::new();
    for t in emitted {
        let g = golden.get(&t.number).unwrap_or(&empty);
        let e: BTreeMap<(i32, i32), (i64, i64)> = t.rows.iter().map(|r| ((r.i, r.j), (r.s1, r.s2))).collect();
        let keys: BTreeSet<(i32, i32)> = g.keys().chain(e.keys()).copied().collect();
        for k in keys {
            let (gv, ev) = (g.get(&k).copied(), e.get(&k).copied());
            if gv != ev {
                out.push(GoldenDiff {
                    table: t.number,
                    i: k.0,
                    j: k.1,
                    golden: gv,
                    emitted: ev,
                });
            }
        }
    }
    out
}

/// Regenerates all tables and compares with the corrected transcription.
pub fn golden_check(table: &CoeffTable) -> Result<()> {
    let golden = corrected_golden(&golden_rows(GOLDEN_CSV)?, &errata(ERRATA_CSV)?)?;
    let diffs = diff_tables(&emit_tables(table), &golden);
    if diffs.is_empty() {
        Ok(())
    } else {
        Err(HexError::GoldenMismatch(format!("{} row-level diffs, first {:?}", diffs.len(), diffs[0])))
    }
}

/// Every observable output of the suite for one coefficient table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SuiteFingerprint {
    pub structure: Vec<StructureReport>,
    pub identities_hold: bool,
    pub golden_ok: bool,
}

/// Runs structure checks, identities and the golden comparison.
pub fn fingerprint(table: &CoeffTable) -> SuiteFingerprint {
    let fams = build_index_sets(table);
    SuiteFingerprint {
        structure: fams.iter().map(verify_structure).collect(),
        identities_hold: verify_sum_identities(table, &fams).is_ok(),
        golden_ok: golden_check(table).is_ok(),
    }
}

/// Result of the single-entry mutation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct MutationSummary {
    pub mutations: usize,
    pub detected: usize,
}

/// Changes each entry in `[-3, 3]^2` of each table by `+1` and `-1` and
/// counts the mutations that alter the suite's verdicts or flag a failure.
pub fn mutation_sweep(table: &CoeffTable) -> MutationSummary {
    let base = fingerprint(table);
    let mut mutations = 0;
    let mut detected = 0;
    for l in LABELS {
        for i in -3..=3 {
            for j in -3..=3 {
                for d in [1i64, -1] {
                    let mut m = table.clone();
                    let t = m.get_mut(l);
                    *t = t.add(&Laurent::monomial(i, j, d));
                    let f = fingerprint(&m);
                    mutations += 1;
                    if f != base || !f.identities_hold || !f.golden_ok {
                        detected += 1;
                    }
                }
            }
        }
    }
    MutationSummary { mutations, detected }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::conjugate::{alpha_tables, expand_long_form};

    fn set(v: &[(i32, i32)]) -> IndexSet {
        v.iter().copied().collect()
    }

    fn fam(l: (u8, u8)) -> IndexSetFamily {
        build_family(alpha_tables().get(l), l)
    }

    #[test]
    fn listed_small_sets() {
        assert_eq!(*fam((0, 1)).set(7), set(&[(-2, 1)]));
        assert_eq!(*fam((1, 0)).set(8), set(&[(0, -2)]));
        assert_eq!(*fam((0, 1)).set(5), set(&[(-2, 0), (-2, -1), (-2, 1), (-2, 2)]));
    }

    #[test]
    fn selector_three_matches_named_sets() {
        for l in LABELS {
            let f = fam(l);
            let named = if f.min_l() == 0 { f.set(3) } else { f.set(4) };
            assert_eq!(&f.selector_3, named);
        }
    }

    #[test]
    fn displayed_selector_seven_differs_from_named_sets() {
        let f = fam((0, 0));
        assert!(f.set(7).is_empty());
        assert!(!f.selector_7.is_empty());
    }

    #[test]
    fn chains_hold_for_all_tables() {
        for f in build_index_sets(&alpha_tables()) {
            assert!(f.chains_hold());
        }
    }

    #[test]
    fn structure_outcomes() {
        let r: Vec<_> = build_index_sets(&alpha_tables()).iter().map(verify_structure).collect();
        // I9 is empty except for (1,1).
        assert!(r[0].i9_empty() && r[1].i9_empty() && r[2].i9_empty());
        assert_eq!(r[3].i9, vec![(1, 0)]);
        // The inclusion of point 3 fails for (1,0) and (0,1).
        assert!(r[0].point3_inclusion() && r[3].point3_inclusion());
        assert_eq!(r[1].point3_inclusion_failures, vec![(1, -2)]);
        assert_eq!(r[2].point3_inclusion_failures, vec![(-2, 1)]);
        // Point 2 fails at one element of I5 for (0,1) and (1,1).
        assert_eq!(r[2].point2_failures, vec![(-2, 0)]);
        assert_eq!(r[3].point2_failures, vec![(1, 0)]);
        assert!(r[0].point2() && r[1].point2());
        assert_eq!(r[0].point1_failures, vec![(2, -3)]);
        assert!(r[1].point1() && r[2].point1());
    }

    #[test]
    fn sum_identity_examples() {
        let t = alpha_tables();
        assert_eq!(s_values(t.get((0, 0)), IdentityKind::Q1, 0, 0), (12, 12));
        assert_eq!(s_values(t.get((0, 1)), IdentityKind::Q1, 0, 1), (-14, 14));
        assert_eq!(s_values(t.get((1, 1)), IdentityKind::Q1, -1, 1), (14, -14));
        assert_eq!(s_values(t.get((1, 0)), IdentityKind::Q1, 2, 0), (-8, 8));
        assert_eq!(s_values(t.get((0, 0)), IdentityKind::Q2, 2, 0), (5, 5));
        assert_eq!(s_values(t.get((0, 0)), IdentityKind::Q3, 0, -2), (42, 42));
    }

    #[test]
    fn all_identities_hold_exactly() {
        let t = alpha_tables();
        let rows = verify_sum_identities(&t, &build_index_sets(&t)).unwrap();
        assert!(rows.iter().all(SumRow::holds));
        let e = expand_long_form();
        assert!(verify_sum_identities(&e, &build_index_sets(&e)).is_ok());
    }

    #[test]
    fn identity_violation_names_the_row() {
        let mut t = alpha_tables();
        let s = t.get_mut((0, 0));
        *s = s.add(&Laurent::monomial(0, 0, 1));
        let err = verify_sum_identities(&t, &build_index_sets(&t)).unwrap_err();
        assert!(matches!(err, HexError::IdentityViolation { l1: 0, l2: 0, .. }));
    }

    #[test]
    fn regenerated_tables_match_corrected_transcription() {
        golden_check(&alpha_tables()).unwrap();
        let raw = golden_rows(GOLDEN_CSV).unwrap();
        let log = errata(ERRATA_CSV).unwrap();
        let uncorrected = corrected_golden(&raw, &[]);
        assert!(uncorrected.is_err() || !diff_tables(&emit_tables(&alpha_tables()), &uncorrected.unwrap()).is_empty());
        assert!(!log.is_empty());
    }

    #[test]
    fn every_table_number_is_covered() {
        let rows = golden_rows(GOLDEN_CSV).unwrap();
        for (n, l, kind) in TABLE_LAYOUT {
            assert!(rows.iter().any(|r| r.table == n && r.l == l && r.kind == kind));
        }
    }

    #[test]
    fn emitted_csv_layout() {
        let t = &emit_tables(&alpha_tables())[0];
        let mut buf = Vec::new();
        t.write_csv(&mut buf).unwrap();
        let s = String::from_utf8(buf).unwrap();
        assert!(s.starts_with("l1,l2,i,j,kind,S1,S2,match\n"));
        assert!(s.contains("0,0,0,0,Q1,12,12,true"));
    }

    #[test]
    fn mutation_sweep_detects_everything() {
        let m = mutation_sweep(&alpha_tables());
        assert_eq!(m.mutations, 4 * 49 * 2);
        assert_eq!(m.detected, m.mutations);
    }

    #[test]
    fn corrupting_the_origin_coefficient_is_detected() {
        let mut t = alpha_tables();
        let s = t.get_mut((0, 0));
        *s = s.add(&Laurent::monomial(0, 0, 3));
        let f = fingerprint(&t);
        assert!(!f.identities_hold || !f.golden_ok);
    }
}
