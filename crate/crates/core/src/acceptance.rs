//! The nine acceptance criteria as a library, shared by the `acceptance`
//! test target and the `verify-all` subcommand.
//!
//! Every criterion is a list of gating checks. A criterion passes when all of
//! them pass. Criteria listed in [`KNOWN_RED`] fail for documented reasons
//! (see `ERRATA.md` and the README); the suite as a whole succeeds when every
//! criterion has its recorded outcome.

use crate::conjugate::{
    alpha_tables, commutator_symbol_defect, conjugate_position_apply, intertwining_defect, matrix_commutator_defect,
    plane_wave, self_check, ConjugateOperator, TorusGrid,
};
use crate::error::Result;
use crate::hypotheses::{
    check_basic, check_h3k, first_display_difference, j_map, second_display_difference, tuple_of_edge, tuple_of_site,
    GoldenProfile, ProfileShape,
};
use crate::lap::{
    boundary_return_time, delta, evolve, last_step_growth, origin, pointwise_decay, propagation_integral,
    resolvent_curve, rho_floor, rho_sweep, RHO_START,
};
use crate::lattice::{Boundary, LatticeSite, SublatticeTag, TruncationBox};
use crate::linalg::{dot, max_abs_diff, norm, random_cvec, CVec};
use crate::mourre::{approaches_monotonically, mourre_check, theta_sweep, threshold_degeneration, EnergyInterval};
use crate::operators::{
    assemble, dense_spectrum, free_hamiltonian, gauge_transform, hamiltonian, laplacian_hex, outlier_count,
    perturbation_di, tilde_delta, weighted_laplacian,
};
use crate::symbol::{critical_points, grad_sqrt_beta, periodic_spectrum, thresholds, Momentum};
use crate::tables::{build_index_sets, golden_check, mutation_sweep, verify_structure, verify_sum_identities};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use std::f64::consts::PI;
use std::time::Instant;

/// Criteria expected to fail, with the reason printed next to them.
pub const KNOWN_RED: [(u8, &str); 2] = [
    (3, "reference coefficient tables differ from the operator expansion; I9 of (1,1) is {(1,0)}; the point-3 inclusion fails for (1,0) and (0,1)"),
    (7, "at N = 48 and s = 0.6 the regular curves still grow by more than 10% per halving of rho at the floor 4/N"),
];

/// One measured sub-check.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: String,
    pub pass: bool,
    /// Informational checks are reported but do not decide the criterion.
    pub gating: bool,
}

fn check(name: &str, pass: bool, value: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        value: value.into(),
        pass,
        gating: true,
    }
}

fn info(name: &str, value: impl Into<String>) -> Check {
    Check {
        name: name.to_string(),
        value: value.into(),
        pass: true,
        gating: false,
    }
}

/// Outcome of one criterion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionResult {
    pub id: u8,
    pub title: String,
    pub checks: Vec<Check>,
    pub seconds: f64,
    pub budget_seconds: Option<f64>,
    pub error: Option<String>,
}

impl CriterionResult {
    /// All gating checks pass, no error occurred, and the runtime is within budget.
    pub fn passed(&self) -> bool {
        self.error.is_none()
            && self.checks.iter().filter(|c| c.gating).all(|c| c.pass)
            && self.budget_seconds.is_none_or(|b| self.seconds <= b)
    }

    /// Whether this criterion is recorded as failing.
    pub fn known_red(&self) -> Option<&'static str> {
        KNOWN_RED.iter().find(|(id, _)| *id == self.id).map(|(_, why)| *why)
    }

    /// The outcome matches the recorded one.
    pub fn as_expected(&self) -> bool {
        self.passed() != self.known_red().is_some()
    }

    /// One summary line.
    pub fn line(&self) -> String {
        let verdict = if self.passed() { "PASS" } else { "FAIL" };
        let note = match (self.passed(), self.known_red()) {
            (false, Some(why)) => format!(" [known red: {why}]"),
            (true, Some(_)) => " [UNEXPECTED PASS]".to_string(),
            (false, None) => " [UNEXPECTED FAIL]".to_string(),
            (true, None) => String::new(),
        };
        format!("criterion {} {}: {} ({:.1} s){}", self.id, verdict, self.title, self.seconds, note)
    }
}

/// Titles of the criteria, by number.
pub const TITLES: [&str; 9] = [
    "symbol-oracle spectrum",
    "thresholds and critical points",
    "coefficient-table integrity",
    "commutator identity, intertwining and adjointness",
    "Mourre positivity and threshold degeneration",
    "perturbed stability",
    "LAP contrast",
    "dynamics",
    "hypothesis checkers",
];

const BUDGETS: [Option<f64>; 9] = [Some(30.0), None, Some(5.0), None, Some(120.0), None, Some(300.0), Some(600.0), None];

/// Runs one criterion (1 to 9).
pub fn run_criterion(id: u8) -> CriterionResult {
    let t0 = Instant::now();
    let out = match id {
        1 => spectrum_oracle(),
        2 => thresholds_and_critical_points(),
        3 => table_integrity(),
        4 => commutator_identities(),
        5 => mourre_positivity(),
        6 => perturbed_stability(),
        7 => lap_contrast(),
        8 => dynamics(),
        9 => hypothesis_checkers(),
        _ => Err(crate::HexError::InvalidArgument(format!("no criterion {id}"))),
    };
    let seconds = t0.elapsed().as_secs_f64();
    let idx = (id.clamp(1, 9) - 1) as usize;
    let (checks, error) = match out {
        Ok(c) => (c, None),
        Err(e) => (Vec::new(), Some(e.to_string())),
    };
    CriterionResult {
        id,
        title: TITLES[idx].to_string(),
        checks,
        seconds,
        budget_seconds: BUDGETS[idx],
        error,
    }
}

/// Runs all nine criteria in order, calling `report` after each.
pub fn run_all(mut report: impl FnMut(&CriterionResult)) -> Vec<CriterionResult> {
    (1..=9)
        .map(|id| {
            let r = run_criterion(id);
            report(&r);
            r
        })
        .collect()
}

/// Full printable report of one criterion: the summary line and one line per check.
pub fn render(r: &CriterionResult) -> String {
    let mut s = r.line();
    for c in &r.checks {
        let tag = match (c.gating, c.pass) {
            (false, _) => "info",
            (true, true) => "ok",
            (true, false) => "FAIL",
        };
        s.push_str(&format!("\n    [{tag}] {}: {}", c.name, c.value));
    }
    if let Some(b) = r.budget_seconds {
        s.push_str(&format!("\n    [{}] runtime budget: {:.1} s of {b} s", if r.seconds <= b { "ok" } else { "FAIL" }, r.seconds));
    }
    if let Some(e) = &r.error {
        s.push_str(&format!("\n    [FAIL] error: {e}"));
    }
    s
}

fn spectrum_oracle() -> Result<Vec<Check>> {
    let mut out = Vec::new();
    for n in [8usize, 16, 32] {
        let h = free_hamiltonian(&TruncationBox::new(n, Boundary::Periodic));
        let ev = dense_spectrum(&h)?;
        let oracle = periodic_spectrum(n);
        let err = ev.iter().zip(&oracle).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        out.push(check(&format!("N = {n} multiset mismatch"), err < 1e-10, format!("{err:.2e}")));
    }
    Ok(out)
}

fn thresholds_and_critical_points() -> Result<Vec<Check>> {
    let t = thresholds();
    let want = [-1.0, -1.0 / 3.0, 0.0, 1.0 / 3.0, 1.0];
    let exact = t.len() == 5 && t.iter().zip(&want).all(|(a, b)| (a - b).abs() < 1e-15);
    let (pts, values) = critical_points();
    let grad = pts
        .iter()
        .map(|p| {
            let g = grad_sqrt_beta(p.x);
            g[0].hypot(g[1])
        })
        .fold(0.0, f64::max);
    Ok(vec![
        check("thresholds", exact, format!("{t:?}")),
        check("critical point count", pts.len() == 9, pts.len().to_string()),
        check("max |grad sqrt(beta)| on critical points", grad < 1e-10, format!("{grad:.2e}")),
        check("critical values", values == vec![1.0, 3.0], format!("{values:?}")),
    ])
}

fn table_integrity() -> Result<Vec<Check>> {
    let alpha = alpha_tables();
    let fams = build_index_sets(&alpha);
    let reports: Vec<_> = fams.iter().map(verify_structure).collect();
    let expansion = self_check(&alpha);
    let i9: Vec<_> = reports.iter().filter(|r| !r.i9_empty()).map(|r| format!("{:?}: {:?}", r.l, r.i9)).collect();
    let incl: Vec<_> = reports
        .iter()
        .filter(|r| !r.point3_inclusion())
        .map(|r| format!("{:?}: {:?}", r.l, r.point3_inclusion_failures))
        .collect();
    let ids = verify_sum_identities(&alpha, &fams);
    let golden = golden_check(&alpha);
    let sweep = mutation_sweep(&alpha);
    let p1: Vec<_> = reports.iter().filter(|r| !r.point1()).map(|r| format!("{:?}: {:?}", r.l, r.point1_failures)).collect();
    let p2: Vec<_> = reports.iter().filter(|r| !r.point2()).map(|r| format!("{:?}: {:?}", r.l, r.point2_failures)).collect();
    Ok(vec![
        check(
            "expansion reproduces the reference tables",
            expansion.is_ok(),
            expansion.err().map_or("exact".into(), |e| e.to_string()),
        ),
        check("I9 empty for all four labels", i9.is_empty(), if i9.is_empty() { "yes".into() } else { i9.join("; ") }),
        check(
            "point-3 inclusion",
            incl.is_empty(),
            if incl.is_empty() { "holds".into() } else { format!("fails at {}", incl.join("; ")) },
        ),
        check(
            "identities Q1/Q2/Q3/Q9 exact",
            ids.is_ok(),
            ids.map_or_else(|e| e.to_string(), |r| format!("{} rows", r.len())),
        ),
        check(
            "regenerated S tables vs transcription (after logged errata)",
            golden.is_ok(),
            golden.err().map_or("zero diffs".into(), |e| e.to_string()),
        ),
        check(
            "single-entry mutation sweep",
            sweep.detected == sweep.mutations,
            format!("{}/{} detected", sweep.detected, sweep.mutations),
        ),
        info("point 1", if p1.is_empty() { "holds".into() } else { format!("fails at {}", p1.join("; ")) }),
        info("point 2", if p2.is_empty() { "holds".into() } else { format!("fails at {}", p2.join("; ")) }),
        info("chain inclusions", reports.iter().all(|r| r.chains_hold).to_string()),
    ])
}

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

fn commutator_identities() -> Result<Vec<Check>> {
    let m = 128;
    let mut scalar: f64 = 0.0;
    for (k1, k2) in [(0, 0), (1, 0), (0, 1), (1, 2), (-2, 3), (3, -1)] {
        scalar = scalar.max(commutator_symbol_defect(&TorusGrid::sample(m, plane_wave(k1, k2))));
    }
    let mixed = TorusGrid::sample(m, |x| plane_wave(1, -1)(x) * 0.7 + plane_wave(-2, 0)(x) * Complex64::new(0.0, 0.4));
    scalar = scalar.max(commutator_symbol_defect(&mixed));
    let matrix = matrix_commutator_defect(&[
        TorusGrid::sample(m, plane_wave(1, 0)),
        TorusGrid::sample(m, |x| plane_wave(0, -2)(x) * 0.5 + plane_wave(1, 1)(x)),
    ]);
    let op = ConjugateOperator::canonical();
    let b = TruncationBox::centered(24, Boundary::Dirichlet);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut xs: Vec<Momentum> = (0..60)
        .map(|_| Momentum::raw(rng.gen_range(-PI..PI), rng.gen_range(-PI..PI)))
        .collect();
    xs.extend(crate::symbol::dirac_points());
    let mut inter: f64 = 0.0;
    for seed in 0..3 {
        inter = inter.max(intertwining_defect(&op, &interior_field(&b, seed, 4), &b, &xs)?);
    }
    let b = TruncationBox::centered(20, Boundary::Dirichlet);
    let mut adj: f64 = 0.0;
    for seed in 0..5 {
        let f = interior_field(&b, 100 + seed, 5);
        let g = interior_field(&b, 200 + seed, 5);
        let af = conjugate_position_apply(&op, &f, &b)?;
        let ag = conjugate_position_apply(&op, &g, &b)?;
        let (l, r) = (dot(&g, &af), dot(&ag, &f));
        adj = adj.max((l - r).norm() / (1.0 + l.norm()));
    }
    Ok(vec![
        check("scalar commutator defect at M = 128", scalar < 1e-8, format!("{scalar:.2e}")),
        check("matrix commutator defect at M = 128", matrix < 1e-8, format!("{matrix:.2e}")),
        check("position/Fourier intertwining defect", inter < 1e-8, format!("{inter:.2e}")),
        check("adjointness defect", adj < 1e-10, format!("{adj:.2e}")),
    ])
}

fn mourre_positivity() -> Result<Vec<Check>> {
    let interval = EnergyInterval::new(0.5, 0.9, 0.05)?;
    let r = mourre_check(&laplacian_hex(), &ConjugateOperator::canonical(), 32, &interval, 512)?;
    let deg = threshold_degeneration(&[0.2, 0.1, 0.05, 0.025], 0.9, 512)?;
    let mono = deg.windows(2).all(|w| w[1] < w[0]);
    Ok(vec![
        check("c_symbol > 0 at M = 512", r.c_symbol > 0.0, format!("{:.4}", r.c_symbol)),
        check(
            "projected commutator minimum >= 0.5 c_symbol at N = 32",
            r.passes(0.5),
            format!("{:.4} (rank {})", r.c_matrix, r.rank),
        ),
        check(
            "c_symbol decreasing toward 1/3 at d = 0.2, 0.1, 0.05, 0.025",
            mono,
            format!("{:?}", deg.iter().map(|v| format!("{v:.4}")).collect::<Vec<_>>()),
        ),
    ])
}

/// Margin beyond `[-1, 1]` for counting discrete eigenvalues. It exceeds the
/// band-edge smearing of the smallest box, so weakly bound states that separate
/// from the band only on larger boxes are not counted.
pub const OUTLIER_MARGIN: f64 = 0.01;

fn perturbed_stability() -> Result<Vec<Check>> {
    let g = GoldenProfile::default();
    let (mf, v) = (g.metric(), g.potential());
    let spectra: Vec<Vec<f64>> = [16usize, 32]
        .iter()
        .map(|&n| dense_spectrum(&hamiltonian(&mf, &v, &TruncationBox::centered(n, Boundary::Dirichlet))))
        .collect::<Result<_>>()?;
    let counts: Vec<usize> = spectra.iter().map(|ev| outlier_count(ev, OUTLIER_MARGIN)).collect();
    let tops: Vec<String> = spectra
        .iter()
        .map(|ev| format!("{:?}", ev[ev.len() - 3..].iter().map(|e| format!("{e:.5}")).collect::<Vec<_>>()))
        .collect();
    let b = TruncationBox::centered(16, Boundary::Dirichlet);
    let gt = gauge_transform(&mf, &b);
    let wl = assemble(&weighted_laplacian(&mf), &b, false);
    let td = assemble(&tilde_delta(&mf), &b, true);
    let (mut unit, mut conj): (f64, f64) = (0.0, 0.0);
    for k in 0..20 {
        let f = random_cvec(b.dim(), k);
        let h = random_cvec(b.dim(), 1000 + k);
        let lhs = gt.weighted_dot(&gt.apply(&f), &gt.apply(&h));
        let rhs = dot(&f, &h);
        unit = unit.max((lhs - rhs).norm() / (1.0 + rhs.norm()));
        let a = gt.apply_inverse(&wl.apply(&gt.apply(&f)));
        conj = conj.max(max_abs_diff(&a, &td.apply(&f)) / norm(&f));
    }
    let pd = perturbation_di(&mf);
    let rows: Vec<f64> = [2i64, 4, 8, 16, 32]
        .iter()
        .map(|&r| pd.d[0].row_norm(LatticeSite::new(r, 0, SublatticeTag::P1)).max(pd.d[1].row_norm(LatticeSite::new(r, 0, SublatticeTag::P2))))
        .collect();
    let decays = rows.windows(2).all(|w| w[1] < w[0]);
    let interval = EnergyInterval::new(0.5, 0.9, 0.05)?;
    let sweep = theta_sweep(&mf, &v, &[1.0, 0.5, 0.25, 0.125, 0.0], 16, &interval)?;
    let target = sweep.last().map(|p| p.c_matrix).unwrap_or(0.0);
    let mono = approaches_monotonically(&sweep, target, 1e-9);
    Ok(vec![
        check(
            "outlier count outside [-1.01, 1.01] stable from N = 16 to 32",
            counts[0] == counts[1],
            format!("{counts:?}"),
        ),
        info("three largest eigenvalues at N = 16 and 32", tops.join(" / ")),
        check("gauge transform unitarity defect", unit < 1e-12, format!("{unit:.2e}")),
        check("conjugation identity defect", conj < 1e-12, format!("{conj:.2e}")),
        check(
            "D_i row norms decrease along (r, 0), r = 2..32",
            decays,
            format!("{:?}", rows.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()),
        ),
        check(
            "theta sweep approaches the unperturbed constant monotonically",
            mono,
            format!("{:?}", sweep.iter().map(|p| format!("{}:{:.4}", p.theta, p.c_matrix)).collect::<Vec<_>>()),
        ),
    ])
}

fn lap_contrast() -> Result<Vec<Check>> {
    let n = 48;
    let s = 0.6;
    let h = free_hamiltonian(&TruncationBox::centered(n, Boundary::Dirichlet));
    let rhos = rho_sweep(RHO_START, rho_floor(n));
    let mut out = Vec::new();
    let mut growth_regular: f64 = 0.0;
    let mut growth_critical = f64::INFINITY;
    for (lam, regular) in [(0.5, true), (0.6, true), (0.7, true), (1.0 / 3.0 - 0.01, false), (1.0 / 3.0 + 0.01, false)] {
        let c = resolvent_curve(&h, lam, s, &rhos)?;
        let gr = last_step_growth(&c.rho, &c.norms);
        if regular {
            growth_regular = growth_regular.max(gr);
        } else {
            growth_critical = growth_critical.min(gr);
        }
        let curve = c.norms.iter().map(|v| format!("{v:.3}")).collect::<Vec<_>>().join(", ");
        let label = if regular { "levels off" } else { "keeps growing" };
        out.push(check(
            &format!("lambda = {lam:.4} {label}"),
            c.plateau == regular,
            format!("growth per halving at the floor {:.1}%, norms [{curve}]", 100.0 * gr),
        ));
    }
    out.push(info(
        "growth ratio near-threshold / regular at the floor",
        format!("{:.2}", growth_critical / growth_regular),
    ));
    Ok(out)
}

fn dynamics() -> Result<Vec<Check>> {
    let h48 = free_hamiltonian(&TruncationBox::centered(48, Boundary::Dirichlet));
    let f = delta(&h48.bbox, origin())?;
    let mut unit: f64 = 0.0;
    for t in [1.0, 10.0, 50.0, 100.0] {
        unit = unit.max((norm(&evolve(&h48, &f, t)) - 1.0).abs());
    }
    let h96 = free_hamiltonian(&TruncationBox::centered(96, Boundary::Dirichlet));
    let f = delta(&h96.bbox, origin())?;
    let ret = boundary_return_time(&h96.bbox);
    let rec = propagation_integral(&h96, 0.5, 0.9, &f, 0.6, 200.0, 0.5)?;
    let trace = pointwise_decay(&h96, &f, origin(), 0.5, 80.0)?;
    let early = trace.amplitude[0];
    let late = trace.window_max(60.0, 80.0);
    Ok(vec![
        check("unitarity defect up to t = 100 (N = 48)", unit < 1e-8, format!("{unit:.2e}")),
        check(
            "propagation integral horizon before boundary return (N = 96)",
            rec.horizon < ret,
            format!("T = {} < {ret:.0}", rec.horizon),
        ),
        check(
            "last-quarter share of the propagation integral",
            rec.saturated,
            format!("{:.2}% of {:.4} (projected mass {:.4})", 100.0 * rec.tail_share(), rec.total(), rec.projected_mass),
        ),
        check(
            "pointwise trace at the origin: late max / initial",
            late < 0.2 * early,
            format!("{:.4} over t in [60, 80]", late / early),
        ),
    ])
}

fn hypothesis_checkers() -> Result<Vec<Check>> {
    let g = GoldenProfile::default();
    let basic = check_basic(&g.metric(), &g.potential(), 64);
    let eta = check_h3k(&tuple_of_site(g.metric().eta.clone()), 1, 0.5, 64);
    let v = check_h3k(&tuple_of_site(g.potential().v.clone()), 1, 0.5, 64);
    let eps = check_h3k(&tuple_of_edge(g.metric().eps.clone()), 2, 0.5, 64);
    let alt = check_h3k(&tuple_of_site(ProfileShape::alternating(1.0, 0.5).site_fn()), 1, 0.5, 64);
    use SublatticeTag::*;
    let p = LatticeSite::new;
    let units = j_map(1, 1, 1, p(4, 7, P1)) == vec![p(5, 7, P2)]
        && j_map(2, 2, 0, p(4, 7, P1)) == vec![p(4, 7, P2), p(4, 7, P1)]
        && j_map(1, 2, 1, p(0, 0, P2)) == vec![p(0, -1, P1)]
        && j_map(1, 0, 9, p(-2, 5, P2)) == j_map(1, 0, 0, p(-2, 5, P2));
    let vf = g.potential().v.clone();
    let mut displays = true;
    for (n1, n2) in [(0, 0), (3, -4), (-7, 2), (20, 11)] {
        displays &= first_display_difference(&vf, 1, n1, n2) == vf(p(n1 + 1, n2, P1)) - vf(p(n1, n2, P2));
        displays &= second_display_difference(&vf, 2, n1, n2) == vf(p(n1, n2 - 1, P1)) - vf(p(n1, n2, P2));
    }
    Ok(vec![
        check("golden profile H0/H1/H2 at R = 64", basic.passes(), format!("h0 {} h1 {} h2 {}", basic.h0, basic.h1, basic.h2)),
        check("golden eta H31/H32 trends", eta.consistent(), format!("sup {:.3e} / {:.3e}", eta.first.sup, eta.second.sup)),
        check("golden V H31/H32 trends", v.consistent(), format!("sup {:.3e} / {:.3e}", v.first.sup, v.second.sup)),
        check("golden epsilon H31/H32 trends (k = 2)", eps.consistent(), format!("sup {:.3e} / {:.3e}", eps.first.sup, eps.second.sup)),
        check("alternating counter-profile fails", !alt.consistent(), format!("consistent = {}", alt.consistent())),
        check("J map unit examples", units, units.to_string()),
        check("worked V differences for the golden V", displays, displays.to_string()),
        info("first display for tag-dependent V", "matches only with the sublattice tags exchanged (see ERRATA.md)"),
    ])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_criteria_pass() {
        for id in [1, 2, 4, 9] {
            let r = run_criterion(id);
            assert!(r.passed(), "{}", render(&r));
        }
    }

    #[test]
    fn unknown_criterion_is_an_error() {
        let r = run_criterion(12);
        assert!(r.error.is_some() && !r.passed());
    }

    #[test]
    fn known_red_bookkeeping() {
        let r = CriterionResult {
            id: 7,
            title: "x".into(),
            checks: vec![check("a", false, "")],
            seconds: 0.0,
            budget_seconds: None,
            error: None,
        };
        assert!(r.as_expected());
        assert!(r.line().contains("known red"));
        let ok = CriterionResult { id: 1, checks: vec![check("a", true, ""), info("b", "")], ..r };
        assert!(ok.passed() && ok.as_expected());
    }
}
