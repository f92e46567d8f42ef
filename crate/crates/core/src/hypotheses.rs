//! Windowed checks of the decay hypotheses on the metric and potential, and
//! the canonical perturbation profiles.
//!
//! A function `G` of `k` sites satisfies the long-range hypothesis `H3_k` if
//! `Lambda^gamma(n) <n1 l1 - n2 l2> |G(J_{k,h,1}(n, p1)) - G(J_{k,h,0}(n, p2))|`
//! stays bounded. On a finite window a sup cannot be certified, so every
//! checker reports the maxima over eight square annuli and a trend verdict:
//! the maxima must be non-increasing over the outer half of the window and
//! never exceed ten times the innermost maximum.

use crate::conjugate::{japanese, lambda};
use crate::lattice::{neighbors, LatticeSite, SublatticeTag};
use crate::operators::{EdgeFn, MetricField, PotentialField, SiteFn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// Number of annuli in a trend.
pub const ANNULI: usize = 8;

/// Allowed growth of any annulus maximum relative to the innermost one.
pub const INNER_FACTOR: f64 = 10.0;

/// Shape of a perturbation profile.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileKind {
    /// `a Lambda(n)^{-delta}`.
    PowerLaw,
    /// `a (1 - (Lambda/delta)^2)^2` inside `Lambda < delta`, zero outside.
    CompactBump,
    /// `a (-1)^{n1} Lambda(n)^{-delta}`; with `delta = 0` this is the alternating counter-profile.
    Oscillatory,
}

/// A site profile, identical on both sublattices.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileShape {
    pub kind: ProfileKind,
    pub a: f64,
    pub delta: f64,
    pub gamma: f64,
    /// Recorded with every report; the built-in kinds are deterministic.
    #[serde(default)]
    pub seed: u64,
}

impl ProfileShape {
    /// Power law with the default exponent `delta = 1 + gamma + 0.1`.
    pub fn golden(a: f64, gamma: f64) -> Self {
        Self {
            kind: ProfileKind::PowerLaw,
            a,
            delta: 1.0 + gamma + 0.1,
            gamma,
            seed: 0,
        }
    }

    /// `(-1)^{n1}` with amplitude `a`.
    pub fn alternating(a: f64, gamma: f64) -> Self {
        Self {
            kind: ProfileKind::Oscillatory,
            a,
            delta: 0.0,
            gamma,
            seed: 0,
        }
    }

    /// Value at a cell.
    pub fn value(&self, n1: i64, n2: i64) -> f64 {
        let l = lambda(n1, n2);
        match self.kind {
            ProfileKind::PowerLaw => self.a * l.powf(-self.delta),
            ProfileKind::CompactBump => {
                if l < self.delta {
                    let r = l / self.delta;
                    self.a * (1.0 - r * r).powi(2)
                } else {
                    0.0
                }
            }
            ProfileKind::Oscillatory => {
                let s = if n1.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                self.a * s * l.powf(-self.delta)
            }
        }
    }

    /// The profile as a site function.
    pub fn site_fn(&self) -> SiteFn {
        let p = *self;
        Arc::new(move |s: LatticeSite| p.value(s.n1, s.n2))
    }
}

/// The blessed perturbation: power-law `eta` and `V`, and
/// `epsilon(s, t) = eps_factor (eta(s) + eta(t)) / 2`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GoldenProfile {
    pub eta: ProfileShape,
    pub v: ProfileShape,
    pub eps_factor: f64,
}

impl Default for GoldenProfile {
    fn default() -> Self {
        Self {
            eta: ProfileShape::golden(0.3, 0.5),
            v: ProfileShape::golden(0.3, 0.5),
            eps_factor: 0.5,
        }
    }
}

impl GoldenProfile {
    /// Metric field `(eta, epsilon)`.
    pub fn metric(&self) -> MetricField {
        let eta = self.eta.site_fn();
        let e2 = eta.clone();
        let c = self.eps_factor;
        let eps: EdgeFn = Arc::new(move |s, t| c * 0.5 * (e2(s) + e2(t)));
        MetricField::new(eta, eps)
    }

    /// Potential field.
    pub fn potential(&self) -> PotentialField {
        PotentialField::new(self.v.site_fn())
    }
}

/// A function of `k` sites.
pub type TupleFn = Arc<dyn Fn(&[LatticeSite]) -> f64 + Send + Sync>;

/// Lifts a site function (`k = 1`).
pub fn tuple_of_site(f: SiteFn) -> TupleFn {
    Arc::new(move |t: &[LatticeSite]| f(t[0]))
}

/// Lifts an edge function (`k = 2`).
pub fn tuple_of_edge(f: EdgeFn) -> TupleFn {
    Arc::new(move |t: &[LatticeSite]| f(t[0], t[1]))
}

/// `J_{k,h,b}`: the first entry is `(n1 - (-1)^i b [h = 1], n2 - (-1)^i b [h = 2])`
/// on the other sublattice (so `P1` shifts by `+b` and `P2` by `-b`), followed
/// by `k - 1` copies of the input site.
pub fn j_map(k: usize, h: u8, b: i64, site: LatticeSite) -> Vec<LatticeSite> {
    assert!(k >= 1 && h <= 2, "J map needs k >= 1 and h in {{0, 1, 2}}");
    let sign = match site.tag {
        SublatticeTag::P1 => 1,
        SublatticeTag::P2 => -1,
    };
    let d1 = if h == 1 { sign * b } else { 0 };
    let d2 = if h == 2 { sign * b } else { 0 };
    let mut out = vec![LatticeSite::new(site.n1 + d1, site.n2 + d2, site.tag.other())];
    out.extend(std::iter::repeat(site).take(k - 1));
    out
}

/// Annulus maxima and the verdict for one windowed quantity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trend {
    /// Sup over the whole window.
    pub sup: f64,
    /// Maxima over the square annuli, innermost first.
    pub annuli: Vec<f64>,
    /// Trend verdict (see [`finite_trend`]).
    pub consistent: bool,
}

/// Non-increasing over the outer half and bounded by [`INNER_FACTOR`] times the innermost maximum.
pub fn finite_trend(annuli: &[f64]) -> bool {
    let tol = 1e-12 * annuli.iter().cloned().fold(0.0, f64::max).max(1e-300);
    let half = annuli.len() / 2;
    let outer_ok = annuli[half..].windows(2).all(|w| w[1] <= w[0] + tol);
    let inner = annuli[0];
    outer_ok && annuli.iter().all(|&m| m <= INNER_FACTOR * inner + tol)
}

/// Non-increasing throughout and ending at no more than half the first maximum (or identically zero).
pub fn vanishing_trend(annuli: &[f64]) -> bool {
    let first = annuli[0];
    let tol = 1e-12 * first.max(1e-300);
    annuli.windows(2).all(|w| w[1] <= w[0] + tol) && (first == 0.0 || *annuli.last().unwrap() <= 0.5 * first)
}

fn annulus_of(n1: i64, n2: i64, radius: i64) -> usize {
    let r = n1.abs().max(n2.abs());
    ((r as usize * ANNULI) / (radius as usize + 1)).min(ANNULI - 1)
}

/// Maxima of `q` over the annuli of the window `|n1|, |n2| <= radius`.
pub fn window_trend<F: Fn(i64, i64) -> f64 + Sync>(radius: i64, q: F, verdict: fn(&[f64]) -> bool) -> Trend {
    let annuli = (-radius..=radius)
        .into_par_iter()
        .map(|n1| {
            let mut acc = vec![0.0f64; ANNULI];
            for n2 in -radius..=radius {
                let a = annulus_of(n1, n2, radius);
                acc[a] = acc[a].max(q(n1, n2));
            }
            acc
        })
        .reduce(|| vec![0.0; ANNULI], |a, b| a.iter().zip(&b).map(|(x, y)| x.max(*y)).collect());
    Trend {
        sup: annuli.iter().cloned().fold(0.0, f64::max),
        consistent: verdict(&annuli),
        annuli,
    }
}

/// Largest weight `Lambda^gamma(n) <n1 l1 - n2 l2>` over `(l1, l2)`.
pub fn long_range_weight(n1: i64, n2: i64, gamma: f64) -> f64 {
    let w = [0, n1, -n2, n1 - n2]
        .iter()
        .map(|&v| japanese(v as f64))
        .fold(0.0, f64::max);
    lambda(n1, n2).powf(gamma) * w
}

/// Report for one long-range hypothesis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub id: String,
    pub k: usize,
    pub gamma: f64,
    pub radius: i64,
    /// First display: `G(J_{k,h,1}(n, p1)) - G(J_{k,h,0}(n, p2))`.
    pub first: Trend,
    /// Second display: tags exchanged.
    pub second: Trend,
}

impl HypothesisReport {
    /// Both displays show a finite trend.
    pub fn consistent(&self) -> bool {
        self.first.consistent && self.second.consistent
    }
}

fn p(n1: i64, n2: i64, tag: SublatticeTag) -> LatticeSite {
    LatticeSite::new(n1, n2, tag)
}

/// Windowed `H3_k` check evaluating both displays.
pub fn check_h3k(g: &TupleFn, k: usize, gamma: f64, radius: i64) -> HypothesisReport {
    assert!(radius >= 8, "H3 window radius must be at least 8");
    let display = |from: SublatticeTag| {
        window_trend(
            radius,
            |n1, n2| {
                let d = (1..=2u8)
                    .map(|h| (g(&j_map(k, h, 1, p(n1, n2, from))) - g(&j_map(k, h, 0, p(n1, n2, from.other())))).abs())
                    .fold(0.0, f64::max);
                long_range_weight(n1, n2, gamma) * d
            },
            finite_trend,
        )
    };
    HypothesisReport {
        id: format!("H3_{k}"),
        k,
        gamma,
        radius,
        first: display(SublatticeTag::P1),
        second: display(SublatticeTag::P2),
    }
}

/// Windowed checks of the basic hypotheses on `eta`, `epsilon` and `V`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasicReport {
    pub radius: i64,
    pub inf_eta: f64,
    pub inf_eps: f64,
    pub eta: Trend,
    pub eps: Trend,
    pub v: Trend,
    pub h0: bool,
    pub h1: bool,
    pub h2: bool,
}

impl BasicReport {
    /// All three hypotheses pass.
    pub fn passes(&self) -> bool {
        self.h0 && self.h1 && self.h2
    }
}

const TAGS: [SublatticeTag; 2] = [SublatticeTag::P1, SublatticeTag::P2];

/// Infima of `eta` and `epsilon` (over lattice edges) and the decay trends of `|eta|`, `|epsilon|`, `|V|`.
pub fn check_basic(mf: &MetricField, v: &PotentialField, radius: i64) -> BasicReport {
    let mut inf_eta = f64::INFINITY;
    let mut inf_eps = f64::INFINITY;
    for n1 in -radius..=radius {
        for n2 in -radius..=radius {
            for tag in TAGS {
                let s = p(n1, n2, tag);
                inf_eta = inf_eta.min((mf.eta)(s));
                for t in neighbors(s) {
                    inf_eps = inf_eps.min((mf.eps)(s, t));
                }
            }
        }
    }
    let eta = window_trend(
        radius,
        |n1, n2| TAGS.iter().map(|&t| (mf.eta)(p(n1, n2, t)).abs()).fold(0.0, f64::max),
        vanishing_trend,
    );
    let eps = window_trend(
        radius,
        |n1, n2| {
            TAGS.iter()
                .flat_map(|&t| neighbors(p(n1, n2, t)).map(|u| (mf.eps)(p(n1, n2, t), u).abs()))
                .fold(0.0, f64::max)
        },
        vanishing_trend,
    );
    let vt = window_trend(
        radius,
        |n1, n2| TAGS.iter().map(|&t| (v.v)(p(n1, n2, t)).abs()).fold(0.0, f64::max),
        vanishing_trend,
    );
    BasicReport {
        radius,
        inf_eta,
        inf_eps,
        h0: inf_eta > -1.0 && eta.consistent,
        h1: inf_eps > -1.0 && eps.consistent,
        h2: vt.consistent,
        eta,
        eps,
        v: vt,
    }
}

/// Reports for the derived hypotheses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DerivedReport {
    pub k: usize,
    pub gamma: f64,
    pub radius: i64,
    pub h3: HypothesisReport,
    pub h4: Trend,
    pub h5: Trend,
    pub h6: Trend,
    /// `max |G(J_{k,h,b}(n, p_j))|` over the probe cells at the ray lengths [`RAY_LENGTHS`].
    pub h7_rays: Vec<f64>,
    pub h7: bool,
    pub h8: Trend,
    /// `(3 + (2 sqrt 2)^gamma / gamma) max(H3 sup, H6 sup)`.
    pub h8_bound: f64,
    pub h8_within_bound: bool,
}

impl DerivedReport {
    /// Every derived quantity shows a finite trend and the telescoping bound holds.
    pub fn all_finite(&self) -> bool {
        self.h4.consistent && self.h5.consistent && self.h6.consistent && self.h8.consistent && self.h8_within_bound
    }
}

/// Ray lengths used for the vanishing-at-infinity probe.
pub const RAY_LENGTHS: [i64; 6] = [1, 4, 16, 64, 256, 1024];

/// The telescoping constant `3 + (2 sqrt 2)^gamma / gamma`.
pub fn telescoping_factor(gamma: f64) -> f64 {
    3.0 + (2.0 * 2f64.sqrt()).powf(gamma) / gamma
}

/// Windowed evaluation of the derived hypotheses.
pub fn check_derived(g: &TupleFn, k: usize, gamma: f64, radius: i64) -> DerivedReport {
    let h3 = check_h3k(g, k, gamma, radius);
    let j0 = |h: u8, n1: i64, n2: i64, t: SublatticeTag| g(&j_map(k, h, 0, p(n1, n2, t)));
    let j1 = |h: u8, n1: i64, n2: i64, t: SublatticeTag| g(&j_map(k, h, 1, p(n1, n2, t)));
    let h4 = window_trend(
        radius,
        |n1, n2| {
            let d = (1..=2u8)
                .map(|h| (j0(h, n1, n2, SublatticeTag::P1) - j0(h, n1, n2, SublatticeTag::P2)).abs())
                .fold(0.0, f64::max);
            long_range_weight(n1, n2, gamma) * d
        },
        finite_trend,
    );
    let h5 = window_trend(
        radius,
        |n1, n2| {
            let mut d: f64 = 0.0;
            for i in TAGS {
                let j = i.other();
                let sj = if j == SublatticeTag::P1 { -1 } else { 1 };
                for h in 1..=2u8 {
                    let hp = 3 - h;
                    let (m1, m2) = (n1 - sj * (hp == 1) as i64, n2 - sj * (hp == 2) as i64);
                    d = d.max((j0(h, n1, n2, i) - j1(h, m1, m2, j)).abs());
                }
            }
            long_range_weight(n1, n2, gamma) * d
        },
        finite_trend,
    );
    let h6 = window_trend(
        radius,
        |n1, n2| {
            let mut d: f64 = 0.0;
            for i in TAGS {
                for h in 1..=2u8 {
                    d = d.max((j0(h, n1, n2, i) - j1(h, n1, n2, i)).abs());
                }
            }
            long_range_weight(n1, n2, gamma) * d
        },
        finite_trend,
    );
    let probes = [(0, 0), (3, -2), (-5, 7)];
    let h7_rays: Vec<f64> = RAY_LENGTHS
        .iter()
        .map(|&b| {
            let mut m: f64 = 0.0;
            for &(n1, n2) in &probes {
                for t in TAGS {
                    for h in 1..=2u8 {
                        m = m.max(g(&j_map(k, h, b, p(n1, n2, t))).abs());
                    }
                }
            }
            m
        })
        .collect();
    let h7 = h7_rays.windows(2).all(|w| w[1] <= w[0] + 1e-15) && *h7_rays.last().unwrap() <= 0.05 * h7_rays[0].max(1e-300);
    let h8 = window_trend(
        radius,
        |n1, n2| {
            let d = TAGS
                .iter()
                .flat_map(|&t| (1..=2u8).map(move |h| (t, h)))
                .map(|(t, h)| j0(h, n1, n2, t).abs())
                .fold(0.0, f64::max);
            lambda(n1, n2).powf(gamma) * d
        },
        finite_trend,
    );
    let h8_bound = telescoping_factor(gamma) * h3.first.sup.max(h3.second.sup).max(h6.sup);
    DerivedReport {
        k,
        gamma,
        radius,
        h8_within_bound: h8.sup <= h8_bound,
        h3,
        h4,
        h5,
        h6,
        h7_rays,
        h7,
        h8,
        h8_bound,
    }
}

/// Worked difference of the first display for `k = 1`:
/// `V(J_{1,h,1}(n, p1)) - V(J_{1,h,0}(n, p2))`.
pub fn first_display_difference(v: &SiteFn, h: u8, n1: i64, n2: i64) -> f64 {
    v(j_map(1, h, 1, p(n1, n2, SublatticeTag::P1))[0]) - v(j_map(1, h, 0, p(n1, n2, SublatticeTag::P2))[0])
}

/// Worked difference of the second display for `k = 1`:
/// `V(J_{1,h,1}(n, p2)) - V(J_{1,h,0}(n, p1))`.
pub fn second_display_difference(v: &SiteFn, h: u8, n1: i64, n2: i64) -> f64 {
    v(j_map(1, h, 1, p(n1, n2, SublatticeTag::P2))[0]) - v(j_map(1, h, 0, p(n1, n2, SublatticeTag::P1))[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use SublatticeTag::*;

    fn tagged_site_fn() -> SiteFn {
        Arc::new(|s: LatticeSite| (s.n1 as f64) * 0.37 + (s.n2 as f64) * 1.91 + if s.tag == P1 { 0.0 } else { 100.0 })
    }

    #[test]
    fn j_map_examples() {
        assert_eq!(j_map(1, 1, 1, p(4, 7, P1)), vec![p(5, 7, P2)]);
        assert_eq!(j_map(2, 2, 0, p(4, 7, P1)), vec![p(4, 7, P2), p(4, 7, P1)]);
        let s = p(-2, 5, P2);
        for h in 0..=2 {
            let j = j_map(3, h, 0, s);
            assert!(j.iter().all(|t| t.n1 == -2 && t.n2 == 5));
        }
        assert_eq!(j_map(1, 0, 9, s), j_map(1, 0, 0, s));
        assert_eq!(j_map(1, 2, 1, p(0, 0, P2)), vec![p(0, -1, P1)]);
    }

    #[test]
    fn worked_displays() {
        let v = tagged_site_fn();
        for (n1, n2) in [(0, 0), (3, -4), (-7, 2)] {
            // h = 2 matches the tag-exchanged display exactly.
            let shown = v(p(n1, n2 - 1, P1)) - v(p(n1, n2, P2));
            assert_eq!(second_display_difference(&v, 2, n1, n2), shown);
            // h = 1 matches the first display once the tags are exchanged.
            let shown = v(p(n1 + 1, n2, P1)) - v(p(n1, n2, P2));
            let literal = first_display_difference(&v, 1, n1, n2);
            assert_eq!(literal, v(p(n1 + 1, n2, P2)) - v(p(n1, n2, P1)));
            assert!((literal - shown).abs() > 1.0);
            let untagged: SiteFn = Arc::new(|s: LatticeSite| (s.n1 as f64) * 0.37 + (s.n2 as f64) * 1.91);
            let shown = untagged(p(n1 + 1, n2, P1)) - untagged(p(n1, n2, P2));
            assert_eq!(first_display_difference(&untagged, 1, n1, n2), shown);
        }
    }

    #[test]
    fn golden_profile_passes_long_range_checks() {
        let g = GoldenProfile::default();
        let v = check_h3k(&tuple_of_site(g.potential().v.clone()), 1, 0.5, 64);
        assert!(v.consistent(), "{v:?}");
        let eta = check_h3k(&tuple_of_site(g.metric().eta.clone()), 1, 0.5, 64);
        assert!(eta.consistent());
        let eps = check_h3k(&tuple_of_edge(g.metric().eps.clone()), 2, 0.5, 64);
        assert!(eps.consistent(), "{eps:?}");
    }

    #[test]
    fn constant_profile_has_zero_sup() {
        let c: SiteFn = Arc::new(|_| 0.7);
        let r = check_h3k(&tuple_of_site(c), 1, 0.5, 16);
        assert_eq!(r.first.sup, 0.0);
        assert_eq!(r.second.sup, 0.0);
        assert!(r.consistent());
    }

    #[test]
    fn alternating_profile_fails() {
        let alt = ProfileShape::alternating(1.0, 0.5);
        let r = check_h3k(&tuple_of_site(alt.site_fn()), 1, 0.5, 64);
        assert!(!r.first.consistent && !r.second.consistent);
        assert!(r.first.annuli.windows(2).all(|w| w[1] >= w[0]));
    }

    #[test]
    fn basic_checks() {
        let triv = check_basic(&MetricField::trivial(), &PotentialField::zero(), 16);
        assert!(triv.passes());
        assert_eq!((triv.inf_eta, triv.inf_eps, triv.eta.sup, triv.v.sup), (0.0, 0.0, 0.0, 0.0));
        let soft = MetricField::new(Arc::new(|s: LatticeSite| -0.5 / lambda(s.n1, s.n2)), Arc::new(|_, _| 0.0));
        assert!(check_basic(&soft, &PotentialField::zero(), 16).h0);
        let bad = MetricField::new(Arc::new(|_| -1.5), Arc::new(|_, _| 0.0));
        assert!(!check_basic(&bad, &PotentialField::zero(), 16).h0);
        let g = GoldenProfile::default();
        assert!(check_basic(&g.metric(), &g.potential(), 64).passes());
    }

    #[test]
    fn derived_checks_for_power_law() {
        let g = tuple_of_site(ProfileShape::golden(0.3, 0.5).site_fn());
        let d = check_derived(&g, 1, 0.5, 64);
        assert!(d.all_finite(), "{d:?}");
        assert!(d.h7);
        assert!(d.h4.sup <= 3.0 * d.h3.first.sup.max(d.h3.second.sup));
        let zero = check_derived(&tuple_of_site(Arc::new(|_| 0.0)), 1, 0.5, 16);
        assert_eq!((zero.h4.sup, zero.h5.sup, zero.h6.sup, zero.h8.sup), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn golden_edge_profile_does_not_vanish_along_rays() {
        let g = GoldenProfile::default();
        let d = check_derived(&tuple_of_edge(g.metric().eps.clone()), 2, 0.5, 32);
        assert!(!d.h7);
    }

    #[test]
    fn h4_is_not_controlled_by_h3_for_every_function() {
        // Constant along the classes linked by the H3 differences, alternating across them.
        let f = |s: i64| if s.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let g: SiteFn = Arc::new(move |s: LatticeSite| match s.tag {
            P1 => f(s.n1 + s.n2),
            P2 => f(s.n1 + s.n2 - 1),
        });
        let d = check_derived(&tuple_of_site(g), 1, 0.5, 16);
        assert_eq!(d.h3.first.sup, 0.0);
        assert_eq!(d.h3.second.sup, 0.0);
        assert!(d.h4.sup > 1.0);
    }

    #[test]
    fn window_monotone_in_radius() {
        let g = tuple_of_site(tagged_site_fn());
        let a = check_h3k(&g, 1, 0.5, 8);
        let b = check_h3k(&g, 1, 0.5, 16);
        assert!(a.first.sup <= b.first.sup && a.second.sup <= b.second.sup);
    }
}
