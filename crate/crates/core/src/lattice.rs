//! Hexagonal lattice geometry and truncation boxes.
//!
//! A site is a cell index `(n1, n2)` together with a sublattice tag. Its
//! Euclidean position is `p_tag + n1 v1 + n2 v2` with
//! `v1 = (3/2, sqrt(3)/2)`, `v2 = (0, sqrt(3))`, `p1 = (1/2, -sqrt(3)/2)` and
//! `p2 = (1, 0)`, so nearest neighbours sit at distance one.
//!
//! Flat layout inside a box of side `N` with lower corner `lo`:
//! `index = tag_offset + (n1 - lo) N + (n2 - lo)` where the tag offset is `0`
//! for `P1` and `N^2` for `P2`.

use crate::error::{HexError, Result};
use serde::{Deserialize, Serialize};

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Sublattice label of a site.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SublatticeTag {
    P1,
    P2,
}

impl SublatticeTag {
    /// The other sublattice.
    pub fn other(self) -> Self {
        match self {
            SublatticeTag::P1 => SublatticeTag::P2,
            SublatticeTag::P2 => SublatticeTag::P1,
        }
    }

    /// Offset vector of the sublattice inside a unit cell.
    pub fn offset(self) -> EuclideanPoint {
        match self {
            SublatticeTag::P1 => EuclideanPoint { x: 0.5, y: -SQRT3 / 2.0 },
            SublatticeTag::P2 => EuclideanPoint { x: 1.0, y: 0.0 },
        }
    }

    /// Short name used in error messages and CSV output.
    pub fn name(self) -> &'static str {
        match self {
            SublatticeTag::P1 => "P1",
            SublatticeTag::P2 => "P2",
        }
    }

    /// Component index in the two-component representation.
    pub fn component(self) -> usize {
        match self {
            SublatticeTag::P1 => 0,
            SublatticeTag::P2 => 1,
        }
    }
}

/// A vertex of the hexagonal lattice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LatticeSite {
    pub n1: i64,
    pub n2: i64,
    pub tag: SublatticeTag,
}

impl LatticeSite {
    /// Builds a site from its cell coordinates and tag.
    pub const fn new(n1: i64, n2: i64, tag: SublatticeTag) -> Self {
        Self { n1, n2, tag }
    }
}

/// A point of the plane in lattice units (nearest-neighbour distance one).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EuclideanPoint {
    pub x: f64,
    pub y: f64,
}

impl EuclideanPoint {
    /// Euclidean distance to another point.
    pub fn distance(&self, other: &EuclideanPoint) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// First lattice translation vector.
pub const V1: EuclideanPoint = EuclideanPoint { x: 1.5, y: SQRT3 / 2.0 };
/// Second lattice translation vector.
pub const V2: EuclideanPoint = EuclideanPoint { x: 0.0, y: SQRT3 };

/// Position of a site in the plane.
pub fn embed(site: LatticeSite) -> EuclideanPoint {
    let p = site.tag.offset();
    let (n1, n2) = (site.n1 as f64, site.n2 as f64);
    EuclideanPoint {
        x: p.x + n1 * V1.x + n2 * V2.x,
        y: p.y + n1 * V1.y + n2 * V2.y,
    }
}

/// Cell offsets of the three neighbours of a `P1` site; `P2` uses the negatives.
pub const P1_NEIGHBOR_OFFSETS: [(i64, i64); 3] = [(0, 0), (-1, 0), (0, -1)];

/// The three nearest neighbours of a site, all on the other sublattice.
pub fn neighbors(site: LatticeSite) -> [LatticeSite; 3] {
    let sign = match site.tag {
        SublatticeTag::P1 => 1,
        SublatticeTag::P2 => -1,
    };
    P1_NEIGHBOR_OFFSETS.map(|(d1, d2)| {
        LatticeSite::new(site.n1 + sign * d1, site.n2 + sign * d2, site.tag.other())
    })
}

/// Boundary condition of a truncation box.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    Periodic,
    Dirichlet,
}

/// A finite `N x N` block of cells with both sublattices, so `2 N^2` sites.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TruncationBox {
    pub size: usize,
    pub bc: Boundary,
    /// Lower corner: cells run over `lo..lo + size` in both directions.
    pub lo: i64,
}

impl TruncationBox {
    /// Box with cells `0..size`.
    pub fn new(size: usize, bc: Boundary) -> Self {
        assert!(size > 0, "box size must be positive");
        Self { size, bc, lo: 0 }
    }

    /// Box with cells `-size/2 .. size - size/2`, so the origin sits in the middle.
    pub fn centered(size: usize, bc: Boundary) -> Self {
        assert!(size > 0, "box size must be positive");
        Self {
            size,
            bc,
            lo: -((size / 2) as i64),
        }
    }

    /// Number of sites, `2 N^2`.
    pub fn dim(&self) -> usize {
        2 * self.size * self.size
    }

    /// Upper cell bound (exclusive).
    pub fn hi(&self) -> i64 {
        self.lo + self.size as i64
    }

    /// True when both cell coordinates lie in the box.
    pub fn contains(&self, n1: i64, n2: i64) -> bool {
        (self.lo..self.hi()).contains(&n1) && (self.lo..self.hi()).contains(&n2)
    }

    /// Distance in cells from `(n1, n2)` to the outside of the box.
    pub fn depth(&self, n1: i64, n2: i64) -> i64 {
        let d1 = (n1 - self.lo).min(self.hi() - 1 - n1);
        let d2 = (n2 - self.lo).min(self.hi() - 1 - n2);
        d1.min(d2)
    }

    fn wrap(&self, n: i64) -> i64 {
        self.lo + (n - self.lo).rem_euclid(self.size as i64)
    }

    /// Flat index of a site; periodic boxes wrap coordinates first.
    pub fn flat_index(&self, site: LatticeSite) -> Result<usize> {
        let (n1, n2) = match self.bc {
            Boundary::Periodic => (self.wrap(site.n1), self.wrap(site.n2)),
            Boundary::Dirichlet => {
                if !self.contains(site.n1, site.n2) {
                    return Err(HexError::OutOfBox {
                        n1: site.n1,
                        n2: site.n2,
                        tag: site.tag.name(),
                        size: self.size,
                    });
                }
                (site.n1, site.n2)
            }
        };
        let n = self.size;
        let offset = site.tag.component() * n * n;
        Ok(offset + (n1 - self.lo) as usize * n + (n2 - self.lo) as usize)
    }

    /// Flat index if the site maps into the box, `None` for Dirichlet sites outside it.
    pub fn try_index(&self, site: LatticeSite) -> Option<usize> {
        self.flat_index(site).ok()
    }

    /// Canonical site for a flat index.
    pub fn site(&self, index: usize) -> LatticeSite {
        let n = self.size;
        assert!(index < self.dim(), "index {index} out of range");
        let tag = if index < n * n {
            SublatticeTag::P1
        } else {
            SublatticeTag::P2
        };
        let r = index % (n * n);
        LatticeSite::new(self.lo + (r / n) as i64, self.lo + (r % n) as i64, tag)
    }

    /// All sites in flat-index order.
    pub fn sites(&self) -> impl Iterator<Item = LatticeSite> + '_ {
        (0..self.dim()).map(|k| self.site(k))
    }
}
