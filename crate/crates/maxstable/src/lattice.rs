//! Lattice geometry: sites of `Z^d` and finite observation windows.

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{MaxStableError, Result};

/// A site of the integer lattice `Z^d`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Site(pub Vec<i64>);

impl Site {
    /// Creates a site from coordinates.
    pub fn new(coords: impl Into<Vec<i64>>) -> Self {
        Site(coords.into())
    }

    /// The origin of `Z^d`.
    pub fn origin(dim: usize) -> Self {
        Site(vec![0; dim])
    }

    /// Lattice dimension of this site.
    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// Coordinates as a slice.
    pub fn coords(&self) -> &[i64] {
        &self.0
    }

    /// Supremum norm `max_i |x_i|`.
    pub fn sup_norm(&self) -> i64 {
        self.0.iter().map(|c| c.abs()).max().unwrap_or(0)
    }

    /// Euclidean norm.
    pub fn l2_norm(&self) -> f64 {
        self.0
            .iter()
            .map(|&c| (c as f64) * (c as f64))
            .sum::<f64>()
            .sqrt()
    }

    /// Componentwise sum `self + other`.
    pub fn add(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim(), other.dim());
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect())
    }

    /// Componentwise difference `self - other`.
    pub fn sub(&self, other: &Site) -> Site {
        debug_assert_eq!(self.dim(), other.dim());
        Site(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }

    /// The reflected site `-self`.
    pub fn neg(&self) -> Site {
        Site(self.0.iter().map(|c| -c).collect())
    }

    /// Whether all coordinates are zero.
    pub fn is_origin(&self) -> bool {
        self.0.iter().all(|&c| c == 0)
    }
}

impl fmt::Display for Site {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, c) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{c}")?;
        }
        write!(f, ")")
    }
}

/// A finite observation window `Λ ⊂ Z^d` with a deterministic site order.
///
/// Sites are stored sorted lexicographically; every constructor produces the
/// same order for the same site set, which simulation and serialization rely
/// on for reproducibility.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatticeWindow {
    dim: usize,
    sites: Vec<Site>,
    #[serde(skip)]
    index: HashMap<Site, usize>,
    descriptor: String,
}

impl LatticeWindow {
    /// Axis-aligned box `{0, …, e_1 - 1} × … × {0, …, e_d - 1}`.
    pub fn from_box(extents: &[i64]) -> Result<Self> {
        if extents.is_empty() {
            return Err(MaxStableError::EmptySiteSet {
                context: "window box needs at least one extent",
            });
        }
        for &e in extents {
            if e <= 0 {
                return Err(MaxStableError::invalid(
                    "extent",
                    e as f64,
                    "box extents must be positive",
                ));
            }
        }
        let mut sites = vec![Site(vec![0; extents.len()])];
        for (axis, &e) in extents.iter().enumerate() {
            let mut next = Vec::with_capacity(sites.len() * e as usize);
            for s in &sites {
                for v in 0..e {
                    let mut c = s.0.clone();
                    c[axis] = v;
                    next.push(Site(c));
                }
            }
            sites = next;
        }
        let descriptor = format!(
            "box:{}",
            extents
                .iter()
                .map(|e| e.to_string())
                .collect::<Vec<_>>()
                .join("x")
        );
        Self::build(extents.len(), sites, descriptor)
    }

    /// Window from an explicit site list (deduplicated and sorted).
    pub fn from_sites(sites: Vec<Site>) -> Result<Self> {
        let dim = match sites.first() {
            Some(s) => s.dim(),
            None => {
                return Err(MaxStableError::EmptySiteSet {
                    context: "window needs at least one site",
                })
            }
        };
        for s in &sites {
            if s.dim() != dim {
                return Err(MaxStableError::DimensionMismatch {
                    context: "window site list",
                    expected: dim,
                    actual: s.dim(),
                });
            }
        }
        let descriptor = format!("sites:{}", sites.len());
        Self::build(dim, sites, descriptor)
    }

    fn build(dim: usize, mut sites: Vec<Site>, descriptor: String) -> Result<Self> {
        sites.sort();
        sites.dedup();
        let index = sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
        Ok(LatticeWindow {
            dim,
            sites,
            index,
            descriptor,
        })
    }

    /// Restores the site index after deserialization.
    pub fn rebuild_index(&mut self) {
        self.index = self
            .sites
            .iter()
            .enumerate()
            .map(|(i, s)| (s.clone(), i))
            .collect();
    }

    /// Lattice dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of sites `|Λ|`.
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    /// Whether the window is empty (constructors forbid this).
    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Sites in deterministic (lexicographic) order.
    pub fn sites(&self) -> &[Site] {
        &self.sites
    }

    /// Construction descriptor, e.g. `box:64x64`.
    pub fn descriptor(&self) -> &str {
        &self.descriptor
    }

    /// Index of `site` in [`LatticeWindow::sites`], if present.
    pub fn index_of(&self, site: &Site) -> Option<usize> {
        self.index.get(site).copied()
    }

    /// Whether the window contains `site`.
    pub fn contains(&self, site: &Site) -> bool {
        self.index.contains_key(site)
    }

    /// Componentwise bounding box `[lo, hi]` over all sites.
    pub fn bounding_box(&self) -> (Vec<i64>, Vec<i64>) {
        let mut lo = self.sites[0].0.clone();
        let mut hi = lo.clone();
        for s in &self.sites {
            for (k, &c) in s.0.iter().enumerate() {
                lo[k] = lo[k].min(c);
                hi[k] = hi[k].max(c);
            }
        }
        (lo, hi)
    }

    /// Arithmetic index lookup for windows that fill their bounding box.
    ///
    /// Returns `None` when the window is not a full box; otherwise the
    /// returned indexer maps coordinates to the site index in O(d) without
    /// hashing, which the estimator autocovariance loops rely on.
    pub fn grid_indexer(&self) -> Option<GridIndexer> {
        let (lo, hi) = self.bounding_box();
        let mut extents = Vec::with_capacity(self.dim);
        let mut size = 1usize;
        for k in 0..self.dim {
            let e = (hi[k] - lo[k] + 1) as usize;
            extents.push(e);
            size = size.checked_mul(e)?;
        }
        if size != self.len() {
            return None;
        }
        // Sites are lex-sorted, so the last axis varies fastest.
        let mut strides = vec![1usize; self.dim];
        for k in (0..self.dim.saturating_sub(1)).rev() {
            strides[k] = strides[k + 1] * extents[k + 1];
        }
        Some(GridIndexer {
            lo,
            hi,
            strides,
        })
    }

    /// Union of the window with its translates by every lag in `lags`.
    ///
    /// Estimators at lag `h` read pairs `(t, t + h)`; simulating on the
    /// inflated window guarantees both ends exist.
    pub fn inflate_by_lags(&self, lags: &[Site]) -> Result<LatticeWindow> {
        for lag in lags {
            if lag.dim() != self.dim {
                return Err(MaxStableError::DimensionMismatch {
                    context: "window inflation lag",
                    expected: self.dim,
                    actual: lag.dim(),
                });
            }
        }
        let mut sites = self.sites.clone();
        for lag in lags {
            sites.extend(self.sites.iter().map(|s| s.add(lag)));
        }
        let descriptor = format!("{}+lags:{}", self.descriptor, lags.len());
        Self::build(self.dim, sites, descriptor)
    }

    /// Number of sites with at least one of the `3^d - 1` sup-norm neighbors
    /// outside the window.
    pub fn boundary_count(&self) -> usize {
        let offsets = neighbor_offsets(self.dim);
        self.sites
            .iter()
            .filter(|s| {
                offsets
                    .iter()
                    .any(|o| !self.contains(&s.add(o)))
            })
            .count()
    }

    /// Fraction of boundary sites, `|∂Λ| / |Λ|`.
    pub fn boundary_ratio(&self) -> f64 {
        self.boundary_count() as f64 / self.len() as f64
    }

    /// Checks that the boundary fraction does not exceed `limit`.
    ///
    /// Asymptotic-variance formulas require windows that grow in every
    /// direction; degenerate shapes such as one-site-wide strips have
    /// boundary ratio 1 and are rejected.
    pub fn require_boundary_ratio(&self, limit: f64) -> Result<()> {
        let ratio = self.boundary_ratio();
        if ratio > limit {
            return Err(MaxStableError::BoundaryRatioExceeded {
                ratio,
                limit,
                size: self.len(),
            });
        }
        Ok(())
    }
}

/// O(d) coordinate-to-index map for full-box windows (see
/// [`LatticeWindow::grid_indexer`]).
#[derive(Debug, Clone)]
pub struct GridIndexer {
    lo: Vec<i64>,
    hi: Vec<i64>,
    strides: Vec<usize>,
}

impl GridIndexer {
    /// Index of the site with the given coordinates, if inside the box.
    #[inline]
    pub fn index_of_coords(&self, coords: &[i64]) -> Option<usize> {
        let mut idx = 0usize;
        for (k, &c) in coords.iter().enumerate() {
            if c < self.lo[k] || c > self.hi[k] {
                return None;
            }
            idx += (c - self.lo[k]) as usize * self.strides[k];
        }
        Some(idx)
    }
}

/// Number of lattice sites with `|t|∞ = r`.
pub(crate) fn shell_count(dim: usize, r: i64) -> f64 {
    if r == 0 {
        return 1.0;
    }
    let outer = (2 * r + 1) as f64;
    let inner = (2 * r - 1) as f64;
    outer.powi(dim as i32) - inner.powi(dim as i32)
}

/// Visits every site of the sup-norm shell `|t|∞ = r` exactly once.
pub(crate) fn for_each_shell_site(
    dim: usize,
    r: i64,
    visit: &mut impl FnMut(&[i64]) -> crate::error::Result<()>,
) -> crate::error::Result<()> {
    let mut t = vec![-r; dim];
    loop {
        if t.iter().map(|c| c.abs()).max().unwrap_or(0) == r {
            visit(&t)?;
        }
        let mut axis = dim;
        loop {
            if axis == 0 {
                return Ok(());
            }
            axis -= 1;
            t[axis] += 1;
            if t[axis] <= r {
                break;
            }
            t[axis] = -r;
        }
    }
}

/// All nonzero offsets `o` with `|o|_∞ <= 1`.
fn neighbor_offsets(dim: usize) -> Vec<Site> {
    let mut offsets = vec![vec![]];
    for _ in 0..dim {
        let mut next = Vec::with_capacity(offsets.len() * 3);
        for o in &offsets {
            for v in [-1i64, 0, 1] {
                let mut c = o.clone();
                c.push(v);
                next.push(c);
            }
        }
        offsets = next;
    }
    offsets
        .into_iter()
        .filter(|c| c.iter().any(|&v| v != 0))
        .map(Site)
        .collect()
}
