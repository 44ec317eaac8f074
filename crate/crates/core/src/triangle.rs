//! Interface points, the collision pairing that turns them into triangles,
//! and the inverse map back to spins.
//!
//! An interface point between sites `k` and `k + 1` sits at `k + 1/2` and is
//! stored as the integer `k`. A triangle is identified with its basis, the
//! inclusive range of lattice sites strictly between its two interface
//! points.

use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{CouplingTable, ModelParams, SpinConfiguration, Window};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triangle {
    pub lo: i64,
    pub hi: i64,
}

impl Triangle {
    pub fn new(lo: i64, hi: i64) -> Result<Self> {
        if lo > hi {
            return Err(Error::InvalidParameter(format!("triangle basis [{lo}, {hi}] is empty")));
        }
        Ok(Self { lo, hi })
    }

    /// Triangle whose basis starts at `lo` and covers `mass` sites.
    pub fn with_mass(lo: i64, mass: u64) -> Self {
        assert!(mass >= 1, "triangle mass must be positive");
        Self {
            lo,
            hi: lo + mass as i64 - 1,
        }
    }

    /// Number of lattice sites in the basis.
    pub fn mass(&self) -> u64 {
        (self.hi - self.lo + 1) as u64
    }

    /// Left interface point, `lo - 1/2`.
    pub fn left(&self) -> f64 {
        self.lo as f64 - 0.5
    }

    /// Right interface point, `hi + 1/2`.
    pub fn right(&self) -> f64 {
        self.hi as f64 + 0.5
    }

    pub fn basis(&self) -> Window {
        Window {
            lo: self.lo,
            hi: self.hi,
        }
    }

    pub fn contains_site(&self, x: i64) -> bool {
        self.lo <= x && x <= self.hi
    }

    /// Basis of `self` lies inside the basis of `other` (not necessarily strictly).
    pub fn is_inside(&self, other: &Triangle) -> bool {
        other.lo <= self.lo && self.hi <= other.hi
    }

    pub fn is_disjoint(&self, other: &Triangle) -> bool {
        self.hi < other.lo || other.hi < self.lo
    }

    pub fn translate(&self, shift: i64) -> Self {
        Self {
            lo: self.lo + shift,
            hi: self.hi + shift,
        }
    }

    /// Smallest triangle whose basis covers both.
    pub fn hull(&self, other: &Triangle) -> Self {
        Self {
            lo: self.lo.min(other.lo),
            hi: self.hi.max(other.hi),
        }
    }
}

impl fmt::Display for Triangle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}..{}]", self.lo, self.hi)
    }
}

/// Sites strictly between two bases: the gap when disjoint, the thinner of
/// the two margins when nested.
pub fn tri_dist(a: &Triangle, b: &Triangle) -> Result<u64> {
    if a.hi < b.lo {
        Ok((b.lo - a.hi - 1) as u64)
    } else if b.hi < a.lo {
        Ok((a.lo - b.hi - 1) as u64)
    } else if a.is_inside(b) {
        Ok((a.lo - b.lo).min(b.hi - a.hi) as u64)
    } else if b.is_inside(a) {
        Ok((b.lo - a.lo).min(a.hi - b.hi) as u64)
    } else {
        Err(Error::PartialOverlap(*a, *b))
    }
}

/// Distance for triangles already known to be laminar.
pub(crate) fn laminar_dist(a: &Triangle, b: &Triangle) -> u64 {
    tri_dist(a, b).expect("laminar triangles")
}

/// Strictly increasing interface points `k + 1/2`, stored as `k`.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct InterfaceList {
    positions: Vec<i64>,
}

impl InterfaceList {
    pub fn positions(&self) -> &[i64] {
        &self.positions
    }

    /// Half-integer coordinates.
    pub fn coordinates(&self) -> Vec<f64> {
        self.positions.iter().map(|k| *k as f64 + 0.5).collect()
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

pub fn interface_points(sigma: &SpinConfiguration) -> InterfaceList {
    let window = sigma.window();
    let positions = (window.lo - 1..=window.hi)
        .filter(|&k| sigma.get(k) != sigma.get(k + 1))
        .collect();
    InterfaceList { positions }
}

/// Finite set of triangles kept sorted by basis.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct TriangleConfiguration {
    triangles: Vec<Triangle>,
}

impl TriangleConfiguration {
    pub fn new(mut triangles: Vec<Triangle>) -> Self {
        triangles.sort_unstable_by_key(|t| (t.lo, Reverse(t.hi)));
        triangles.dedup();
        Self { triangles }
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn len(&self) -> usize {
        self.triangles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triangles.is_empty()
    }

    /// Sum of triangle masses.
    pub fn mass(&self) -> u64 {
        self.triangles.iter().map(Triangle::mass).sum()
    }

    pub fn hull(&self) -> Option<Window> {
        let lo = self.triangles.iter().map(|t| t.lo).min()?;
        let hi = self.triangles.iter().map(|t| t.hi).max()?;
        Some(Window { lo, hi })
    }

    pub fn union(&self, other: &TriangleConfiguration) -> Self {
        let mut all = self.triangles.clone();
        all.extend_from_slice(&other.triangles);
        Self::new(all)
    }

    pub fn without(&self, removed: &[Triangle]) -> Self {
        Self {
            triangles: self
                .triangles
                .iter()
                .filter(|t| !removed.contains(t))
                .copied()
                .collect(),
        }
    }

    pub fn contains(&self, t: &Triangle) -> bool {
        self.triangles.contains(t)
    }

    /// Triangles not contained in any other triangle of the configuration.
    pub fn maximal(&self) -> Vec<Triangle> {
        self.triangles
            .iter()
            .filter(|t| !self.triangles.iter().any(|o| o != *t && t.is_inside(o)))
            .copied()
            .collect()
    }

    pub fn translate(&self, shift: i64) -> Self {
        Self {
            triangles: self.triangles.iter().map(|t| t.translate(shift)).collect(),
        }
    }

    /// Checks laminarity and `dist(T, T') >= min(|T|, |T'|)` for every pair.
    pub fn validate(&self) -> Result<()> {
        for (i, a) in self.triangles.iter().enumerate() {
            for b in &self.triangles[i + 1..] {
                let d = tri_dist(a, b)?;
                if d < a.mass().min(b.mass()) {
                    return Err(Error::Incompatible(*a, *b));
                }
            }
        }
        Ok(())
    }
}

impl FromIterator<Triangle> for TriangleConfiguration {
    fn from_iter<I: IntoIterator<Item = Triangle>>(iter: I) -> Self {
        Self::new(iter.into_iter().collect())
    }
}

impl fmt::Display for TriangleConfiguration {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, t) in self.triangles.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

pub fn check_compatibility(tris: &TriangleConfiguration) -> bool {
    tris.validate().is_ok()
}

/// Pairs interface points by repeatedly freezing the adjacent pair with the
/// smallest gap (leftmost pair on ties).
pub fn build_triangles(sigma: &SpinConfiguration) -> TriangleConfiguration {
    pair_interfaces(interface_points(sigma).positions())
}

pub(crate) fn pair_interfaces(points: &[i64]) -> TriangleConfiguration {
    let n = points.len();
    debug_assert!(n.is_multiple_of(2), "all-plus boundary gives an even count");
    if n == 0 {
        return TriangleConfiguration::default();
    }
    let mut prev: Vec<Option<usize>> = (0..n).map(|i| i.checked_sub(1)).collect();
    let mut next: Vec<Option<usize>> = (0..n).map(|i| (i + 1 < n).then_some(i + 1)).collect();
    let mut alive = vec![true; n];
    let mut heap = BinaryHeap::with_capacity(n);
    for i in 0..n - 1 {
        heap.push(Reverse((points[i + 1] - points[i], points[i], i, i + 1)));
    }
    let mut triangles = Vec::with_capacity(n / 2);
    while let Some(Reverse((_, _, i, j))) = heap.pop() {
        if !alive[i] || !alive[j] || next[i] != Some(j) {
            continue;
        }
        alive[i] = false;
        alive[j] = false;
        triangles.push(Triangle {
            lo: points[i] + 1,
            hi: points[j],
        });
        let (left, right) = (prev[i], next[j]);
        if let Some(l) = left {
            next[l] = right;
        }
        if let Some(r) = right {
            prev[r] = left;
        }
        if let (Some(l), Some(r)) = (left, right) {
            heap.push(Reverse((points[r] - points[l], points[l], l, r)));
        }
    }
    TriangleConfiguration::new(triangles)
}

/// Spin `-1` exactly where an odd number of triangles cover the site.
pub fn spins_from_triangles(tris: &TriangleConfiguration, window: Window) -> Result<SpinConfiguration> {
    let mut values = vec![1i8; window.len()];
    for t in tris.triangles() {
        if t.lo < window.lo || t.hi > window.hi {
            return Err(Error::OutsideWindow(*t, window.lo, window.hi));
        }
        for x in t.lo..=t.hi {
            values[(x - window.lo) as usize] *= -1;
        }
    }
    SpinConfiguration::new(window, values)
}

/// `W(L)`: energy gained by the `L` sites of a droplet against the two
/// adjacent blocks of `L` sites, minus everything farther out.
pub fn w_kernel(l: u64, params: &ModelParams) -> Result<f64> {
    if l == 0 {
        return Err(Error::InvalidParameter("W(L) needs L >= 1".into()));
    }
    Ok(WKernel::new(*params, l).value(l))
}

/// All `W(L)` for `1 <= L <= max_l` in linear time.
///
/// Summing over the droplet sites, `W(L) = 2 [S(L) - 2 (S(2L) - S(L))]` with
/// `S(n)` the partial sums of the half-line tails `tail(1), ..., tail(n)`.
#[derive(Debug, Clone)]
pub struct WKernel {
    prefix: Vec<f64>,
}

impl WKernel {
    pub fn new(params: ModelParams, max_l: u64) -> Self {
        let n = 2 * max_l as usize;
        let table = CouplingTable::new(params, n);
        let mut prefix = Vec::with_capacity(n + 1);
        prefix.push(0.0);
        let (mut sum, mut comp) = (0.0f64, 0.0f64);
        for d in 1..=n {
            let x = table.tail(d);
            let t = sum + x;
            comp += if sum.abs() >= x.abs() {
                (sum - t) + x
            } else {
                (x - t) + sum
            };
            sum = t;
            prefix.push(sum + comp);
        }
        Self { prefix }
    }

    pub fn max_l(&self) -> u64 {
        (self.prefix.len() as u64 - 1) / 2
    }

    pub fn value(&self, l: u64) -> f64 {
        let l = l as usize;
        2.0 * (3.0 * self.prefix[l] - 2.0 * self.prefix[2 * l])
    }
}
