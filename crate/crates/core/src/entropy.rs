//! Exhaustive evaluation of `G_m`, the b-weight of all single contours of
//! mass `m` with leftmost site 0.
//!
//! A contour is a row of blocks: a maximal triangle with the triangles it
//! contains. Inner structure is finite, so blocks are listed outright; only
//! the gaps between consecutive blocks range widely. Widening one gap only
//! moves separated groups further apart, so the set of gap vectors giving a
//! single contour is closed downward. Counting walks the gaps with early
//! exit and bisects the widest one.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bounds::h_alpha;
use crate::contour::{decompose_unchecked, verify_c};
use crate::enumerate::compatible_pair;
use crate::error::{Error, Result};
use crate::triangle::{Triangle, TriangleConfiguration};

/// Largest mass accepted by [`enumerate_g`]. Mass 6 takes about 30 s on one
/// core and each step costs roughly 100x more.
pub const MAX_ENTROPY_MASS: u64 = 7;

#[derive(Debug, Clone, PartialEq, Eq)]
struct Block {
    len: u64,
    /// Triangles strictly inside `[0, len - 1]`.
    inner: Vec<Triangle>,
    mass: u64,
}

/// Blocks of a given length with inner mass at most `budget`.
fn blocks_of_length(len: u64, budget: u64) -> Vec<Block> {
    let l = len as i64;
    let outer = Triangle { lo: 0, hi: l - 1 };
    let mut cands = Vec::new();
    for lo in 1..l {
        for hi in (lo..l - 1).rev() {
            let t = Triangle { lo, hi };
            if t.mass() <= budget && compatible_pair(&outer, &t) {
                cands.push(t);
            }
        }
    }
    let mut out = Vec::new();
    let mut chosen: Vec<Triangle> = Vec::new();
    fn rec(cands: &[Triangle], start: usize, left: u64, len: u64, chosen: &mut Vec<Triangle>, out: &mut Vec<Block>) {
        let used: u64 = chosen.iter().map(Triangle::mass).sum();
        out.push(Block {
            len,
            inner: chosen.clone(),
            mass: len + used,
        });
        for i in start..cands.len() {
            let t = cands[i];
            if t.mass() <= left && chosen.iter().all(|s| compatible_pair(s, &t)) {
                chosen.push(t);
                rec(cands, i + 1, left - t.mass(), len, chosen, out);
                chosen.pop();
            }
        }
    }
    rec(&cands, 0, budget, len, &mut chosen, &mut out);
    out
}

/// Every sequence of blocks with total mass `m`.
fn structures(m: u64) -> Vec<Vec<Block>> {
    let mut by_mass: Vec<Vec<Block>> = vec![Vec::new(); m as usize + 1];
    for len in 1..=m {
        for b in blocks_of_length(len, m - len) {
            by_mass[b.mass as usize].push(b);
        }
    }
    let mut out = Vec::new();
    fn rec(left: u64, by_mass: &[Vec<Block>], row: &mut Vec<Block>, out: &mut Vec<Vec<Block>>) {
        if left == 0 {
            out.push(row.clone());
            return;
        }
        for mass in 1..=left {
            for b in &by_mass[mass as usize] {
                row.push(b.clone());
                rec(left - mass, by_mass, row, out);
                row.pop();
            }
        }
    }
    rec(m, &by_mass, &mut Vec::new(), &mut out);
    out
}

/// Gap ranges: at least `min(len_i, len_{i+1})` for compatibility, at most
/// `c min(M_left, M_right)^3` or the two sides separate.
fn gap_ranges(row: &[Block], c: f64) -> Vec<(u64, u64)> {
    let total: u64 = row.iter().map(|b| b.mass).sum();
    let mut left = 0;
    (0..row.len().saturating_sub(1))
        .map(|i| {
            left += row[i].mass;
            let side = left.min(total - left) as f64;
            let hi = (c * side * side * side).floor() as u64;
            (row[i].len.min(row[i + 1].len), hi)
        })
        .collect()
}

fn place(row: &[Block], gaps: &[u64], out: &mut Vec<Triangle>) {
    out.clear();
    let mut pos = 0i64;
    for (i, b) in row.iter().enumerate() {
        out.push(Triangle {
            lo: pos,
            hi: pos + b.len as i64 - 1,
        });
        out.extend(b.inner.iter().map(|t| t.translate(pos)));
        pos += b.len as i64;
        if i < gaps.len() {
            pos += gaps[i] as i64;
        }
    }
}

struct Counter<'a> {
    row: &'a [Block],
    ranges: Vec<(u64, u64)>,
    c: f64,
    scratch: Vec<Triangle>,
}

impl Counter<'_> {
    fn single(&mut self, gaps: &[u64]) -> bool {
        place(self.row, gaps, &mut self.scratch);
        self.scratch.len() <= 1 || decompose_unchecked(&self.scratch, self.c).is_singleton()
    }

    /// Number of single-contour gap vectors.
    fn count(&mut self) -> u128 {
        let k = self.ranges.len();
        if k == 0 {
            return 1;
        }
        if self.ranges.iter().any(|r| r.0 > r.1) {
            return 0;
        }
        let free = (0..k)
            .max_by_key(|&i| (self.ranges[i].1 - self.ranges[i].0, std::cmp::Reverse(i)))
            .expect("k > 0");
        let mut gaps: Vec<u64> = self.ranges.iter().map(|r| r.0).collect();
        let order: Vec<usize> = (0..k).filter(|&i| i != free).collect();
        self.walk(&order, 0, free, &mut gaps)
    }

    fn walk(&mut self, order: &[usize], depth: usize, free: usize, gaps: &mut Vec<u64>) -> u128 {
        if depth == order.len() {
            let (lo, hi) = self.ranges[free];
            gaps[free] = lo;
            if !self.single(gaps) {
                return 0;
            }
            // largest feasible value of the free gap
            let (mut ok, mut bad) = (lo, hi + 1);
            gaps[free] = hi;
            if self.single(gaps) {
                ok = hi;
            } else {
                while bad - ok > 1 {
                    let mid = ok + (bad - ok) / 2;
                    gaps[free] = mid;
                    if self.single(gaps) {
                        ok = mid;
                    } else {
                        bad = mid;
                    }
                }
            }
            gaps[free] = lo;
            return (ok - lo + 1) as u128;
        }
        let i = order[depth];
        let (lo, hi) = self.ranges[i];
        let mut total = 0;
        for g in lo..=hi {
            gaps[i] = g;
            let n = self.walk(order, depth + 1, free, gaps);
            if n == 0 {
                break;
            }
            total += n;
        }
        gaps[i] = lo;
        total
    }

    /// Calls `f` on every single-contour placement.
    fn visit(&mut self, gaps: &mut Vec<u64>, depth: usize, f: &mut dyn FnMut(&[Triangle])) -> bool {
        if depth == self.ranges.len() {
            if self.single(gaps) {
                f(&self.scratch);
                return true;
            }
            return false;
        }
        let (lo, hi) = self.ranges[depth];
        let mut any = false;
        for g in lo..=hi {
            gaps[depth] = g;
            // first placement of the subtree is the smallest; if it fails so
            // does every larger gap
            if !self.visit(gaps, depth + 1, f) {
                break;
            }
            any = true;
        }
        gaps[depth] = lo;
        any
    }
}

/// Number of anchored single contours sharing one triangle-mass multiset,
/// block count and covered-site count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CensusClass {
    /// Triangle masses, sorted descending.
    pub masses: Vec<u64>,
    /// Number of maximal triangles.
    pub blocks: usize,
    /// Sites covered by some triangle.
    pub covered: u64,
    pub count: u128,
}

/// All anchored single contours of mass `m`, grouped by what their weight
/// and root colour depend on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyCensus {
    pub m: u64,
    pub c: f64,
    pub classes: Vec<CensusClass>,
}

impl EntropyCensus {
    pub fn contours(&self) -> u128 {
        self.classes.iter().map(|k| k.count).sum()
    }

    pub fn report(&self, b: f64, alpha: f64) -> EntropyReport {
        let (mut white, mut black, mut origin) = (0.0, 0.0, 0.0);
        for k in &self.classes {
            let w = (-b * k.masses.iter().map(|&m| h_alpha(alpha, m)).sum::<f64>()).exp();
            let part = k.count as f64 * w;
            if k.blocks == 1 {
                white += part;
            } else {
                black += part;
            }
            origin += part * k.covered as f64;
        }
        let bound = 2.0 * (-b * h_alpha(alpha, self.m)).exp();
        let origin_bound = self.m as f64 * bound;
        let g_m = white + black;
        EntropyReport {
            m: self.m,
            c: self.c,
            b,
            alpha,
            contours: self.contours(),
            g_m,
            g_white: white,
            g_black: black,
            bound,
            origin_sum: origin,
            origin_bound,
            pass: if alpha == 0.0 {
                origin <= origin_bound
            } else {
                g_m <= bound
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntropyReport {
    pub m: u64,
    pub c: f64,
    pub b: f64,
    pub alpha: f64,
    pub contours: u128,
    /// Sum of b-weights over contours of mass m with leftmost site 0.
    pub g_m: f64,
    /// Part of `g_m` from white-root trees (one maximal triangle).
    pub g_white: f64,
    /// Part of `g_m` from black-root trees.
    pub g_black: f64,
    /// `2 e^{-b h(m)}`.
    pub bound: f64,
    /// Sum of b-weights over contours of mass m covering site 0.
    pub origin_sum: f64,
    /// `2 m e^{-b h(m)}`.
    pub origin_bound: f64,
    /// `g_m <= bound` for `alpha > 0`; `origin_sum <= origin_bound` for
    /// `alpha = 0`.
    pub pass: bool,
}

fn check_inputs(m: u64, c: f64) -> Result<()> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "separation constant must be positive and finite, got {c}"
        )));
    }
    if m == 0 {
        return Err(Error::InvalidParameter("mass must be at least 1".into()));
    }
    if m > MAX_ENTROPY_MASS {
        return Err(Error::InvalidParameter(format!(
            "mass {m} exceeds the enumeration limit {MAX_ENTROPY_MASS}"
        )));
    }
    Ok(())
}

type CensusCache = Mutex<HashMap<(u64, u64), Arc<EntropyCensus>>>;

fn cache() -> &'static CensusCache {
    static CACHE: OnceLock<CensusCache> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

/// Counts every anchored single contour of mass `m`. Results are cached
/// per `(m, c)`. Any positive `c` is accepted here; [`enumerate_g`]
/// additionally requires the separation sum condition.
pub fn entropy_census(m: u64, c: f64) -> Result<Arc<EntropyCensus>> {
    check_inputs(m, c)?;
    let key = (m, c.to_bits());
    if let Some(hit) = cache().lock().expect("cache lock").get(&key) {
        return Ok(hit.clone());
    }
    let rows = structures(m);
    let counted: Vec<(Vec<u64>, usize, u64, u128)> = rows
        .par_iter()
        .map(|row| {
            let mut counter = Counter {
                row,
                ranges: gap_ranges(row, c),
                c,
                scratch: Vec::new(),
            };
            let mut masses: Vec<u64> = row
                .iter()
                .flat_map(|b| std::iter::once(b.len).chain(b.inner.iter().map(Triangle::mass)))
                .collect();
            masses.sort_unstable_by(|a, b| b.cmp(a));
            let covered = row.iter().map(|b| b.len).sum();
            (masses, row.len(), covered, counter.count())
        })
        .collect();
    let mut grouped: HashMap<(Vec<u64>, usize, u64), u128> = HashMap::new();
    for (masses, blocks, covered, n) in counted {
        if n > 0 {
            *grouped.entry((masses, blocks, covered)).or_default() += n;
        }
    }
    let mut classes: Vec<CensusClass> = grouped
        .into_iter()
        .map(|((masses, blocks, covered), count)| CensusClass {
            masses,
            blocks,
            covered,
            count,
        })
        .collect();
    classes.sort_unstable_by(|a, b| (&a.masses, a.blocks, a.covered).cmp(&(&b.masses, b.blocks, b.covered)));
    let census = Arc::new(EntropyCensus { m, c, classes });
    cache().lock().expect("cache lock").insert(key, census.clone());
    Ok(census)
}

/// `G_m` and its white/black split, with the anchored and origin bounds.
pub fn enumerate_g(m: u64, c: f64, b: f64, alpha: f64) -> Result<EntropyReport> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight exponent must be positive, got {b}"
        )));
    }
    crate::bounds::HAlpha::new(alpha)?;
    let sep = verify_c(c)?;
    if !sep.ok {
        return Err(Error::InvalidParameter(format!(
            "c = {c} gives separation sum {} > 1/2",
            sep.sum
        )));
    }
    Ok(entropy_census(m, c)?.report(b, alpha))
}

/// Calls `f` on every anchored single contour of mass `m`, one by one.
pub fn for_each_anchored_contour(m: u64, c: f64, mut f: impl FnMut(&TriangleConfiguration)) -> Result<()> {
    check_inputs(m, c)?;
    for row in structures(m) {
        let mut counter = Counter {
            ranges: gap_ranges(&row, c),
            row: &row,
            c,
            scratch: Vec::new(),
        };
        if counter.ranges.iter().any(|r| r.0 > r.1) {
            continue;
        }
        let mut gaps: Vec<u64> = counter.ranges.iter().map(|r| r.0).collect();
        counter.visit(&mut gaps, 0, &mut |ts| f(&TriangleConfiguration::new(ts.to_vec())));
    }
    Ok(())
}

/// Window `[0, m + (m - 1) ceil(c m^3)]` that holds every anchored contour
/// of mass `m`.
pub fn brute_force_window(m: u64, c: f64) -> usize {
    let m3 = (m * m * m) as f64;
    (m + (m - 1) * (c * m3).ceil() as u64 + 1) as usize
}
