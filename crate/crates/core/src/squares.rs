//! The square process: squares clustered by arrows, one renormalization
//! step at a time, until a single square covers the contour.

use serde::{Deserialize, Serialize};

use crate::contour::decompose;
use crate::error::{Error, Result};
use crate::triangle::{Triangle, TriangleConfiguration};
use crate::union_find::UnionFind;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Square {
    /// Leftmost site of the basis.
    pub lo: i64,
    /// Rightmost site of the basis.
    pub hi: i64,
    pub mass: u64,
    /// Triangles represented by the square, sorted.
    pub members: Vec<Triangle>,
}

impl Square {
    /// Square with no recorded members, for arrow experiments.
    pub fn bare(lo: i64, hi: i64, mass: u64) -> Result<Self> {
        if hi < lo || mass == 0 {
            return Err(Error::InvalidParameter(format!("square [{lo}, {hi}] with mass {mass}")));
        }
        Ok(Self {
            lo,
            hi,
            mass,
            members: Vec::new(),
        })
    }

    fn from_members(mut members: Vec<Triangle>) -> Self {
        members.sort_unstable_by_key(|t| (t.lo, std::cmp::Reverse(t.hi)));
        let lo = members.iter().map(|t| t.lo).min().expect("nonempty");
        let hi = members.iter().map(|t| t.hi).max().expect("nonempty");
        let mass = members.iter().map(Triangle::mass).sum();
        Self { lo, hi, mass, members }
    }

    /// Number of sites strictly between two disjoint squares.
    pub fn dist(&self, other: &Square) -> u64 {
        if self.hi < other.lo {
            (other.lo - self.hi - 1) as u64
        } else {
            (self.lo - other.hi - 1) as u64
        }
    }

    pub fn contains(&self, other: &Square) -> bool {
        self.lo <= other.lo && other.hi <= self.hi
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ArrowKind {
    Old,
    New,
}

/// Arrow between squares of one time slice, by index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Arrow {
    pub from: usize,
    pub to: usize,
    pub kind: ArrowKind,
    /// Open real interval `(shadow.0, shadow.1)` between the facing
    /// endpoints, in site coordinates: it holds the sites strictly between.
    pub shadow: (i64, i64),
}

impl Arrow {
    fn between(squares: &[Square], from: usize, to: usize, kind: ArrowKind) -> Self {
        let (l, r) = if from < to { (from, to) } else { (to, from) };
        Self {
            from,
            to,
            kind,
            shadow: (squares[l].hi, squares[r].lo),
        }
    }
}

/// Open intervals `a` inside `b`.
fn shadow_inside(a: (i64, i64), b: (i64, i64)) -> bool {
    b.0 <= a.0 && a.1 <= b.1
}

fn shadows_laminar(a: (i64, i64), b: (i64, i64)) -> bool {
    a.1 <= b.0 || b.1 <= a.0 || shadow_inside(a, b) || shadow_inside(b, a)
}

fn check_sequential(squares: &[Square]) -> Result<()> {
    for w in squares.windows(2) {
        if w[0].hi >= w[1].lo {
            return Err(Error::InvalidParameter(format!(
                "squares [{}, {}] and [{}, {}] are not disjoint and ordered",
                w[0].lo, w[0].hi, w[1].lo, w[1].hi
            )));
        }
    }
    Ok(())
}

/// Arrows `S -> S'` with `|S| < |S'|`, or equal masses and `S` left of
/// `S'`, whenever `dist(S, S') <= c |S|^3`. Squares must be sequential.
pub fn old_arrows(squares: &[Square], c: f64) -> Vec<Arrow> {
    let mut out = Vec::new();
    for (i, s) in squares.iter().enumerate() {
        let reach = c * (s.mass as f64).powi(3);
        for (j, t) in squares.iter().enumerate() {
            if i == j {
                continue;
            }
            let points = s.mass < t.mass || (s.mass == t.mass && i < j);
            if points && s.dist(t) as f64 <= reach {
                out.push(Arrow::between(squares, i, j, ArrowKind::Old));
            }
        }
    }
    out
}

/// Per source and direction, the arrow to the nearest target.
pub fn new_arrows(squares: &[Square], old: &[Arrow]) -> Vec<Arrow> {
    let n = squares.len();
    let mut right: Vec<Option<usize>> = vec![None; n];
    let mut left: Vec<Option<usize>> = vec![None; n];
    for a in old {
        if a.to > a.from {
            let best = right[a.from].get_or_insert(a.to);
            *best = (*best).min(a.to);
        } else {
            let best = left[a.from].get_or_insert(a.to);
            *best = (*best).max(a.to);
        }
    }
    let mut out: Vec<Arrow> = (0..n)
        .flat_map(|i| [left[i], right[i]].into_iter().flatten().map(move |j| (i, j)))
        .map(|(i, j)| Arrow::between(squares, i, j, ArrowKind::New))
        .collect();
    out.sort_unstable_by_key(|a| (a.from, a.to));
    out
}

fn component_labels(n: usize, arrows: &[Arrow]) -> Vec<usize> {
    let mut uf = UnionFind::new(n);
    for a in arrows {
        uf.union(a.from, a.to);
    }
    uf.labels()
}

/// One renormalization step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepOutcome {
    pub old_arrows: Vec<Arrow>,
    pub new_arrows: Vec<Arrow>,
    /// Per input square: endpoint of a new arrow with maximal shadow.
    pub primary: Vec<bool>,
    /// Per input square: index of the output square containing it.
    pub next_of: Vec<usize>,
    pub squares: Vec<Square>,
}

/// Draws the arrows, clusters a-connected squares, and returns the maximal
/// proto-squares as the next configuration.
pub fn step(squares: &[Square], c: f64) -> Result<StepOutcome> {
    if squares.len() < 2 {
        return Err(Error::InvalidParameter("a step needs at least two squares".into()));
    }
    check_sequential(squares)?;
    let old = old_arrows(squares, c);
    if old.is_empty() {
        return Err(Error::StuckProcess(squares.len()));
    }
    let new = new_arrows(squares, &old);
    let labels = component_labels(squares.len(), &old);
    let count = labels.iter().max().map_or(0, |m| m + 1);
    let mut hulls: Vec<(i64, i64)> = vec![(i64::MAX, i64::MIN); count];
    for (s, &l) in squares.iter().zip(&labels) {
        hulls[l].0 = hulls[l].0.min(s.lo);
        hulls[l].1 = hulls[l].1.max(s.hi);
    }
    for (i, a) in hulls.iter().enumerate() {
        for b in &hulls[i + 1..] {
            let disjoint = a.1 < b.0 || b.1 < a.0;
            let nested = (a.0 <= b.0 && b.1 <= a.1) || (b.0 <= a.0 && a.1 <= b.1);
            if !disjoint && !nested {
                return Err(Error::Internal(format!(
                    "proto-squares [{}, {}] and [{}, {}] partially overlap",
                    a.0, a.1, b.0, b.1
                )));
            }
        }
    }
    let mut maximal: Vec<(i64, i64)> = hulls
        .iter()
        .copied()
        .filter(|a| !hulls.iter().any(|b| b != a && b.0 <= a.0 && a.1 <= b.1))
        .collect();
    maximal.sort_unstable();
    maximal.dedup();
    let mut next_of = vec![usize::MAX; squares.len()];
    let mut members: Vec<Vec<Triangle>> = vec![Vec::new(); maximal.len()];
    let mut mass = vec![0u64; maximal.len()];
    for (i, s) in squares.iter().enumerate() {
        let k = maximal
            .iter()
            .position(|h| h.0 <= s.lo && s.hi <= h.1)
            .ok_or_else(|| Error::Internal("square outside every proto-square".into()))?;
        next_of[i] = k;
        members[k].extend_from_slice(&s.members);
        mass[k] += s.mass;
    }
    let next: Vec<Square> = maximal
        .iter()
        .zip(members)
        .zip(mass)
        .map(|((&(lo, hi), mut members), mass)| {
            members.sort_unstable_by_key(|t| (t.lo, std::cmp::Reverse(t.hi)));
            Square { lo, hi, mass, members }
        })
        .collect();
    let mut primary = vec![false; squares.len()];
    for a in &new {
        let is_max = !new
            .iter()
            .any(|b| b.shadow != a.shadow && shadow_inside(a.shadow, b.shadow));
        if is_max {
            primary[a.from] = true;
            primary[a.to] = true;
        }
    }
    Ok(StepOutcome {
        old_arrows: old,
        new_arrows: new,
        primary,
        next_of,
        squares: next,
    })
}

/// One square per maximal triangle, holding it and every triangle inside.
pub fn squares_init(tris: &TriangleConfiguration, c: f64) -> Result<Vec<Square>> {
    let partition = decompose(tris, c)?;
    if partition.len() != 1 {
        return Err(Error::NotSingleContour(partition.len()));
    }
    Ok(initial_squares(tris))
}

pub(crate) fn initial_squares(tris: &TriangleConfiguration) -> Vec<Square> {
    tris.maximal()
        .into_iter()
        .map(|m| Square::from_members(tris.triangles().iter().copied().filter(|t| t.is_inside(&m)).collect()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareProcessTrace {
    pub c: f64,
    /// Square configuration at each time `0..=t_f`.
    pub times: Vec<Vec<Square>>,
    /// `steps[t]` turns `times[t]` into `times[t + 1]`.
    pub steps: Vec<StepOutcome>,
}

impl SquareProcessTrace {
    pub fn t_f(&self) -> usize {
        self.steps.len()
    }

    pub fn final_square(&self) -> &Square {
        &self.times[self.t_f()][0]
    }
}

/// Iterates [`step`] from the initial squares to a single square.
pub fn run_square_process(tris: &TriangleConfiguration, c: f64) -> Result<SquareProcessTrace> {
    let initial = squares_init(tris, c)?;
    run_from(initial, c)
}

pub(crate) fn run_from(initial: Vec<Square>, c: f64) -> Result<SquareProcessTrace> {
    let mut times = vec![initial];
    let mut steps = Vec::new();
    while times.last().expect("nonempty").len() > 1 {
        let current = times.last().expect("nonempty");
        let out = step(current, c).map_err(|e| match e {
            Error::StuckProcess(n) => {
                Error::Internal(format!("square process stuck at time {} with {n} squares", steps.len()))
            }
            other => other,
        })?;
        times.push(out.squares.clone());
        steps.push(out);
    }
    Ok(SquareProcessTrace { c, times, steps })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArrowLemmaReport {
    /// Old-arrow and new-arrow components coincide.
    pub connectivity_equal: bool,
    /// New-arrow shadows are pairwise disjoint or nested.
    pub shadows_laminar: bool,
    pub old_arrows: usize,
    pub new_arrows: usize,
}

impl ArrowLemmaReport {
    pub fn holds(&self) -> bool {
        self.connectivity_equal && self.shadows_laminar
    }
}

/// Checks connectivity equivalence of old and new arrows and laminarity of
/// new shadows on one square configuration.
pub fn arrow_lemma_checks(squares: &[Square], c: f64) -> Result<ArrowLemmaReport> {
    check_sequential(squares)?;
    let old = old_arrows(squares, c);
    let new = new_arrows(squares, &old);
    let n = squares.len();
    let connectivity_equal = component_labels(n, &old) == component_labels(n, &new);
    let shadows_laminar = new
        .iter()
        .enumerate()
        .all(|(i, a)| new[i + 1..].iter().all(|b| shadows_laminar(a.shadow, b.shadow)));
    Ok(ArrowLemmaReport {
        connectivity_equal,
        shadows_laminar,
        old_arrows: old.len(),
        new_arrows: new.len(),
    })
}

/// Every square formed along the trace represents a single contour.
pub fn squares_are_contours(trace: &SquareProcessTrace) -> bool {
    trace.times.iter().flatten().all(|s| {
        decompose(&TriangleConfiguration::new(s.members.clone()), trace.c)
            .map(|p| p.len() == 1)
            .unwrap_or(false)
    })
}

/// Random sequential square configuration for arrow experiments.
pub fn random_squares<R: rand::Rng + ?Sized>(rng: &mut R, count: usize, max_mass: u64, max_gap: u64) -> Vec<Square> {
    let mut out = Vec::with_capacity(count);
    let mut pos = 0i64;
    for _ in 0..count {
        let mass = rng.gen_range(1..=max_mass);
        let len = rng.gen_range(1..=mass) as i64;
        out.push(Square::bare(pos, pos + len - 1, mass).expect("valid square"));
        pos += len + rng.gen_range(0..=max_gap) as i64;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn cfg(ts: &[(i64, i64)]) -> TriangleConfiguration {
        ts.iter().map(|&(a, b)| Triangle::new(a, b).unwrap()).collect()
    }

    #[test]
    fn init_examples() {
        let nested = cfg(&[(0, 9), (4, 4)]);
        let sq = squares_init(&nested, 15.0).unwrap();
        assert_eq!(sq.len(), 1);
        assert_eq!(sq[0].mass, 11);
        let pair = cfg(&[(0, 0), (5, 5)]);
        let sq = squares_init(&pair, 15.0).unwrap();
        assert_eq!(sq.iter().map(|s| s.mass).collect::<Vec<_>>(), vec![1, 1]);
        assert_eq!(
            squares_init(&cfg(&[(0, 0), (40, 40)]), 15.0),
            Err(Error::NotSingleContour(2))
        );
    }

    #[test]
    fn step_examples() {
        let two = vec![Square::bare(0, 0, 1).unwrap(), Square::bare(3, 3, 1).unwrap()];
        let out = step(&two, 15.0).unwrap();
        assert_eq!(out.old_arrows.len(), 1);
        assert_eq!(out.squares.len(), 1);
        assert_eq!(out.squares[0].mass, 2);
        assert_eq!(out.primary, vec![true, true]);

        let far = vec![Square::bare(0, 0, 1).unwrap(), Square::bare(100, 100, 1).unwrap()];
        assert_eq!(step(&far, 15.0), Err(Error::StuckProcess(2)));

        let three = vec![
            Square::bare(0, 0, 1).unwrap(),
            Square::bare(10, 14, 5).unwrap(),
            Square::bare(24, 24, 1).unwrap(),
        ];
        let out = step(&three, 15.0).unwrap();
        assert_eq!(out.squares.len(), 1);
        assert_eq!(out.squares[0].mass, 7);
        assert_eq!(out.new_arrows.len(), 2);
    }

    #[test]
    fn process_examples() {
        let single = run_square_process(&cfg(&[(0, 3)]), 15.0).unwrap();
        assert_eq!(single.t_f(), 0);
        let pair = run_square_process(&cfg(&[(0, 0), (5, 5)]), 15.0).unwrap();
        assert_eq!(pair.t_f(), 1);
        assert_eq!(pair.final_square().mass, 2);
        // pairs at gap 1; the two pairs 14 apart: 14 > c = 2 but <= 2 * 2^3
        let hier = cfg(&[(0, 0), (2, 2), (17, 17), (19, 19)]);
        let trace = run_square_process(&hier, 2.0).unwrap();
        assert_eq!(trace.t_f(), 2);
        assert_eq!(trace.final_square().mass, 4);
        assert_eq!((trace.final_square().lo, trace.final_square().hi), (0, 19));
        assert!(squares_are_contours(&trace));
    }

    #[test]
    fn arrow_lemmas_on_random_squares() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..1000 {
            let count = rng.gen_range(1..=8);
            let sq = random_squares(&mut rng, count, 8, 40);
            let r = arrow_lemma_checks(&sq, 2.0).unwrap();
            assert!(r.holds(), "{sq:?} {r:?}");
        }
        assert!(arrow_lemma_checks(&[Square::bare(0, 0, 1).unwrap()], 15.0)
            .unwrap()
            .holds());
    }

    use rand::Rng;
}
