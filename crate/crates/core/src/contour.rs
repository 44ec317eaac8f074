//! Contours: the finest partition of a compatible triangle configuration
//! whose parts are pairwise well separated, plus the Peierls bound on their
//! conditional energies.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bounds::h_alpha;
use crate::error::{Error, Result};
use crate::model::{power_tail, CouplingTable, ModelParams};
use crate::triangle::{laminar_dist, Triangle, TriangleConfiguration};

/// Separation constant used when none is given.
pub const DEFAULT_C: f64 = 15.0;

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Contour {
    triangles: Vec<Triangle>,
    enclosing: Triangle,
    mass: u64,
}

impl Contour {
    pub fn new(mut triangles: Vec<Triangle>) -> Result<Self> {
        if triangles.is_empty() {
            return Err(Error::InvalidParameter("a contour needs at least one triangle".into()));
        }
        triangles.sort_unstable();
        triangles.dedup();
        let enclosing = triangles[1..].iter().fold(triangles[0], |acc, t| acc.hull(t));
        let mass = triangles.iter().map(Triangle::mass).sum();
        Ok(Self {
            triangles,
            enclosing,
            mass,
        })
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    /// `T(Gamma)`, the smallest triangle covering every member.
    pub fn enclosing(&self) -> Triangle {
        self.enclosing
    }

    /// Leftmost site of the enclosing triangle.
    pub fn x_minus(&self) -> i64 {
        self.enclosing.lo
    }

    /// Rightmost site of the enclosing triangle.
    pub fn x_plus(&self) -> i64 {
        self.enclosing.hi
    }

    /// Sum of member masses.
    pub fn mass(&self) -> u64 {
        self.mass
    }

    pub fn configuration(&self) -> TriangleConfiguration {
        TriangleConfiguration::new(self.triangles.clone())
    }

    /// Some member triangle covers site `x`.
    pub fn covers(&self, x: i64) -> bool {
        self.triangles.iter().any(|t| t.contains_site(x))
    }
}

impl fmt::Display for Contour {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Gamma{{T={}, mass={}, triangles=", self.enclosing, self.mass)?;
        for (i, t) in self.triangles.iter().enumerate() {
            if i > 0 {
                f.write_str(" ")?;
            }
            write!(f, "{t}")?;
        }
        f.write_str("}")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct ContourPartition {
    contours: Vec<Contour>,
}

impl ContourPartition {
    fn from_contours(mut contours: Vec<Contour>) -> Self {
        contours.sort_unstable_by_key(|g| (g.enclosing.lo, std::cmp::Reverse(g.enclosing.hi), g.triangles[0]));
        Self { contours }
    }

    pub fn contours(&self) -> &[Contour] {
        &self.contours
    }

    pub fn len(&self) -> usize {
        self.contours.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contours.is_empty()
    }

    pub fn is_singleton(&self) -> bool {
        self.contours.len() == 1
    }

    /// Contour containing triangle `t`, if any.
    pub fn contour_of(&self, t: &Triangle) -> Option<&Contour> {
        self.contours.iter().find(|g| g.triangles.contains(t))
    }

    /// Every pair of contours satisfies the separation property.
    pub fn is_well_separated(&self, c: f64) -> bool {
        self.contours.iter().enumerate().all(|(i, a)| {
            self.contours[i + 1..]
                .iter()
                .all(|b| separated(&a.triangles, a.enclosing, a.mass, &b.triangles, b.enclosing, b.mass, c))
        })
    }
}

/// Separation test between two groups of triangles.
///
/// Disjoint hulls need `dist > c min(|A|^3, |B|^3)`. Nested hulls need every
/// triangle of the outer group to contain or avoid the inner hull, and
/// `dist > c |inner|^3`. Any other overlap fails.
pub(crate) fn separated(
    a: &[Triangle],
    hull_a: Triangle,
    mass_a: u64,
    b: &[Triangle],
    hull_b: Triangle,
    mass_b: u64,
    c: f64,
) -> bool {
    if hull_a.is_disjoint(&hull_b) {
        let d = laminar_dist(&hull_a, &hull_b) as f64;
        return d > c * cube(mass_a.min(mass_b));
    }
    let (inner, inner_hull, inner_mass, outer) = if hull_a != hull_b && hull_a.is_inside(&hull_b) {
        (a, hull_a, mass_a, b)
    } else if hull_a != hull_b && hull_b.is_inside(&hull_a) {
        (b, hull_b, mass_b, a)
    } else {
        return false;
    };
    if !outer
        .iter()
        .all(|t| inner_hull.is_inside(t) || inner_hull.is_disjoint(t))
    {
        return false;
    }
    let threshold = c * cube(inner_mass);
    inner
        .iter()
        .all(|s| outer.iter().all(|t| laminar_dist(s, t) as f64 > threshold))
}

fn cube(m: u64) -> f64 {
    let m = m as f64;
    m * m * m
}

#[derive(Debug, Clone)]
struct Part {
    members: Vec<Triangle>,
    hull: Triangle,
    mass: u64,
}

impl Part {
    fn single(t: Triangle) -> Self {
        Self {
            members: vec![t],
            hull: t,
            mass: t.mass(),
        }
    }

    fn merged(a: &Part, b: &Part) -> Self {
        let mut members = a.members.clone();
        members.extend_from_slice(&b.members);
        Self {
            members,
            hull: a.hull.hull(&b.hull),
            mass: a.mass + b.mass,
        }
    }

    fn separated_from(&self, other: &Part, c: f64) -> bool {
        separated(
            &self.members,
            self.hull,
            self.mass,
            &other.members,
            other.hull,
            other.mass,
            c,
        )
    }
}

fn check_c(c: f64) -> Result<()> {
    if !(c > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "separation constant must be positive, got {c}"
        )));
    }
    Ok(())
}

fn into_partition(parts: Vec<Option<Part>>) -> ContourPartition {
    ContourPartition::from_contours(
        parts
            .into_iter()
            .flatten()
            .map(|p| Contour::new(p.members).expect("nonempty part"))
            .collect(),
    )
}

/// Unique contour decomposition: starting from single triangles, merge any
/// pair of parts that is not well separated until none is left.
pub fn decompose(tris: &TriangleConfiguration, c: f64) -> Result<ContourPartition> {
    check_c(c)?;
    tris.validate()?;
    Ok(decompose_unchecked(tris.triangles(), c))
}

pub(crate) fn decompose_unchecked(tris: &[Triangle], c: f64) -> ContourPartition {
    let mut parts: Vec<Option<Part>> = tris.iter().map(|t| Some(Part::single(*t))).collect();
    let mut queue: VecDeque<(usize, usize)> = (0..parts.len())
        .flat_map(|i| (i + 1..parts.len()).map(move |j| (i, j)))
        .collect();
    while let Some((i, j)) = queue.pop_front() {
        let (Some(a), Some(b)) = (&parts[i], &parts[j]) else {
            continue;
        };
        if a.separated_from(b, c) {
            continue;
        }
        let merged = Part::merged(a, b);
        parts[i] = None;
        parts[j] = None;
        let k = parts.len();
        parts.push(Some(merged));
        queue.extend((0..k).filter(|&o| parts[o].is_some()).map(|o| (o, k)));
    }
    into_partition(parts)
}

/// Same fixed point as [`decompose`], but the violating pair merged at
/// each step is drawn at random.
pub fn decompose_random_order<R: Rng + ?Sized>(
    tris: &TriangleConfiguration,
    c: f64,
    rng: &mut R,
) -> Result<ContourPartition> {
    check_c(c)?;
    tris.validate()?;
    let mut parts: Vec<Part> = tris.triangles().iter().map(|t| Part::single(*t)).collect();
    loop {
        let violating: Vec<(usize, usize)> = (0..parts.len())
            .flat_map(|i| (i + 1..parts.len()).map(move |j| (i, j)))
            .filter(|&(i, j)| !parts[i].separated_from(&parts[j], c))
            .collect();
        let Some(&(i, j)) = violating.choose(rng) else {
            break;
        };
        let merged = Part::merged(&parts[i], &parts[j]);
        parts.swap_remove(j);
        parts.swap_remove(i);
        parts.push(merged);
        parts.shuffle(rng);
    }
    Ok(into_partition(parts.into_iter().map(Some).collect()))
}

/// Value of the separation series `sum_M 4M / floor(c M^3)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparationSum {
    pub c: f64,
    pub sum: f64,
    pub ok: bool,
}

/// Evaluates `sum_{M >= 1} 4M / floor(c M^3)` and whether it is `<= 1/2`.
///
/// Terms are summed until `4 / (c (M - 1)) < 1e-6`; the rest is added as
/// `(4 / c) sum_{M' >= M} M'^-2`.
pub fn verify_c(c: f64) -> Result<SeparationSum> {
    if !(c > 4.0) {
        return Err(Error::InvalidParameter(format!(
            "separation constant must exceed 4, got {c}"
        )));
    }
    let mut sum = 0.0;
    let mut m: u64 = 1;
    loop {
        if m >= 2 && 4.0 / (c * (m - 1) as f64) < 1e-6 {
            break;
        }
        let mf = m as f64;
        sum += 4.0 * mf / (c * mf * mf * mf).floor();
        m += 1;
    }
    if c.is_finite() {
        sum += 4.0 / c * power_tail(m, 2.0);
    }
    Ok(SeparationSum { c, sum, ok: sum <= 0.5 })
}

/// `(c, b, zeta)` of the Peierls estimate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeierlsParams {
    pub c: f64,
    pub b: f64,
    pub zeta: f64,
}

impl PeierlsParams {
    pub fn new(c: f64, b: f64, zeta: f64) -> Result<Self> {
        let sep = verify_c(c)?;
        if !sep.ok {
            return Err(Error::InvalidParameter(format!(
                "c = {c} gives separation sum {} > 1/2",
                sep.sum
            )));
        }
        if !(b > 0.0) || !(zeta > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "b and zeta must be positive, got b = {b}, zeta = {zeta}"
            )));
        }
        Ok(Self { c, b, zeta })
    }

    /// Inverse temperature whose Peierls weight exponent `zeta beta / 2` is `b`.
    pub fn beta(&self) -> f64 {
        2.0 * self.b / self.zeta
    }
}

/// `sum_{T in Gamma} h_alpha(|T|)`, the exponent of the b-weight per unit b.
pub fn contour_size(gamma: &Contour, alpha: f64) -> f64 {
    gamma.triangles.iter().map(|t| h_alpha(alpha, t.mass())).sum()
}

/// b-weight `prod_T exp(-b h_alpha(|T|))`; for `alpha = 0` this is
/// `prod_T |T|^-b e^-4b`.
pub fn contour_weight(gamma: &Contour, b: f64, alpha: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "weight exponent must be positive, got {b}"
        )));
    }
    Ok((-b * contour_size(gamma, alpha)).exp())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PeierlsReport {
    pub contour: Contour,
    /// `H(Gamma | rest)`.
    pub lhs: f64,
    /// `(zeta / 2) sum_T h_alpha(|T|)`.
    pub rhs: f64,
    pub holds: bool,
}

impl PeierlsReport {
    pub fn margin(&self) -> f64 {
        self.lhs - self.rhs
    }
}

/// Tolerance on energy inequalities.
pub const ENERGY_TOL: f64 = 1e-9;

/// Checks `H(Gamma | T \ Gamma) >= (zeta / 2) sum_{T in Gamma} h_alpha(|T|)`.
pub fn peierls_check(
    tris: &TriangleConfiguration,
    target: &Contour,
    params: &ModelParams,
    pp: &PeierlsParams,
) -> Result<PeierlsReport> {
    let partition = decompose(tris, pp.c)?;
    if !partition.contours.contains(target) {
        return Err(Error::NotAContour);
    }
    let table = table_for(tris, params);
    Ok(peierls_with_table(tris, target, &table, pp))
}

/// [`peierls_check`] for every contour of the configuration; empty for the
/// all-plus configuration.
pub fn peierls_check_all(
    tris: &TriangleConfiguration,
    params: &ModelParams,
    pp: &PeierlsParams,
) -> Result<Vec<PeierlsReport>> {
    let partition = decompose(tris, pp.c)?;
    let table = table_for(tris, params);
    Ok(partition
        .contours
        .iter()
        .map(|g| peierls_with_table(tris, g, &table, pp))
        .collect())
}

fn table_for(tris: &TriangleConfiguration, params: &ModelParams) -> CouplingTable {
    CouplingTable::new(*params, tris.hull().map_or(1, |w| w.len()))
}

pub(crate) fn peierls_with_table(
    tris: &TriangleConfiguration,
    target: &Contour,
    table: &CouplingTable,
    pp: &PeierlsParams,
) -> PeierlsReport {
    let full = table.triangle_energy(tris.triangles());
    let rest = tris.without(target.triangles());
    let lhs = full - table.triangle_energy(rest.triangles());
    let rhs = 0.5 * pp.zeta * contour_size(target, table.params().alpha());
    PeierlsReport {
        contour: target.clone(),
        lhs,
        rhs,
        holds: lhs >= rhs - ENERGY_TOL,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightBoundReport {
    pub contour: Contour,
    pub beta: f64,
    /// `-beta H(T)`.
    pub log_lhs: f64,
    /// `-beta H(T \ Gamma) + ln w_b(Gamma)`.
    pub log_rhs: f64,
    pub holds: bool,
}

/// Checks `exp(-beta H(T)) <= exp(-beta H(T \ Gamma)) w_b(Gamma)` for every
/// contour, with `beta = 2 b / zeta`. Compared in log form.
pub fn weight_bound_check(
    tris: &TriangleConfiguration,
    params: &ModelParams,
    pp: &PeierlsParams,
) -> Result<Vec<WeightBoundReport>> {
    let partition = decompose(tris, pp.c)?;
    let table = table_for(tris, params);
    let beta = pp.beta();
    let full = table.triangle_energy(tris.triangles());
    Ok(partition
        .contours
        .iter()
        .map(|g| {
            let rest = table.triangle_energy(tris.without(g.triangles()).triangles());
            let log_lhs = -beta * full;
            let log_rhs = -beta * rest - pp.b * contour_size(g, params.alpha());
            WeightBoundReport {
                contour: g.clone(),
                beta,
                log_lhs,
                log_rhs,
                holds: log_lhs <= log_rhs + beta * ENERGY_TOL,
            }
        })
        .collect())
}
