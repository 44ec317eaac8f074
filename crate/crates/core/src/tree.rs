//! Contour trees read off the square process, and the structural
//! constraints they satisfy.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::contour::decompose;
use crate::error::{Error, Result};
use crate::squares::SquareProcessTrace;
use crate::triangle::TriangleConfiguration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NodeKind {
    Black,
    White,
    Sphere,
}

impl NodeKind {
    pub fn is_h_triangle(self) -> bool {
        self != NodeKind::Sphere
    }
}

/// Tree node. `basis` holds the leftmost and rightmost sites covered.
/// Black children are the offspring in left-to-right order; white
/// children are the attached spheres.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TreeNode {
    pub kind: NodeKind,
    pub mass: u64,
    pub basis: [i64; 2],
    pub children: Vec<TreeNode>,
}

impl TreeNode {
    pub fn lo(&self) -> i64 {
        self.basis[0]
    }

    pub fn hi(&self) -> i64 {
        self.basis[1]
    }

    pub fn leaf(kind: NodeKind, lo: i64, hi: i64, mass: u64) -> Self {
        Self {
            kind,
            mass,
            basis: [lo, hi],
            children: Vec::new(),
        }
    }

    /// Number of nodes in the subtree.
    pub fn size(&self) -> usize {
        1 + self.children.iter().map(TreeNode::size).sum::<usize>()
    }

    pub fn depth(&self) -> usize {
        1 + self.children.iter().map(TreeNode::depth).max().unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContourTree {
    pub c: f64,
    pub root: TreeNode,
}

impl ContourTree {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.root).expect("tree serializes")
    }

    pub fn from_json(c: f64, json: &str) -> Result<Self> {
        let root = serde_json::from_str(json).map_err(|e| Error::Parse(e.to_string()))?;
        Ok(Self { c, root })
    }
}

/// Builds the tree of a single contour from its square process. White
/// triangles get their spheres from the contours of the triangles they
/// strictly contain.
pub fn extract_tree(trace: &SquareProcessTrace, tris: &TriangleConfiguration) -> Result<ContourTree> {
    let t_f = trace.t_f();
    if trace.times[t_f].len() != 1 {
        return Err(Error::Internal("trace does not end in a single square".into()));
    }
    let fin = trace.final_square();
    if fin.mass != tris.mass() {
        return Err(Error::Internal(format!(
            "trace mass {} differs from configuration mass {}",
            fin.mass,
            tris.mass()
        )));
    }
    Ok(ContourTree {
        c: trace.c,
        root: node_at(trace, t_f, 0)?,
    })
}

fn node_at(trace: &SquareProcessTrace, t: usize, idx: usize) -> Result<TreeNode> {
    if t == 0 {
        return white_node(trace, idx);
    }
    let step = &trace.steps[t - 1];
    let parts: Vec<usize> = (0..step.next_of.len()).filter(|&j| step.next_of[j] == idx).collect();
    if parts.len() == 1 {
        return node_at(trace, t - 1, parts[0]);
    }
    let square = &trace.times[t][idx];
    // secondary squares between two h-triangles become the contours of
    // their pooled triangles
    let mut children = Vec::new();
    let mut pending = Vec::new();
    for &j in &parts {
        if step.primary[j] {
            children.extend(spheres_of(std::mem::take(&mut pending), trace.c)?);
            children.push(node_at(trace, t - 1, j)?);
        } else {
            pending.extend_from_slice(&trace.times[t - 1][j].members);
        }
    }
    children.extend(spheres_of(pending, trace.c)?);
    Ok(TreeNode {
        kind: NodeKind::Black,
        mass: square.mass,
        basis: [square.lo, square.hi],
        children,
    })
}

fn spheres_of(triangles: Vec<crate::triangle::Triangle>, c: f64) -> Result<Vec<TreeNode>> {
    if triangles.is_empty() {
        return Ok(Vec::new());
    }
    let partition = decompose(&TriangleConfiguration::new(triangles), c)?;
    let mut out: Vec<TreeNode> = partition
        .contours()
        .iter()
        .map(|g| TreeNode::leaf(NodeKind::Sphere, g.x_minus(), g.x_plus(), g.mass()))
        .collect();
    out.sort_by_key(|n| (n.lo(), std::cmp::Reverse(n.hi())));
    Ok(out)
}

fn white_node(trace: &SquareProcessTrace, idx: usize) -> Result<TreeNode> {
    let square = &trace.times[0][idx];
    let inner: Vec<_> = square
        .members
        .iter()
        .copied()
        .filter(|t| !(t.lo == square.lo && t.hi == square.hi))
        .collect();
    let children = spheres_of(inner, trace.c)?;
    Ok(TreeNode {
        kind: NodeKind::White,
        mass: square.mass,
        basis: [square.lo, square.hi],
        children,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Rule {
    /// Black node with fewer than two h-triangles, or a leaf with children.
    Branching,
    MassConservation,
    /// Children overlap, are out of order, or stick out of their parent.
    Ordering,
    /// Consecutive h-triangles farther apart than `c min(|G|^3, |G'|^3)`.
    HTriangleGap,
    /// No split index makes the sphere chains between two h-triangles, or
    /// inside a white triangle, satisfy the `c |G|^3 + 1` bounds.
    SphereChain,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeViolation {
    pub rule: Rule,
    /// Child indices from the root.
    pub path: Vec<usize>,
    pub detail: String,
}

impl fmt::Display for TreeViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?} at {:?}: {}", self.rule, self.path, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TreeReport {
    pub nodes: usize,
    pub violations: Vec<TreeViolation>,
}

impl TreeReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks branching rules, mass conservation, ordering, the h-triangle gap
/// bound and the sphere chain bounds over the whole tree. With `tris`, the
/// root must also carry its total mass and hull.
pub fn validate_tree_constraints(tree: &ContourTree, tris: Option<&TriangleConfiguration>) -> TreeReport {
    let mut report = TreeReport {
        nodes: tree.root.size(),
        violations: Vec::new(),
    };
    if let Some(tris) = tris {
        if tree.root.mass != tris.mass() {
            report.violations.push(TreeViolation {
                rule: Rule::MassConservation,
                path: Vec::new(),
                detail: format!("root mass {} but configuration mass {}", tree.root.mass, tris.mass()),
            });
        }
        if let Some(h) = tris.hull() {
            if tree.root.basis != [h.lo, h.hi] {
                report.violations.push(TreeViolation {
                    rule: Rule::Ordering,
                    path: Vec::new(),
                    detail: format!("root basis {:?} but hull {h}", tree.root.basis),
                });
            }
        }
    }
    let mut path = Vec::new();
    check_node(&tree.root, tree.c, &mut path, &mut report.violations);
    report
}

fn cubic(c: f64, m: u64) -> f64 {
    c * (m as f64).powi(3)
}

fn check_node(node: &TreeNode, c: f64, path: &mut Vec<usize>, out: &mut Vec<TreeViolation>) {
    let mut push = |rule, detail: String, path: &Vec<usize>| {
        out.push(TreeViolation {
            rule,
            path: path.clone(),
            detail,
        })
    };
    let kids = &node.children;
    for (i, w) in kids.windows(2).enumerate() {
        if w[0].hi() >= w[1].lo() {
            push(
                Rule::Ordering,
                format!("children {i} and {} overlap or are unordered", i + 1),
                path,
            );
        }
    }
    if let (Some(first), Some(last)) = (kids.first(), kids.last()) {
        let inside = match node.kind {
            NodeKind::White => node.lo() < first.lo() && last.hi() < node.hi(),
            _ => node.lo() <= first.lo() && last.hi() <= node.hi(),
        };
        if !inside {
            push(Rule::Ordering, "children leave the parent basis".into(), path);
        }
    }
    let child_mass: u64 = kids.iter().map(|k| k.mass).sum();
    match node.kind {
        NodeKind::Sphere => {
            if !kids.is_empty() {
                push(Rule::Branching, "sphere with children".into(), path);
            }
        }
        NodeKind::White => {
            if kids.iter().any(|k| k.kind != NodeKind::Sphere) {
                push(Rule::Branching, "white triangle with h-triangle children".into(), path);
            }
            let own = (node.hi() - node.lo() + 1) as u64;
            if node.mass != own + child_mass {
                push(
                    Rule::MassConservation,
                    format!("white mass {} != {own} + {child_mass}", node.mass),
                    path,
                );
            }
            if !sphere_chain_ok(node.lo(), node.hi(), kids, c) {
                push(Rule::SphereChain, "attached spheres".into(), path);
            }
        }
        NodeKind::Black => {
            let h: Vec<usize> = (0..kids.len()).filter(|&i| kids[i].kind.is_h_triangle()).collect();
            if h.len() < 2 {
                push(
                    Rule::Branching,
                    format!("black triangle with {} h-triangles", h.len()),
                    path,
                );
            }
            if node.mass != child_mass {
                push(
                    Rule::MassConservation,
                    format!("black mass {} != offspring mass {child_mass}", node.mass),
                    path,
                );
            }
            if let (Some(&first), Some(&last)) = (h.first(), h.last()) {
                if first != 0 || last != kids.len() - 1 {
                    push(Rule::Ordering, "sphere outside the h-triangle span".into(), path);
                }
                if kids[first].lo() != node.lo() || kids[last].hi() != node.hi() {
                    push(Rule::Ordering, "h-triangles do not span the parent basis".into(), path);
                }
            }
            for w in h.windows(2) {
                let (l, r) = (&kids[w[0]], &kids[w[1]]);
                let gap = r.lo() - l.hi() - 1;
                let bound = cubic(c, l.mass.min(r.mass));
                if gap < 0 || gap as f64 > bound {
                    push(
                        Rule::HTriangleGap,
                        format!("h-triangles {} and {}: gap {gap} > {bound}", w[0], w[1]),
                        path,
                    );
                }
                if !sphere_chain_ok(l.hi(), r.lo(), &kids[w[0] + 1..w[1]], c) {
                    push(
                        Rule::SphereChain,
                        format!("spheres between h-triangles {} and {}", w[0], w[1]),
                        path,
                    );
                }
            }
        }
    }
    for (i, k) in kids.iter().enumerate() {
        path.push(i);
        check_node(k, c, path, out);
        path.pop();
    }
}

/// Sphere chain between sites `a` and `b` (exclusive). Gap `g_1` runs from
/// `a` to the first sphere, `g_{k+1}` from the last sphere to `b`. Some
/// `p` must give `g_j <= c m_j^3 + 1` for `j <= p` and
/// `g_{j+1} <= c m_j^3 + 1` for `j > p`; every gap must be nonnegative.
pub fn sphere_chain_ok(a: i64, b: i64, spheres: &[TreeNode], c: f64) -> bool {
    let k = spheres.len();
    if k == 0 {
        return true;
    }
    let mut gaps = Vec::with_capacity(k + 1);
    gaps.push(spheres[0].lo() - a - 1);
    for w in spheres.windows(2) {
        gaps.push(w[1].lo() - w[0].hi() - 1);
    }
    gaps.push(b - spheres[k - 1].hi() - 1);
    if gaps.iter().any(|&g| g < 0) {
        return false;
    }
    let fits = |g: i64, m: u64| g as f64 <= cubic(c, m) + 1.0;
    // left[p]: chain holds for j = 1..=p; right[p]: for j = p+1..=k
    let mut left = vec![true; k + 1];
    for j in 1..=k {
        left[j] = left[j - 1] && fits(gaps[j - 1], spheres[j - 1].mass);
    }
    let mut right = vec![true; k + 1];
    for p in (0..k).rev() {
        right[p] = right[p + 1] && fits(gaps[p + 1], spheres[p].mass);
    }
    (0..=k).any(|p| left[p] && right[p])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::squares::run_square_process;
    use crate::triangle::Triangle;

    fn cfg(ts: &[(i64, i64)]) -> TriangleConfiguration {
        ts.iter().map(|&(a, b)| Triangle::new(a, b).unwrap()).collect()
    }

    fn tree_of(tris: &TriangleConfiguration, c: f64) -> ContourTree {
        extract_tree(&run_square_process(tris, c).unwrap(), tris).unwrap()
    }

    #[test]
    fn white_root_examples() {
        let lone = tree_of(&cfg(&[(0, 4)]), 15.0);
        assert_eq!(lone.root, TreeNode::leaf(NodeKind::White, 0, 4, 5));
        let nested = tree_of(&cfg(&[(0, 9), (4, 4)]), 15.0);
        assert_eq!(nested.root.kind, NodeKind::White);
        assert_eq!(nested.root.mass, 11);
        assert_eq!(nested.root.children, vec![TreeNode::leaf(NodeKind::Sphere, 4, 4, 1)]);
        assert!(validate_tree_constraints(&nested, None).is_valid());
    }

    #[test]
    fn black_root_with_two_whites() {
        let tris = cfg(&[(0, 0), (5, 5)]);
        let tree = tree_of(&tris, 15.0);
        assert_eq!(tree.root.kind, NodeKind::Black);
        assert_eq!(
            tree.root.children,
            vec![
                TreeNode::leaf(NodeKind::White, 0, 0, 1),
                TreeNode::leaf(NodeKind::White, 5, 5, 1)
            ]
        );
        assert!(validate_tree_constraints(&tree, Some(&tris)).is_valid());
    }

    #[test]
    fn hierarchy_gives_nested_black_nodes() {
        let tris = cfg(&[(0, 0), (2, 2), (17, 17), (19, 19)]);
        let tree = tree_of(&tris, 2.0);
        assert_eq!(tree.root.depth(), 3);
        assert!(tree.root.children.iter().all(|k| k.kind == NodeKind::Black));
        assert!(validate_tree_constraints(&tree, Some(&tris)).is_valid());
    }

    #[test]
    fn secondary_square_becomes_sphere() {
        // the unit triangle only points at its left neighbour; the arrow
        // between the mass-5 triangles shadows it
        let tris = cfg(&[(0, 4), (6, 6), (10, 14)]);
        let tree = tree_of(&tris, 1.0);
        let kinds: Vec<NodeKind> = tree.root.children.iter().map(|k| k.kind).collect();
        assert_eq!(kinds, vec![NodeKind::White, NodeKind::Sphere, NodeKind::White]);
        assert!(validate_tree_constraints(&tree, Some(&tris)).is_valid());
    }

    #[test]
    fn secondary_squares_pool_into_one_sphere() {
        // [27..29], [40] and [42] are separate secondary squares when the
        // root forms; together they are one contour
        let tris = cfg(&[
            (1, 2),
            (11, 13),
            (12, 12),
            (18, 21),
            (27, 29),
            (40, 40),
            (42, 42),
            (58, 98),
            (109, 112),
        ]);
        let tree = tree_of(&tris, 2.0);
        let spheres: Vec<&TreeNode> = tree
            .root
            .children
            .iter()
            .filter(|k| k.kind == NodeKind::Sphere)
            .collect();
        assert_eq!(spheres.len(), 1);
        assert_eq!(spheres[0].basis, [27, 42]);
        assert_eq!(spheres[0].mass, 5);
        assert!(validate_tree_constraints(&tree, Some(&tris)).is_valid());
    }

    #[test]
    fn planted_gap_violation_is_reported() {
        let root = TreeNode {
            kind: NodeKind::Black,
            mass: 2,
            basis: [0, 20],
            children: vec![
                TreeNode::leaf(NodeKind::White, 0, 0, 1),
                TreeNode::leaf(NodeKind::White, 20, 20, 1),
            ],
        };
        let report = validate_tree_constraints(&ContourTree { c: 15.0, root }, None);
        assert_eq!(report.violations.len(), 1);
        assert_eq!(report.violations[0].rule, Rule::HTriangleGap);
    }

    #[test]
    fn planted_branching_and_mass_violations() {
        let root = TreeNode {
            kind: NodeKind::Black,
            mass: 3,
            basis: [0, 0],
            children: vec![TreeNode::leaf(NodeKind::White, 0, 0, 1)],
        };
        let rules: Vec<Rule> = validate_tree_constraints(&ContourTree { c: 15.0, root }, None)
            .violations
            .iter()
            .map(|v| v.rule)
            .collect();
        assert!(rules.contains(&Rule::Branching));
        assert!(rules.contains(&Rule::MassConservation));
    }

    #[test]
    fn sphere_chain_split() {
        let s = |lo, hi, m| TreeNode::leaf(NodeKind::Sphere, lo, hi, m);
        // c = 1: a unit sphere tolerates gap 2 on its bound side
        assert!(sphere_chain_ok(0, 100, &[s(3, 3, 1), s(97, 97, 1)], 1.0));
        assert!(!sphere_chain_ok(0, 100, &[s(4, 4, 1), s(97, 97, 1)], 1.0));
        assert!(!sphere_chain_ok(
            0,
            100,
            &[s(3, 3, 1), s(6, 6, 1), s(50, 50, 1), s(97, 97, 1)],
            1.0
        ));
        assert!(sphere_chain_ok(
            0,
            100,
            &[s(3, 3, 1), s(6, 6, 1), s(94, 94, 1), s(97, 97, 1)],
            1.0
        ));
        assert!(!sphere_chain_ok(0, 10, &[s(0, 0, 1)], 1.0), "negative gap");
    }

    #[test]
    fn json_round_trip() {
        let tree = tree_of(&cfg(&[(0, 9), (4, 4)]), 15.0);
        let json = tree.to_json();
        assert!(json.contains("\"kind\": \"white\""));
        assert_eq!(ContourTree::from_json(15.0, &json).unwrap(), tree);
    }
}
