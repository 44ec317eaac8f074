//! Exhaustive and random generators of compatible triangle configurations.

use rand::Rng;

use crate::triangle::{laminar_dist, Triangle, TriangleConfiguration};

/// Laminar and satisfying the pairwise distance condition.
pub(crate) fn compatible_pair(a: &Triangle, b: &Triangle) -> bool {
    let nested = a.is_inside(b) || b.is_inside(a);
    if !(nested || a.is_disjoint(b)) || a == b {
        return false;
    }
    laminar_dist(a, b) >= a.mass().min(b.mass())
}

fn extends(chosen: &[Triangle], t: &Triangle) -> bool {
    chosen.iter().all(|s| compatible_pair(s, t))
}

/// All triangles with basis inside `[0, len - 1]`, ordered by
/// `(lo, descending hi)`.
fn candidates(len: usize) -> Vec<Triangle> {
    let len = len as i64;
    let mut out = Vec::new();
    for lo in 0..len {
        for hi in (lo..len).rev() {
            out.push(Triangle { lo, hi });
        }
    }
    out
}

/// Calls `f` on every nonempty compatible configuration of at most
/// `max_triangles` triangles inside a window of `window_len` sites.
/// Configurations in smaller windows appear as translates.
pub fn for_each_compatible(window_len: usize, max_triangles: usize, mut f: impl FnMut(&[Triangle])) {
    let cands = candidates(window_len);
    let mut chosen = Vec::with_capacity(max_triangles);
    fn rec(cands: &[Triangle], start: usize, chosen: &mut Vec<Triangle>, max: usize, f: &mut impl FnMut(&[Triangle])) {
        for i in start..cands.len() {
            let t = cands[i];
            if !extends(chosen, &t) {
                continue;
            }
            chosen.push(t);
            f(chosen);
            if chosen.len() < max {
                rec(cands, i + 1, chosen, max, f);
            }
            chosen.pop();
        }
    }
    rec(&cands, 0, &mut chosen, max_triangles, &mut f);
}

/// Collected form of [`for_each_compatible`].
pub fn compatible_family(window_len: usize, max_triangles: usize) -> Vec<TriangleConfiguration> {
    let mut out = Vec::new();
    for_each_compatible(window_len, max_triangles, |ts| {
        out.push(TriangleConfiguration::new(ts.to_vec()))
    });
    out
}

/// Calls `f` on every compatible configuration inside `[0, window_len - 1]`
/// of total mass exactly `mass` with some triangle starting at site 0.
pub fn for_each_anchored_with_mass(window_len: usize, mass: u64, mut f: impl FnMut(&[Triangle])) {
    fn rec(window_len: i64, start: (i64, i64), left: u64, chosen: &mut Vec<Triangle>, f: &mut impl FnMut(&[Triangle])) {
        if left == 0 {
            f(chosen);
            return;
        }
        // candidates after `start` in (lo, descending hi) order
        let (lo0, hi0) = start;
        for lo in lo0..window_len {
            let top = if lo == lo0 { hi0 - 1 } else { window_len - 1 };
            let top = top.min(lo + left as i64 - 1);
            for hi in (lo..=top).rev() {
                let t = Triangle { lo, hi };
                if !extends(chosen, &t) {
                    continue;
                }
                chosen.push(t);
                rec(window_len, (lo, hi), left - t.mass(), chosen, f);
                chosen.pop();
            }
        }
    }
    let w = window_len as i64;
    let mut chosen = Vec::new();
    for hi in (0..w.min(mass as i64)).rev() {
        let t = Triangle { lo: 0, hi };
        chosen.push(t);
        rec(w, (0, hi), mass - t.mass(), &mut chosen, &mut f);
        chosen.pop();
    }
}

/// Random compatible configuration of at most `max_triangles` triangles in
/// `[0, window_len - 1]`, built by rejection of incompatible additions.
/// Masses are drawn small so that triangles cluster.
pub fn random_compatible<R: Rng + ?Sized>(
    rng: &mut R,
    max_triangles: usize,
    window_len: usize,
) -> TriangleConfiguration {
    let target = rng.gen_range(1..=max_triangles.max(1));
    let w = window_len as i64;
    let mut chosen: Vec<Triangle> = Vec::with_capacity(target);
    let mut attempts = 0;
    while chosen.len() < target && attempts < 200 {
        attempts += 1;
        let max_mass = if rng.gen_bool(0.2) { w } else { 4.min(w) };
        let mass = rng.gen_range(1..=max_mass);
        let lo = rng.gen_range(0..=w - mass);
        let t = Triangle { lo, hi: lo + mass - 1 };
        if extends(&chosen, &t) {
            chosen.push(t);
        }
    }
    TriangleConfiguration::new(chosen)
}

/// One triangle compatible with `tris`, drawn by rejection; `None` if none
/// was found.
pub fn random_extension<R: Rng + ?Sized>(
    rng: &mut R,
    tris: &TriangleConfiguration,
    window_len: usize,
) -> Option<Triangle> {
    let w = window_len as i64;
    for _ in 0..500 {
        let mass = rng.gen_range(1..=w.min(6));
        let lo = rng.gen_range(0..=w - mass);
        let t = Triangle { lo, hi: lo + mass - 1 };
        if extends(tris.triangles(), &t) {
            return Some(t);
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::triangle::check_compatibility;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::collections::HashSet;

    fn brute_force(window_len: usize, max: usize) -> HashSet<Vec<Triangle>> {
        let cands = candidates(window_len);
        let mut out = HashSet::new();
        let n = cands.len();
        assert!(n <= 21);
        for bits in 1u32..(1 << n) {
            if bits.count_ones() as usize > max {
                continue;
            }
            let set: Vec<Triangle> = (0..n).filter(|i| bits >> i & 1 == 1).map(|i| cands[i]).collect();
            let cfg = TriangleConfiguration::new(set);
            if check_compatibility(&cfg) {
                out.insert(cfg.triangles().to_vec());
            }
        }
        out
    }

    #[test]
    fn family_matches_subset_scan() {
        for (len, max) in [(4, 4), (5, 3), (6, 6)] {
            let got: HashSet<Vec<Triangle>> = compatible_family(len, max)
                .into_iter()
                .map(|c| c.triangles().to_vec())
                .collect();
            assert_eq!(got, brute_force(len, max), "len={len} max={max}");
        }
    }

    #[test]
    fn anchored_mass_matches_filter() {
        for (len, m) in [(8, 3), (9, 4)] {
            let mut got = HashSet::new();
            for_each_anchored_with_mass(len, m, |ts| {
                assert!(got.insert(TriangleConfiguration::new(ts.to_vec())));
            });
            let expected: HashSet<TriangleConfiguration> = compatible_family(len, m as usize)
                .into_iter()
                .filter(|c| c.mass() == m && c.triangles()[0].lo == 0)
                .collect();
            assert_eq!(got, expected);
        }
    }

    #[test]
    fn random_configurations_are_compatible() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..500 {
            let c = random_compatible(&mut rng, 6, 30);
            assert!(check_compatibility(&c));
            assert!(!c.is_empty());
            if let Some(t) = random_extension(&mut rng, &c, 30) {
                let mut v = c.triangles().to_vec();
                v.push(t);
                assert!(check_compatibility(&TriangleConfiguration::new(v)));
            }
        }
    }
}
