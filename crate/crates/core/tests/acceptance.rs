//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p lrising-core --test acceptance`. Set
//! `ACCEPTANCE_ONLY=3,7` to run a subset.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use lrising_core::contour::ENERGY_TOL;
use lrising_core::entropy::MAX_ENTROPY_MASS;
use lrising_core::enumerate::{compatible_family, random_compatible, random_extension};
use lrising_core::exact::{ExactCouplings, ExactEnergy};
use lrising_core::sampler::{empirical_distribution, exact_distribution, total_variation};
use lrising_core::squares::{random_squares, squares_are_contours};
use lrising_core::tree::Rule;
use lrising_core::*;

type Criterion = (u32, &'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

/// Triangles sorted by nondecreasing mass.
fn by_mass(tris: &TriangleConfiguration) -> Vec<Triangle> {
    let mut v = tris.triangles().to_vec();
    v.sort_by_key(|t| (t.mass(), t.lo));
    v
}

fn c1_bijection() -> Outcome {
    let window = Window::centered(16).unwrap();
    let mut bad = 0u32;
    for bits in 0..1u64 << 16 {
        let sigma = SpinConfiguration::from_bits(window, bits);
        let tris = build_triangles(&sigma);
        let back = spins_from_triangles(&tris, window).unwrap();
        if back != sigma || !check_compatibility(&tris) {
            bad += 1;
        }
    }
    outcome(bad == 0, format!("65536 configurations, {bad} failures"))
}

fn c2_telescoping() -> Outcome {
    let family = compatible_family(14, 4);
    let exact = ExactCouplings::new(BigRational::from_integer(BigInt::from(10)));
    let mut worst = 0.0f64;
    let mut exact_bad = 0u64;
    for tris in &family {
        let order = by_mass(tris);
        for alpha in [0.25, 0.5] {
            let params = ModelParams::new(alpha, 10.0).unwrap();
            let mut rest = tris.clone();
            let mut sum = 0.0;
            for t in &order {
                let next = rest.without(&[*t]);
                sum += conditional_energy(&TriangleConfiguration::new(vec![*t]), &next, &params).unwrap();
                rest = next;
            }
            let table = CouplingTable::new(params, 14);
            worst = worst.max((sum - table.triangle_energy(tris.triangles())).abs());
        }
        let mut rest = tris.clone();
        let mut sum = ExactEnergy::zero();
        for t in &order {
            let next = rest.without(&[*t]);
            sum = sum + (exact.triangle_energy(&rest).unwrap() - exact.triangle_energy(&next).unwrap());
            rest = next;
        }
        if sum != exact.triangle_energy(tris).unwrap() {
            exact_bad += 1;
        }
    }
    outcome(
        worst < 1e-9 && exact_bad == 0,
        format!(
            "{} configurations, max |error| {worst:.2e} (alpha 0.25, 0.5), {exact_bad} exact mismatches (alpha 0)",
            family.len()
        ),
    )
}

fn c3_energy_bounds() -> Outcome {
    let family = compatible_family(14, 4);
    let mut cond_bad = 0u64;
    let mut bound_bad = 0u64;
    let mut min_margin = f64::INFINITY;
    for alpha in [0.0, 0.25, 0.5] {
        let params = ModelParams::new(alpha, 10.0).unwrap();
        let zeta = zeta_alpha(alpha).unwrap();
        let table = CouplingTable::new(params, 14);
        let w = triangle_w(params, 14);
        for tris in &family {
            let order = by_mass(tris);
            let mut rest = tris.clone();
            let mut e_rest = table.triangle_energy(rest.triangles());
            for t in &order {
                let next = rest.without(&[*t]);
                let e_next = table.triangle_energy(next.triangles());
                let term = e_rest - e_next;
                if term < w.value(t.mass()) - ENERGY_TOL {
                    cond_bad += 1;
                }
                rest = next;
                e_rest = e_next;
            }
            let lhs = table.triangle_energy(tris.triangles());
            let rhs = zeta * order.iter().map(|t| h_alpha(alpha, t.mass())).sum::<f64>();
            min_margin = min_margin.min(lhs - rhs);
            if lhs < rhs - ENERGY_TOL {
                bound_bad += 1;
            }
        }
    }
    outcome(
        cond_bad == 0 && bound_bad == 0,
        format!(
            "{} configurations x 3 alphas: {cond_bad} conditional-energy violations, {bound_bad} total-energy violations, min margin {min_margin:.4}",
            family.len()
        ),
    )
}

fn triangle_w(params: ModelParams, max_l: u64) -> WKernel {
    WKernel::new(params, max_l)
}

fn c4_w_scan() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for alpha in [0.5, 0.0] {
        let big = walpha_scan(alpha, 10.0, 100_000).unwrap();
        let small = walpha_scan(alpha, 10.0, 10_000).unwrap();
        let stable = (big.min_j1 * 100.0).round() == (small.min_j1 * 100.0).round();
        pass &= big.holds() && stable;
        parts.push(format!(
            "alpha {alpha}: {} violations, min slack {:.4} at L={}, min j1 {:.4} (1e4) vs {:.4} (1e5)",
            big.violations, big.min_slack, big.argmin, small.min_j1, big.min_j1
        ));
    }
    outcome(pass, parts.join("; "))
}

fn c5_uniqueness_monotonicity() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = DEFAULT_C;
    let mut differ = 0;
    for _ in 0..1000 {
        let tris = random_compatible(&mut rng, 8, 60);
        let reference = decompose(&tris, c).unwrap();
        for _ in 0..50 {
            let mut shuffled = tris.triangles().to_vec();
            shuffled.shuffle(&mut rng);
            let p = decompose_random_order(&TriangleConfiguration::new(shuffled), c, &mut rng).unwrap();
            if p != reference {
                differ += 1;
            }
        }
    }
    let mut splits = 0;
    let mut trials = 0;
    while trials < 1000 {
        let tris = random_compatible(&mut rng, 6, 60);
        let Some(t) = random_extension(&mut rng, &tris, 60) else {
            continue;
        };
        trials += 1;
        let before = decompose(&tris, c).unwrap();
        let after = decompose(&tris.union(&TriangleConfiguration::new(vec![t])), c).unwrap();
        for g in before.contours() {
            let home = after.contour_of(&g.triangles()[0]).unwrap();
            if !g.triangles().iter().all(|t| home.triangles().contains(t)) {
                splits += 1;
            }
        }
    }
    outcome(
        differ == 0 && splits == 0,
        format!("50000 shuffled merges: {differ} differing partitions; 1000 insertions: {splits} split contours"),
    )
}

/// `sum_{M=1}^{10^7} 4M / floor(c M^3)` plus the integral tail.
fn separation_oracle(c: f64) -> f64 {
    let n = 10_000_000u64;
    let mut terms: Vec<f64> = (1..=n)
        .map(|m| {
            let mf = m as f64;
            4.0 * mf / (c * mf * mf * mf).floor()
        })
        .collect();
    terms.reverse();
    terms.iter().sum::<f64>() + 4.0 / (c * n as f64)
}

fn c6_verify_c() -> Outcome {
    let s15 = verify_c(15.0).unwrap();
    let s8 = verify_c(8.0).unwrap();
    let (o15, o8) = (separation_oracle(15.0), separation_oracle(8.0));
    let pass = s15.ok
        && (0.40..=0.50).contains(&s15.sum)
        && !s8.ok
        && (s15.sum - o15).abs() < 1e-6
        && (s8.sum - o8).abs() < 1e-6;
    outcome(
        pass,
        format!(
            "c=15: {:.9} (oracle {o15:.9}, ok={}); c=8: {:.9} (oracle {o8:.9}, ok={})",
            s15.sum, s15.ok, s8.sum, s8.ok
        ),
    )
}

fn c7_peierls() -> Outcome {
    let family = compatible_family(12, 3);
    let mut checked = 0u64;
    let mut bad = 0u64;
    let mut min_margin = f64::INFINITY;
    for alpha in [0.0, 0.5] {
        let params = ModelParams::new(alpha, 10.0).unwrap();
        let pp = PeierlsParams::new(DEFAULT_C, 1.0, zeta_alpha(alpha).unwrap()).unwrap();
        for tris in &family {
            for r in peierls_check_all(tris, &params, &pp).unwrap() {
                checked += 1;
                min_margin = min_margin.min(r.margin());
                if !r.holds {
                    bad += 1;
                }
            }
        }
    }
    outcome(
        bad == 0,
        format!(
            "{checked} contours over {} configurations x 2 alphas: {bad} violations, min margin {min_margin:.4}",
            family.len()
        ),
    )
}

/// Every contour of the exhaustive family, as its own configuration.
fn contour_family(c: f64) -> Vec<TriangleConfiguration> {
    let mut out: Vec<TriangleConfiguration> = Vec::new();
    for tris in compatible_family(12, 3) {
        for g in decompose(&tris, c).unwrap().contours() {
            out.push(g.configuration());
        }
    }
    out
}

fn c8_square_process() -> Outcome {
    let c = DEFAULT_C;
    let family = contour_family(c);
    let mut bad = 0u64;
    let mut steps = 0u64;
    for tris in &family {
        let trace = run_square_process(tris, c).unwrap();
        let ok_end = trace.times[trace.t_f()].len() == 1 && trace.final_square().mass == tris.mass();
        let mut ok_arrows = true;
        for t in 0..trace.t_f() {
            steps += 1;
            ok_arrows &= arrow_lemma_checks(&trace.times[t], c).unwrap().holds();
        }
        if !(ok_end && ok_arrows && squares_are_contours(&trace)) {
            bad += 1;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut random_bad = 0;
    for i in 0..1000 {
        let squares = random_squares(&mut rng, 2 + i % 12, 6, 40);
        let c = [0.5, 1.0, 2.0, 15.0][i % 4];
        match arrow_lemma_checks(&squares, c) {
            Ok(r) if r.holds() => {}
            _ => random_bad += 1,
        }
    }
    outcome(
        bad == 0 && random_bad == 0,
        format!(
            "{} contours ({steps} steps): {bad} failures; 1000 random square sets: {random_bad} failures",
            family.len()
        ),
    )
}

fn c9_tree_constraints() -> Outcome {
    let c = DEFAULT_C;
    let family = contour_family(c);
    let mut violations = 0usize;
    let mut nodes = 0usize;
    let mut planted_tree = None;
    for tris in &family {
        let tree = extract_tree(&run_square_process(tris, c).unwrap(), tris).unwrap();
        let r = validate_tree_constraints(&tree, Some(tris));
        violations += r.violations.len();
        nodes += r.nodes;
        if planted_tree.is_none() && !tree.root.children.is_empty() {
            planted_tree = Some((tree, tris.clone()));
        }
    }
    // Plant a mass violation: one child loses a site.
    let (mut tree, tris) = planted_tree.expect("family has a branching tree");
    tree.root.children[0].mass += 1;
    let planted = validate_tree_constraints(&tree, Some(&tris));
    let detected = planted.violations.iter().any(|v| v.rule == Rule::MassConservation);
    outcome(
        violations == 0 && detected,
        format!(
            "{} trees, {nodes} nodes: {violations} violations; planted mass violation detected={detected}",
            family.len()
        ),
    )
}

fn c10_entropy() -> Outcome {
    let c = DEFAULT_C;
    let mut pass = MAX_ENTROPY_MASS >= 6;
    let mut parts = Vec::new();
    for m in 1..=6u64 {
        for b in [8.0, 12.0] {
            let r = enumerate_g(m, c, b, 0.5).unwrap();
            let r0 = enumerate_g(m, c, b, 0.0).unwrap();
            pass &= r.pass && r0.pass;
            if b == 8.0 {
                parts.push(format!(
                    "m={m}: G/bound {:.3} (alpha 0 origin ratio {:.3})",
                    r.g_m / r.bound,
                    r0.origin_sum / r0.origin_bound
                ));
            }
        }
    }
    let mut closed_ok = true;
    for b in [8.0, 12.0] {
        let r = enumerate_g(2, c, b, 0.5).unwrap();
        let closed = (-b * 2f64.sqrt()).exp() + c.floor() * (-2.0 * b).exp();
        closed_ok &= ((r.g_m - closed) / closed).abs() < 1e-13;
    }
    pass &= closed_ok;
    outcome(
        pass,
        format!("b=8: {}; m=2 closed form matches={closed_ok}", parts.join(", ")),
    )
}

fn c11_convexity() -> Outcome {
    let r5 = convexity_check(0.5, 1.0, 10.0, 4, 200).unwrap();
    let r0 = convexity_check(0.0, 1.0, 10.0, 4, 200).unwrap();
    let b = 10.0;
    let tight = convexity_check(0.5, b * (2.0 - 2f64.sqrt()), b, 2, 1).unwrap();
    let pass = r5.violations == 0 && r0.violations == 0 && tight.min_slack.abs() < 1e-9;
    outcome(
        pass,
        format!(
            "alpha 0.5: {} tuples, {} violations; alpha 0: {} tuples, {} violations; boundary slack {:.2e}",
            r5.checked, r5.violations, r0.checked, r0.violations, tight.min_slack
        ),
    )
}

fn c12_sampler() -> Outcome {
    let base = |window, beta, alpha, j1, sweeps, burn_in| SamplerConfig {
        window,
        beta,
        params: ModelParams::new(alpha, j1).unwrap(),
        sweeps,
        burn_in,
        seed: 12,
        chains: 4,
    };
    let hot = run_chain(&base(64, 0.0, 0.5, 10.0, 20_000, 1_000))
        .unwrap()
        .minus_origin;
    let hot_ok = (hot.mean - 0.5).abs() <= 3.0 * hot.stderr;

    let small = base(4, 1.0, 0.5, 1.0, 250_000, 1_000);
    let s = run_chain(&small).unwrap();
    let tv = total_variation(
        &empirical_distribution(s.histogram.as_ref().unwrap()),
        &exact_distribution(4, small.beta, &small.params).unwrap(),
    );

    let cold = contour_event_estimate(&base(512, 2.0, 0.5, 10.0, 5_000, 500), DEFAULT_C).unwrap();
    let e = cold.summary.minus_origin;
    let cold_ok = 0.5 - e.mean >= 5.0 * e.stderr;

    let pass = hot_ok && tv < 0.02 && cold_ok && cold.inclusion_failures == 0;
    outcome(
        pass,
        format!(
            "beta=0: {:.4} +- {:.4}; L=4 TV {tv:.4} ({} sweeps total); L=512 beta=2: {:.3e} +- {:.3e}, P(0 in Gamma) {:.3e}, {} inclusion failures",
            hot.mean,
            hot.stderr,
            small.sweeps * small.chains as u64,
            e.mean,
            e.stderr,
            cold.event.mean,
            cold.inclusion_failures
        ),
    )
}

fn main() {
    let criteria: [Criterion; 12] = [
        (1, "spin/triangle bijection", c1_bijection),
        (2, "telescoping energy", c2_telescoping),
        (3, "conditional and total energy bounds", c3_energy_bounds),
        (4, "W(L) lower bound scan", c4_w_scan),
        (5, "contour uniqueness and monotonicity", c5_uniqueness_monotonicity),
        (6, "separation constant", c6_verify_c),
        (7, "Peierls bound", c7_peierls),
        (8, "square process", c8_square_process),
        (9, "tree constraints", c9_tree_constraints),
        (10, "entropy bound", c10_entropy),
        (11, "convexity inequality", c11_convexity),
        (12, "Gibbs sampler", c12_sampler),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|x| x.trim().parse().ok()).collect());
    let mut failed = Vec::new();
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let r = f();
        println!(
            "[{}] {n:>2} {name}: {} ({:.1}s)",
            if r.pass { "PASS" } else { "FAIL" },
            r.detail,
            t.elapsed().as_secs_f64()
        );
        if !r.pass {
            failed.push(n);
        }
    }
    if !failed.is_empty() {
        println!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
