use negdiff_core::rng::{gaussian_vec, stream, Domain, StreamRng};
use negdiff_core::{distance, draw_contexts, select_negatives, IdentityContext, NegativeSource, Strategy};
use proptest::prelude::*;
use rand::Rng;

fn unit(v: &[f64]) -> Vec<f64> {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    v.iter().map(|x| x / n).collect()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    let (a, b) = (unit(a), unit(b));
    a.iter().zip(&b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
}

// O(N²) reference; distance ties go to the smaller id
fn oracle(ctx: &[IdentityContext], strategy: Strategy) -> Vec<usize> {
    let n = ctx.len();
    (0..n)
        .map(|i| {
            let mut c: Vec<(f64, usize)> = (0..n)
                .filter(|&j| j != i)
                .map(|j| (dist(&ctx[i].vector, &ctx[j].vector), j))
                .collect();
            match strategy {
                Strategy::CloseNeg => {
                    let mut best = c[0];
                    for &x in &c {
                        if x.0 < best.0 {
                            best = x;
                        }
                    }
                    best.1
                }
                Strategy::FarNeg => {
                    let mut best = c[0];
                    for &x in &c {
                        if x.0 > best.0 {
                            best = x;
                        }
                    }
                    best.1
                }
                Strategy::MidNeg => {
                    c.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
                    c[(n - 2) / 2].1
                }
                _ => unreachable!(),
            }
        })
        .collect()
}

fn chosen(ctx: &[IdentityContext], strategy: Strategy) -> Vec<usize> {
    select_negatives::<StreamRng>(ctx, strategy, None)
        .unwrap()
        .pairs
        .iter()
        .map(|p| match p.source {
            NegativeSource::Context(j) => j,
            NegativeSource::Null => panic!("context strategy produced a null negative"),
        })
        .collect()
}

fn random_contexts(seed: u64) -> Vec<IdentityContext> {
    let mut rng = stream(seed, Domain::Contexts, 5, 0);
    let n = rng.random_range(2..=50);
    let dim = rng.random_range(1..=16);
    let normalize = rng.random_bool(0.5);
    draw_contexts(n, dim, &mut rng, normalize).unwrap()
}

const CONTEXT_STRATEGIES: [Strategy; 3] = [Strategy::CloseNeg, Strategy::MidNeg, Strategy::FarNeg];

#[test]
fn assignments_match_the_quadratic_oracle() {
    for seed in 0..100 {
        let ctx = random_contexts(seed);
        for s in CONTEXT_STRATEGIES {
            assert_eq!(chosen(&ctx, s), oracle(&ctx, s), "seed {seed}, {s}");
        }
    }
}

#[test]
fn close_mid_far_distances_are_ordered() {
    for seed in 0..100 {
        let ctx = random_contexts(seed);
        let [c, m, f] = CONTEXT_STRATEGIES.map(|s| chosen(&ctx, s));
        for i in 0..ctx.len() {
            let d = |j: usize| distance(&ctx[i].vector, &ctx[j].vector).unwrap();
            assert!(d(c[i]) <= d(m[i]) && d(m[i]) <= d(f[i]), "seed {seed}, context {i}");
            assert!(c[i] != i && m[i] != i && f[i] != i);
        }
    }
}

#[test]
fn positive_rescaling_keeps_assignments() {
    for seed in 0..100 {
        let ctx = random_contexts(seed);
        let factor = [1e-3, 0.5, 7.25, 1e4][seed as usize % 4];
        let scaled: Vec<IdentityContext> = ctx
            .iter()
            .map(|c| IdentityContext {
                id: c.id,
                vector: c.vector.iter().map(|x| x * factor).collect(),
            })
            .collect();
        for s in CONTEXT_STRATEGIES {
            assert_eq!(chosen(&ctx, s), chosen(&scaled, s), "seed {seed}, {s}, factor {factor}");
        }
    }
}

#[test]
fn null_negatives_are_zero_vectors() {
    let ctx = random_contexts(4);
    let a = select_negatives::<StreamRng>(&ctx, Strategy::Null, None).unwrap();
    assert!(a
        .pairs
        .iter()
        .all(|p| p.source == NegativeSource::Null && p.vector.iter().all(|&x| x == 0.0)));
}

proptest! {
    #[test]
    fn far_is_at_least_as_far_as_any_candidate(seed in any::<u64>(), n in 2usize..30, dim in 1usize..8) {
        let mut rng = stream(seed, Domain::Contexts, 0, 0);
        let ctx: Vec<IdentityContext> = (0..n)
            .map(|id| IdentityContext { id, vector: gaussian_vec(&mut rng, dim) })
            .collect();
        let far = chosen(&ctx, Strategy::FarNeg);
        let close = chosen(&ctx, Strategy::CloseNeg);
        for i in 0..n {
            for j in (0..n).filter(|&j| j != i) {
                let d = dist(&ctx[i].vector, &ctx[j].vector);
                prop_assert!(d <= dist(&ctx[i].vector, &ctx[far[i]].vector) + 1e-12);
                prop_assert!(d >= dist(&ctx[i].vector, &ctx[close[i]].vector) - 1e-12);
            }
        }
    }
}
