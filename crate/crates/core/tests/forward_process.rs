use negdiff_core::rng::{gaussian_vec, stream, Domain};
use negdiff_core::{forward_diffuse, Schedule};

const DRAWS: usize = 100_000;
const TOL: f64 = 0.02;

#[test]
fn forward_diffusion_moments() {
    let s = Schedule::default();
    let d = 16;
    let x0 = gaussian_vec(&mut stream(11, Domain::ToyData, 0, 0), d);
    for (k, t) in [1usize, 250, 500, 1000].into_iter().enumerate() {
        let mut rng = stream(11, Domain::Chain, k as u32, 0);
        let mut sum = vec![0.0; d];
        let mut sum_sq = vec![0.0; d];
        for _ in 0..DRAWS {
            let eps = gaussian_vec(&mut rng, d);
            let x = forward_diffuse(&x0, t, &eps, &s).unwrap();
            for i in 0..d {
                sum[i] += x[i];
                sum_sq[i] += x[i] * x[i];
            }
        }
        let ab = s.alpha_bar(t);
        let (want_var, noise_sd) = (1.0 - ab, (1.0 - ab).sqrt());
        for i in 0..d {
            let mean = sum[i] / DRAWS as f64;
            let var = sum_sq[i] / DRAWS as f64 - mean * mean;
            let want_mean = ab.sqrt() * x0[i];
            let mean_err = (mean - want_mean).abs() / want_mean.abs().max(noise_sd);
            let var_err = (var - want_var).abs() / want_var;
            assert!(mean_err <= TOL, "t={t} coord {i}: mean {mean} vs {want_mean}");
            assert!(var_err <= TOL, "t={t} coord {i}: var {var} vs {want_var}");
        }
    }
}

#[test]
fn forward_diffusion_is_the_closed_form() {
    let s = Schedule::default();
    let x0 = [0.5, -1.0, 2.0];
    let eps = [1.0, 0.0, -0.5];
    for t in [1, 10, 999, 1000] {
        let ab: f64 = (1..=t).map(|k| 1.0 - s.beta(k)).product();
        let x = forward_diffuse(&x0, t, &eps, &s).unwrap();
        for i in 0..3 {
            let want = ab.sqrt() * x0[i] + (1.0 - ab).sqrt() * eps[i];
            assert!((x[i] - want).abs() < 1e-12);
        }
    }
    assert!(forward_diffuse(&x0, 0, &eps, &s).is_err());
    assert!(forward_diffuse(&x0, 1001, &eps, &s).is_err());
}
