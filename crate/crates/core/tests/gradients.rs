use negdiff_core::denoiser::{squared_error_loss, Example};
use negdiff_core::rng::{gaussian_vec, stream, Domain};
use negdiff_core::{time_embedding, Denoiser, DenoiserConfig};
use rand::Rng;

const STEP: f64 = 1e-4;
const MAX_REL: f64 = 1e-4;
// gradients smaller than this are compared absolutely
const FLOOR: f64 = 1e-6;

fn tiny_net(seed: u64) -> (Denoiser, Vec<Vec<f64>>) {
    let mut rng = stream(seed, Domain::Init, 7, 0);
    let config = DenoiserConfig {
        data_dim: rng.random_range(2..=4),
        cond_dim: rng.random_range(1..=3),
        time_dim: 2 * rng.random_range(1..=3),
        hidden: (0..rng.random_range(1..=2)).map(|_| rng.random_range(3..=8)).collect(),
    };
    let model = Denoiser::new(config.clone(), 50, &mut rng).unwrap();
    // three examples: x_t, cond, target, flattened per example
    let batch = (0..3)
        .flat_map(|_| {
            [
                gaussian_vec(&mut rng, config.data_dim),
                vec![rng.random_range(1..=50) as f64],
                gaussian_vec(&mut rng, config.cond_dim),
                gaussian_vec(&mut rng, config.data_dim),
            ]
        })
        .collect();
    (model, batch)
}

fn loss(model: &Denoiser, data: &[Vec<f64>]) -> (f64, Vec<f64>) {
    let batch: Vec<Example> = data
        .chunks(4)
        .map(|c| Example {
            x_t: &c[0],
            t: c[1][0] as usize,
            cond: &c[2],
            target: &c[3],
        })
        .collect();
    let (l, g) = squared_error_loss(model, &batch).unwrap();
    (l, g.flatten())
}

#[test]
fn analytic_gradients_match_central_differences() {
    let mut nets = 0;
    for seed in 0..10 {
        let (mut model, data) = tiny_net(seed);
        assert!(
            model.num_params() <= 500,
            "net {seed} has {} params",
            model.num_params()
        );
        let (_, analytic) = loss(&model, &data);
        let theta = model.flatten();
        let mut worst: f64 = 0.0;
        for i in 0..theta.len() {
            let mut p = theta.clone();
            p[i] = theta[i] + STEP;
            model.set_flat(&p).unwrap();
            let up = loss(&model, &data).0;
            p[i] = theta[i] - STEP;
            model.set_flat(&p).unwrap();
            let down = loss(&model, &data).0;
            let numeric = (up - down) / (2.0 * STEP);
            let rel = (analytic[i] - numeric).abs() / analytic[i].abs().max(numeric.abs()).max(FLOOR);
            worst = worst.max(rel);
        }
        model.set_flat(&theta).unwrap();
        assert!(worst <= MAX_REL, "net {seed}: max relative error {worst:e}");
        nets += 1;
    }
    assert_eq!(nets, 10);
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

// straightforward re-derivation of the forward pass from the raw parameters
fn reference_forward(model: &Denoiser, x: &[f64], t: usize, p: &[f64]) -> Vec<f64> {
    let mut a: Vec<f64> = x.to_vec();
    a.extend(time_embedding(t, model.config().time_dim, model.max_step()).unwrap());
    a.extend_from_slice(p);
    let n = model.layers().len();
    for (li, layer) in model.layers().iter().enumerate() {
        let mut z = vec![0.0; layer.out_dim];
        for (o, zo) in z.iter_mut().enumerate() {
            let mut s = layer.bias[o];
            for (k, ak) in a.iter().enumerate() {
                s += layer.weights[o * layer.in_dim + k] * ak;
            }
            *zo = if li + 1 < n { silu(s) } else { s };
        }
        a = z;
    }
    a
}

#[test]
fn forward_pass_matches_reference_implementation() {
    let config = DenoiserConfig::default();
    let mut rng = stream(3, Domain::Init, 0, 0);
    let model = Denoiser::new(config.clone(), 1000, &mut rng).unwrap();
    for t in [1, 17, 500, 999, 1000] {
        let x = gaussian_vec(&mut rng, config.data_dim);
        let p = gaussian_vec(&mut rng, config.cond_dim);
        let got = model.predict_eps(&x, t, &p).unwrap();
        let traced = model.forward(&x, t, &p).unwrap().output;
        let want = reference_forward(&model, &x, t, &p);
        for ((g, tr), w) in got.iter().zip(&traced).zip(&want) {
            assert!((g - w).abs() <= 1e-12 * w.abs().max(1.0), "t={t}: {g} vs {w}");
            assert_eq!(g, tr);
        }
    }
}
