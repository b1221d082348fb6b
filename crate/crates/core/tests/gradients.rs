//! Backprop and sensitivity-penalty gradients checked against central finite
//! differences of an independent double-precision forward pass.

use ppf_core::nn::{lipschitz_penalty, lipschitz_penalty_with_probes, Mlp};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

const H: f64 = 1e-3;
const REL_TOL: f64 = 1e-3;
const ABS_FLOOR: f64 = 1e-6;

/// Reference forward written independently of the crate: explicit loops in f64.
fn reference_forward(sizes: &[usize], params: &[f64], x: &[f64]) -> Vec<f64> {
    let mut act = x.to_vec();
    let mut off = 0;
    let n_layers = sizes.len() - 1;
    for l in 0..n_layers {
        let (n_in, n_out) = (sizes[l], sizes[l + 1]);
        let w = &params[off..off + n_in * n_out];
        let b = &params[off + n_in * n_out..off + n_in * n_out + n_out];
        off += n_in * n_out + n_out;
        let mut next = vec![0.0; n_out];
        for o in 0..n_out {
            let mut z = b[o];
            for i in 0..n_in {
                z += w[o * n_in + i] * act[i];
            }
            next[o] = if l + 1 < n_layers { z.tanh() } else { z };
        }
        act = next;
    }
    act
}

fn objective(sizes: &[usize], params: &[f64], xs: &[f64], coef: &[f64]) -> f64 {
    let (n_in, n_out) = (sizes[0], *sizes.last().unwrap());
    xs.chunks(n_in)
        .enumerate()
        .map(|(s, x)| {
            reference_forward(sizes, params, x)
                .iter()
                .zip(&coef[s * n_out..(s + 1) * n_out])
                .map(|(y, c)| y * c)
                .sum::<f64>()
        })
        .sum()
}

/// Central difference at step `H`, Richardson-extrapolated with `H/2` so the
/// oracle's own truncation error (O(h^4)) stays far below the tolerance.
fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64], i: usize) -> f64 {
    let d = |h: f64| {
        let (mut hi, mut lo) = (x.to_vec(), x.to_vec());
        hi[i] += h;
        lo[i] -= h;
        (f(&hi) - f(&lo)) / (2.0 * h)
    };
    (4.0 * d(H / 2.0) - d(H)) / 3.0
}

fn close(analytic: f64, fd: f64) -> bool {
    (analytic - fd).abs() <= REL_TOL * analytic.abs().max(fd.abs()) + ABS_FLOOR
}

fn to64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn normal_vec(n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    (0..n)
        .map(|_| {
            let v: f64 = rng.sample(StandardNormal);
            v as f32
        })
        .collect()
}

#[test]
fn parameter_and_input_gradients_match_finite_differences_on_100_nets() {
    let sizes = [8, 16, 4];
    let batch = 3;
    let mut worst = 0.0f64;
    for seed in 0..100u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::random(&sizes, 1.0, &mut rng).unwrap();
        let mut params = net.params().to_vec();
        // Non-zero biases so every parameter is exercised.
        for p in params.iter_mut() {
            *p += 0.1 * rng.random_range(-1.0f32..1.0);
        }
        let net = Mlp::from_params(&sizes, params).unwrap();
        let xs = normal_vec(batch * sizes[0], &mut rng);
        let coef = normal_vec(batch * sizes[2], &mut rng);

        let cache = net.forward_batch(&xs, batch).unwrap();
        let mut grad = vec![0.0f32; net.num_params()];
        let d_in = net.backward(&cache, &coef, &mut grad).unwrap();

        let p64 = to64(net.params());
        let x64 = to64(&xs);
        let c64 = to64(&coef);
        for i in 0..p64.len() {
            let fd = central_diff(|p| objective(&sizes, p, &x64, &c64), &p64, i);
            let a = grad[i] as f64;
            assert!(close(a, fd), "seed {seed} param {i}: {a} vs {fd}");
            worst = worst.max((a - fd).abs() / a.abs().max(fd.abs()).max(1e-12));
        }
        for i in 0..x64.len() {
            let fd = central_diff(|x| objective(&sizes, &p64, x, &c64), &x64, i);
            let a = d_in[i] as f64;
            assert!(close(a, fd), "seed {seed} input {i}: {a} vs {fd}");
        }
    }
    println!("worst relative gradient error: {worst:.2e}");
}

#[test]
fn sensitivity_penalty_gradient_matches_finite_differences() {
    let sizes = [6, 10, 3];
    let eps = 1e-2f32;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(1000 + seed);
        let net = Mlp::random(&sizes, 1.0, &mut rng).unwrap();
        let batch = 2;
        let xs = normal_vec(batch * 6, &mut rng);
        let us = normal_vec(batch * 6, &mut rng);
        let est = lipschitz_penalty_with_probes(&net, &xs, &us, batch, eps).unwrap();

        let e = eps as f64;
        let x64 = to64(&xs);
        let shifted: Vec<f64> = xs
            .iter()
            .zip(&us)
            .map(|(&x, &u)| (x + eps * u) as f64)
            .collect();
        let penalty = |p: &[f64]| -> f64 {
            let mut total = 0.0;
            for s in 0..batch {
                let a = reference_forward(&sizes, p, &x64[s * 6..(s + 1) * 6]);
                let b = reference_forward(&sizes, p, &shifted[s * 6..(s + 1) * 6]);
                total += a.iter().zip(&b).map(|(a, b)| (b - a).powi(2)).sum::<f64>();
            }
            total / (e * e * batch as f64)
        };
        let p64 = to64(net.params());
        assert!((penalty(&p64) - est.value).abs() <= 1e-3 * est.value + 1e-6);
        for i in 0..p64.len() {
            let fd = central_diff(&penalty, &p64, i);
            let a = est.grad[i] as f64;
            // The analytic path differences two f32 forwards, so allow the
            // resulting cancellation error on top of the relative tolerance.
            assert!(
                (a - fd).abs() <= REL_TOL * a.abs().max(fd.abs()) + 1e-3,
                "seed {seed} param {i}: {a} vs {fd}"
            );
        }
    }
}

fn linear_net(w: &[f32], n_in: usize, n_out: usize) -> Mlp {
    let mut params = w.to_vec();
    params.extend(std::iter::repeat(0.3f32).take(n_out));
    Mlp::from_params(&[n_in, n_out], params).unwrap()
}

fn mc_penalty(net: &Mlp, n_in: usize, probes: usize, seed: u64) -> f64 {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x_rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
    let xs = normal_vec(probes * n_in, &mut x_rng);
    lipschitz_penalty(net, &xs, probes, 1e-3, &mut rng).unwrap().value
}

#[test]
fn sensitivity_estimator_matches_frobenius_norm_for_identity() {
    let mut w = vec![0.0f32; 16];
    for i in 0..4 {
        w[i * 4 + i] = 1.0;
    }
    let est = mc_penalty(&linear_net(&w, 4, 4), 4, 100_000, 1);
    println!("identity estimate {est:.4} (analytic 4)");
    assert!((est - 4.0).abs() <= 0.02 * 4.0);
}

#[test]
fn sensitivity_estimator_matches_frobenius_norm_for_random_linear_nets() {
    for seed in 0..3u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n_in, n_out) = (5, 3);
        let w = normal_vec(n_in * n_out, &mut rng);
        let frob: f64 = w.iter().map(|&v| (v as f64).powi(2)).sum();
        let est = mc_penalty(&linear_net(&w, n_in, n_out), n_in, 100_000, 10 + seed);
        assert!((est / frob - 1.0).abs() <= 0.02, "{est} vs {frob}");

        let doubled: Vec<f32> = w.iter().map(|v| 2.0 * v).collect();
        let est2 = mc_penalty(&linear_net(&doubled, n_in, n_out), n_in, 100_000, 10 + seed);
        // Same probes, so the ratio is exact up to rounding.
        assert!((est2 / est - 4.0).abs() < 1e-3);
    }
}

#[test]
fn jacobian_is_bounded_by_weight_norm_product() {
    let sizes = [8, 16, 16, 4];
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let net = Mlp::random(&sizes, 1.0, &mut rng).unwrap();
        let bound: f64 = (0..net.num_layers())
            .map(|l| net.weights(l).iter().map(|&v| (v as f64).powi(2)).sum::<f64>().sqrt())
            .product();
        let x = to64(&normal_vec(8, &mut rng));
        let p = to64(net.params());
        let mut jf2 = 0.0;
        for i in 0..8 {
            let (mut hi, mut lo) = (x.clone(), x.clone());
            hi[i] += H;
            lo[i] -= H;
            let (a, b) = (reference_forward(&sizes, &p, &hi), reference_forward(&sizes, &p, &lo));
            jf2 += a.iter().zip(&b).map(|(a, b)| ((a - b) / (2.0 * H)).powi(2)).sum::<f64>();
        }
        assert!(jf2.sqrt() <= bound, "seed {seed}: {} > {bound}", jf2.sqrt());
    }
}


