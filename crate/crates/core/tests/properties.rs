use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use spectral_control::experiment::presets;
use spectral_control::experiment::ExperimentConfig;
use spectral_control::fastconv::{direct_convolve, ConvMode, StreamConvolver};
use spectral_control::filters::{build_hankel, mu_vector};
use spectral_control::lds::{generate_system, CostFunction, GenerateOptions, LdsSystem};
use spectral_control::learner::{ogd_step, project_frobenius, MemorylessContext, SpectralParams};

fn vec_of(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, len)
}

fn params_from(flat: &[f64], h: usize, n: usize, d: usize, radius: f64) -> SpectralParams {
    let mut p = SpectralParams::zeros(h, n, d, radius);
    for (j, m) in p.mats.iter_mut().enumerate() {
        m.copy_from_slice(&flat[j * n * d..(j + 1) * n * d]);
    }
    p
}

fn distance(a: &SpectralParams, b: &SpectralParams) -> f64 {
    a.mats
        .iter()
        .zip(&b.mats)
        .map(|(x, y)| (x - y).norm_squared())
        .sum::<f64>()
        .sqrt()
}

fn context(sys: &LdsSystem, h: usize, m_x: usize, hist: &[f64]) -> MemorylessContext {
    let d = sys.d();
    let mut ctx = MemorylessContext::new(sys, None, m_x, vec![0.7; h]).unwrap();
    let mut it = hist.iter().copied().cycle();
    for s in 0..m_x + 2 {
        let feats = (0..h).map(|_| DVector::from_fn(d, |_, _| it.next().unwrap())).collect();
        ctx.push_features(feats).unwrap();
        if s <= m_x {
            ctx.push_disturbance(DVector::from_fn(d, |_, _| it.next().unwrap()));
        }
    }
    ctx
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hankel_is_symmetric_positive_and_trace_bounded(m in 1usize..40, gamma in 0.01f64..0.66) {
        let h = build_hankel(m, gamma).unwrap();
        prop_assert_eq!(h.max_asymmetry(), 0.0);
        prop_assert!(h.entries.iter().all(|&v| v > 0.0));
        prop_assert!(h.trace() <= h.trace_bound());
    }

    #[test]
    fn mu_norm_bounded(alpha in 0.0f64..1.0, m in 1usize..200) {
        let gamma = (1.0 - alpha).max(1e-3);
        let mu = mu_vector(alpha.min(1.0 - gamma), m).unwrap();
        prop_assert!(mu.norm_squared() <= 1.0 / gamma + 1e-9);
    }

    #[test]
    fn memoryless_loss_is_convex(a in vec_of(12), b in vec_of(12), hist in vec_of(40), lam in 0.0f64..1.0) {
        let sys = generate_system(2, 2, 0.8, 1, GenerateOptions::default()).unwrap();
        let ctx = context(&sys, 3, 4, &hist);
        let cost = CostFunction::identity(2, 2);
        let pa = params_from(&a, 3, 2, 2, 10.0);
        let pb = params_from(&b, 3, 2, 2, 10.0);
        let mut mix = pa.clone();
        for (m, (x, y)) in mix.mats.iter_mut().zip(pa.mats.iter().zip(&pb.mats)) {
            *m = x * lam + y * (1.0 - lam);
        }
        let la = ctx.loss_and_grad(&pa, &cost).unwrap().loss;
        let lb = ctx.loss_and_grad(&pb, &cost).unwrap().loss;
        let lm = ctx.loss_and_grad(&mix, &cost).unwrap().loss;
        prop_assert!(lm <= lam * la + (1.0 - lam) * lb + 1e-9 * (1.0 + la.abs() + lb.abs()));
    }

    #[test]
    fn spectral_control_is_linear_in_parameters(a in vec_of(6), b in vec_of(6), f in vec_of(6), s in -2.0f64..2.0) {
        let coeffs = [0.9, 0.4, 0.1];
        let feats: Vec<DVector<f64>> = (0..3).map(|j| DVector::from_column_slice(&f[2 * j..2 * j + 2])).collect();
        let pa = params_from(&a, 3, 1, 2, 1.0);
        let pb = params_from(&b, 3, 1, 2, 1.0);
        let mut comb = pa.clone();
        for (m, (x, y)) in comb.mats.iter_mut().zip(pa.mats.iter().zip(&pb.mats)) {
            *m = x * s + y;
        }
        let lhs = comb.apply(&coeffs, &feats);
        let rhs = pa.apply(&coeffs, &feats) * s + pb.apply(&coeffs, &feats);
        prop_assert!((lhs - rhs).amax() <= 1e-12);
    }

    #[test]
    fn projection_is_non_expansive(a in vec_of(8), b in vec_of(8), radius in 0.1f64..2.0, scale in 0.1f64..5.0) {
        let sa: Vec<f64> = a.iter().map(|v| v * scale).collect();
        let pa = params_from(&sa, 2, 2, 2, radius);
        let pb = params_from(&b, 2, 2, 2, radius);
        let qa = project_frobenius(pa.clone());
        let qb = project_frobenius(pb.clone());
        prop_assert!(qa.frobenius_norm() <= radius * (1.0 + 1e-12));
        prop_assert!(distance(&qa, &qb) <= distance(&pa, &pb) + 1e-12);
        prop_assert!(distance(&project_frobenius(qa.clone()), &qa) <= 1e-12);
    }

    #[test]
    fn ogd_step_stays_feasible(a in vec_of(8), g in vec_of(8), eta in 0.0f64..10.0) {
        let p = project_frobenius(params_from(&a, 2, 2, 2, 0.5));
        let grad = params_from(&g, 2, 2, 2, 0.5).mats;
        let q = ogd_step(&p, &grad, eta).unwrap();
        prop_assert!(q.frobenius_norm() <= 0.5 * (1.0 + 1e-12));
    }

    #[test]
    fn stream_matches_window_convolution(
        kernel in prop::collection::vec(-1.0f64..1.0, 1..40),
        input in prop::collection::vec(-1.0f64..1.0, 1..200),
        fast in any::<bool>(),
    ) {
        let mode = if fast { ConvMode::Fast } else { ConvMode::Direct };
        let m = kernel.len();
        let mut conv = StreamConvolver::from_kernels(vec![kernel.clone()], 1, mode).unwrap();
        for (t, &w) in input.iter().enumerate() {
            conv.push(&[w]).unwrap();
            // output after pushing w_0..w_t is sum_s kernel[s] w_{t-s} for s < m
            let lo = (t + 1).saturating_sub(m);
            let window: Vec<f64> = input[lo..=t].iter().rev().copied().collect();
            let want: f64 = window.iter().zip(&kernel).map(|(a, b)| a * b).sum();
            prop_assert!((conv.query(0).unwrap()[0] - want).abs() <= 1e-9);
        }
        let full = direct_convolve(&kernel, &input);
        prop_assert_eq!(full.len(), kernel.len() + input.len() - 1);
    }

    #[test]
    fn stream_forgets_inputs_older_than_memory(
        kernel in prop::collection::vec(-1.0f64..1.0, 1..24),
        prefix_a in prop::collection::vec(-1.0f64..1.0, 0..60),
        prefix_b in prop::collection::vec(-1.0f64..1.0, 0..60),
    ) {
        let m = kernel.len();
        let tail: Vec<f64> = (0..m).map(|i| (i as f64 * 0.3).cos()).collect();
        let run = |prefix: &[f64]| {
            let mut conv = StreamConvolver::from_kernels(vec![kernel.clone()], 1, ConvMode::Fast).unwrap();
            for &w in prefix.iter().chain(&tail) {
                conv.push(&[w]).unwrap();
            }
            conv.query(0).unwrap()[0]
        };
        prop_assert!((run(&prefix_a) - run(&prefix_b)).abs() <= 1e-9);
    }

    #[test]
    fn step_and_recover_round_trip(x in vec_of(3), u in vec_of(2), w in vec_of(3), seed in 0u64..50) {
        let sys = generate_system(3, 2, 0.9, seed, GenerateOptions::default()).unwrap();
        let (x, u, w) = (DVector::from_vec(x), DVector::from_vec(u), DVector::from_vec(w));
        let next = sys.step(&x, &u, &w).unwrap();
        let back = sys.recover_disturbance(&x, &u, &next).unwrap();
        prop_assert!((back - w).amax() <= 1e-12);
    }

    #[test]
    fn config_hash_ignores_output_dir_and_tracks_content(dir in "[a-z]{1,8}", horizon in 10usize..5000) {
        let mut a = presets::regret_sweep_base();
        let b = a.clone();
        a.output_dir = Some(dir);
        prop_assert_eq!(a.config_hash(), b.config_hash());
        let back = ExperimentConfig::from_json(&a.to_json().unwrap()).unwrap();
        prop_assert_eq!(&back, &a);
        let mut c = b.clone();
        c.horizon = horizon;
        prop_assert_eq!(c.config_hash() == b.config_hash(), horizon == b.horizon);
    }
}

#[test]
fn zero_gradient_at_zero_history() {
    let sys = LdsSystem::scalar(0.5, 1.0).unwrap();
    let ctx = MemorylessContext::new(&sys, None, 3, vec![1.0]).unwrap();
    let p = SpectralParams::zeros(1, 1, 1, 1.0);
    let lg = ctx.loss_and_grad(&p, &CostFunction::identity(1, 1)).unwrap();
    assert_eq!(lg.loss, 0.0);
    assert_eq!(lg.grad[0], DMatrix::zeros(1, 1));
}
