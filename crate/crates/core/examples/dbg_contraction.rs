use ftsvd_core::ftsvd::{error_trace, power_iteration, spectral_init, FitConfig};
use ftsvd_core::simulate::{gen_dataset, gen_truth, SimConfig};

fn main() {
    for seed in 0..10u64 {
        let cfg_sim = SimConfig {
            lambda_min: 40.0,
            sigma: 0.5,
            tau: 1.0,
            seed: 4000 + seed,
            ..SimConfig::new(20, 20, 50, 1)
        };
        let truth = gen_truth(&cfg_sim).unwrap();
        let (y, grid) = gen_dataset(&cfg_sim, &truth).unwrap();
        let cfg = FitConfig::default();
        let (a0, b0) = spectral_init(&y).unwrap();
        let (_, trace) = power_iteration(&y, &grid, &a0, &b0, &cfg).unwrap();
        let xi_true = truth.sampled_components(cfg.quad_m)[0].xi.clone();
        let errors = error_trace(
            &trace,
            &truth.components[0].a,
            &truth.components[0].b,
            &xi_true,
            cfg.quad_m,
        )
        .unwrap();
        let e0 = errors[0];
        let e3 = errors.get(3).copied().unwrap_or(*errors.last().unwrap());
        let plateau = *errors.last().unwrap();
        let max_increment = errors
            .windows(2)
            .skip(1)
            .map(|w| w[1] - w[0])
            .fold(f64::NEG_INFINITY, f64::max);
        println!(
            "seed {seed}: iters={} e0={:.5} e3={:.5} plateau={:.5} max_incr_after1={:+.2e} bound={:.4}",
            errors.len() - 1,
            e0,
            e3,
            plateau,
            max_increment,
            (e0 / 2.0).max(plateau * 1.1)
        );
    }
}
