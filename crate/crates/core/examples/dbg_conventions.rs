use ftsvd_core::ftsvd::{sequential_decompose, FitConfig};
use ftsvd_core::simulate::{gen_dataset, gen_truth, SimConfig};

fn main() {
    let cfg_sim = SimConfig {
        lambda_min: 40.0,
        sigma: 0.5,
        tau: 1.0,
        seed: 808,
        ..SimConfig::new(12, 14, 30, 2)
    };
    let truth = gen_truth(&cfg_sim).unwrap();
    let (y, grid) = gen_dataset(&cfg_sim, &truth).unwrap();
    let cfg = FitConfig {
        r: 2,
        ..FitConfig::default()
    };
    let dec = sequential_decompose(&y, &grid, &cfg).unwrap();
    for (idx, comp) in dec.components.iter().enumerate() {
        let mean: f64 =
            comp.xi.quad_samples(cfg.quad_m).iter().sum::<f64>() / cfg.quad_m as f64;
        let (renorm, norm) = comp.xi.normalize(cfg.quad_m).unwrap();
        println!(
            "comp {idx}: |a|-1={:+.2e} |b|-1={:+.2e} l2(xi)-1={:+.2e} lambda={:.3} mean={:+.3e} renorm_norm-1={:+.2e} dbeta={:.2e} beta_norm={:.2e}",
            comp.a.norm() - 1.0,
            comp.b.norm() - 1.0,
            comp.xi.l2_norm(cfg.quad_m) - 1.0,
            comp.lambda,
            mean,
            norm - 1.0,
            (renorm.beta() - comp.xi.beta()).norm(),
            comp.xi.beta().norm(),
        );
    }
}
