use ftsvd_core::ftsvd::{rss, select_rank, sequential_decompose, FitConfig};
use ftsvd_core::simulate::{gen_dataset, gen_truth, SimConfig};

fn main() {
    for seed in [314u64, 1, 2, 3] {
        let cfg_sim = SimConfig {
            lambda_min: 80.0,
            sigma: 1.0,
            tau: 1.0,
            seed,
            ..SimConfig::new(20, 20, 50, 2)
        };
        let truth = gen_truth(&cfg_sim).unwrap();
        let (y, grid) = gen_dataset(&cfg_sim, &truth).unwrap();
        let mut cfg = FitConfig::default();
        cfg.r = 5;
        let dec = sequential_decompose(&y, &grid, &cfg).unwrap();
        println!("seed {seed}: lambdas = {:?}", dec.lambdas());
        let m = (20 * 20 * 50) as f64;
        for r in 1..=dec.components.len() {
            let rss_r = rss(&y, &dec.components[..r], &grid).unwrap();
            println!(
                "  r={r}: rss={rss_r:.3e}  2ln(rss)={:.4}  per-entry={:.4}",
                2.0 * rss_r.ln(),
                rss_r / m
            );
        }
        let sel = select_rank(&y, &grid, 5, &cfg, None).unwrap();
        println!("  p_h={:.4} r_hat={} bic={:?}", sel.p_h, sel.r_hat, sel.bic);
    }
}
