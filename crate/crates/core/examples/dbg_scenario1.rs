use std::time::Instant;

use ftsvd_core::baselines::{cp_decompose, interpolate_min_hnorm};
use ftsvd_core::ftsvd::{sequential_decompose, FitConfig};
use ftsvd_core::metrics::{dist_samples, dist_vec};
use ftsvd_core::simulate::{gen_dataset, gen_truth, SimConfig};

fn main() {
    let start = Instant::now();
    let reps = 20;
    let mut ft = (0.0, 0.0, 0.0);
    let mut cp = (0.0, 0.0, 0.0);
    for rep in 0..reps {
        let cfg_sim = SimConfig {
            lambda_min: 80.0,
            sigma: 1.0,
            tau: 1.0,
            seed: 7000 + rep,
            ..SimConfig::new(20, 500, 30, 1)
        };
        let truth = gen_truth(&cfg_sim).unwrap();
        let (y, grid) = gen_dataset(&cfg_sim, &truth).unwrap();
        let quad = 1024;
        let truth_scored = truth.sampled_components(quad);

        let cfg = FitConfig::default();
        let dec = sequential_decompose(&y, &grid, &cfg).unwrap();
        let c = &dec.components[0];
        ft.0 += dist_vec(&c.a, &truth_scored[0].a).unwrap();
        ft.1 += dist_vec(&c.b, &truth_scored[0].b).unwrap();
        ft.2 += dist_samples(&c.xi.quad_samples(quad), &truth_scored[0].xi).unwrap();

        let comps = cp_decompose(&y, 1, 20, 20, 9000 + rep).unwrap();
        let k = &comps[0];
        cp.0 += dist_vec(&k.a, &truth_scored[0].a).unwrap();
        cp.1 += dist_vec(&k.b, &truth_scored[0].b).unwrap();
        let f = interpolate_min_hnorm(&k.v, &grid, 1e-10).unwrap();
        cp.2 += dist_samples(&f.quad_samples(quad), &truth_scored[0].xi).unwrap();
        if rep == 0 {
            println!(
                "rep 0 done in {:.2}s (ftsvd dists {:.3} {:.3} {:.3})",
                start.elapsed().as_secs_f64(),
                ft.0,
                ft.1,
                ft.2
            );
        }
    }
    let r = reps as f64;
    println!("FTSVD: a={:.4} b={:.4} xi={:.4}  (paper 0.121 0.482 0.140)", ft.0 / r, ft.1 / r, ft.2 / r);
    println!("CP:    a={:.4} b={:.4} xi={:.4}  (paper 0.123 0.485 0.524)", cp.0 / r, cp.1 / r, cp.2 / r);
    println!("total {:.1}s", start.elapsed().as_secs_f64());
}
