use ftsvd_core::baselines::{cp_decompose, interpolate_min_hnorm};
use ftsvd_core::ftsvd::{sequential_decompose, FitConfig};
use ftsvd_core::metrics::{dist_samples, dist_vec};
use ftsvd_core::simulate::{gen_dataset, gen_truth, SimConfig};

fn run(tag: &str, sigma: f64, tau: f64, reps: u64) {
    let mut ft = (0.0, 0.0, 0.0);
    let mut cp = (0.0, 0.0, 0.0);
    for rep in 0..reps {
        let cfg_sim = SimConfig {
            lambda_min: 80.0,
            sigma,
            tau,
            seed: 7000 + rep,
            ..SimConfig::new(20, 500, 30, 1)
        };
        let truth = gen_truth(&cfg_sim).unwrap();
        let (y, grid) = gen_dataset(&cfg_sim, &truth).unwrap();
        let quad = 1024;
        let ts = truth.sampled_components(quad);
        let dec = sequential_decompose(&y, &grid, &FitConfig::default()).unwrap();
        let c = &dec.components[0];
        ft.0 += dist_vec(&c.a, &ts[0].a).unwrap();
        ft.1 += dist_vec(&c.b, &ts[0].b).unwrap();
        ft.2 += dist_samples(&c.xi.quad_samples(quad), &ts[0].xi).unwrap();
        let comps = cp_decompose(&y, 1, 20, 20, 9000 + rep).unwrap();
        let k = &comps[0];
        cp.0 += dist_vec(&k.a, &ts[0].a).unwrap();
        cp.1 += dist_vec(&k.b, &ts[0].b).unwrap();
        let f = interpolate_min_hnorm(&k.v, &grid, 1e-10).unwrap();
        cp.2 += dist_samples(&f.quad_samples(quad), &ts[0].xi).unwrap();
    }
    let r = reps as f64;
    println!(
        "{tag}: FTSVD a={:.3} b={:.3} xi={:.3} | CP a={:.3} b={:.3} xi={:.3}",
        ft.0 / r,
        ft.1 / r,
        ft.2 / r,
        cp.0 / r,
        cp.1 / r,
        cp.2 / r
    );
}

fn main() {
    println!("paper:  FTSVD a=0.121 b=0.482 xi=0.140 | CP a=0.123 b=0.485 xi=0.524");
    run("s=1 t=1  ", 1.0, 1.0, 5);
    run("s=1 t=5  ", 1.0, 5.0, 5);
    run("s=1 t=10 ", 1.0, 10.0, 5);
    run("s=5 t=1  ", 5.0, 1.0, 5);
    run("s=10 t=1 ", 10.0, 1.0, 5);
    run("s=5 t=5  ", 5.0, 5.0, 5);
}
