mod common;

use common::{rng, uniform};
use tbnode::integrator::{integrate, IntegratorConfig};
use tbnode::model::{feasible_region_cap, slir_rhs_into, slirt_rhs_into, ModelParams, SlirtExtension};

#[test]
fn field_points_inward_on_every_boundary_face() {
    let p = ModelParams::default();
    let ext = SlirtExtension::default();
    let mut rng = rng(10);
    for n in 0..10_000 {
        let dim = if n % 2 == 0 { 4 } else { 5 };
        let mut x: Vec<f64> = (0..dim).map(|_| uniform(&mut rng, 0.0, 5e5)).collect();
        let face = n % dim;
        x[face] = 0.0;
        let mut dx = vec![0.0; dim];
        if dim == 4 {
            slir_rhs_into(&x, &p, p.transmission, &mut dx).unwrap();
        } else {
            slirt_rhs_into(&x, &p, &ext, &mut dx).unwrap();
        }
        assert!(dx[face] >= 0.0, "face {face} of {x:?}: {}", dx[face]);
    }
}

#[test]
fn solutions_stay_non_negative_and_bounded() {
    let p = ModelParams::default();
    let cfg = IntegratorConfig::default();
    let cap = feasible_region_cap(&p);
    let mut rng = rng(11);
    for _ in 0..1000 {
        let mut x0: Vec<f64> = (0..4).map(|_| uniform(&mut rng, 0.0, 4e5)).collect();
        // Some starts sit on a face or have a single infectious case.
        match rng_index(&mut rng) {
            0 => x0[2] = 0.0,
            1 => x0[1] = 0.0,
            2 => x0[2] = 1.0,
            _ => {}
        }
        let n0: f64 = x0.iter().sum();
        let traj = integrate(|_, x, dx| slir_rhs_into(x, &p, p.transmission, dx), &x0, (0.0, 50.0), &cfg).unwrap();
        for (t, x) in traj.times().iter().zip(traj.states()) {
            assert!(x.iter().all(|&v| v >= -cfg.atol), "t={t}: {x:?}");
            let n: f64 = x.iter().sum();
            let bound = cap + (n0 - cap).max(0.0) * (-p.natural_mortality * t).exp();
            assert!(n <= bound * (1.0 + 1e-6), "t={t}: N={n} > {bound}");
        }
    }
}

fn rng_index(rng: &mut rand_chacha::ChaCha8Rng) -> u64 {
    use rand_core::RngCore;
    rng.next_u64() % 4
}
