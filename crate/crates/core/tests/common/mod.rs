#![allow(dead_code)]

use cnls::{FieldPair, Grid, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Sum of a few complex Gaussian bumps per component, decaying well inside the box.
pub fn smooth_field(grid: &Grid, seed: u64) -> FieldPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let component = |rng: &mut ChaCha8Rng| -> Vec<C64> {
        let bumps: Vec<([f64; 3], f64, f64, f64)> = (0..3)
            .map(|_| {
                let mut c = [0.0; 3];
                for a in c.iter_mut().take(grid.dim()) {
                    *a = rng.gen_range(-2.5..2.5);
                }
                (c, rng.gen_range(0.7..1.4), rng.gen_range(0.2..1.2), rng.gen_range(-3.0..3.0))
            })
            .collect();
        (0..grid.len())
            .map(|i| {
                let x = grid.position(i);
                bumps
                    .iter()
                    .map(|(c, w, a, th)| {
                        let r2: f64 = (0..grid.dim()).map(|k| (x[k] - c[k]).powi(2)).sum();
                        C64::from_polar(a * (-r2 / (2.0 * w * w)).exp(), *th)
                    })
                    .sum()
            })
            .collect()
    };
    let c1 = component(&mut rng);
    let c2 = component(&mut rng);
    FieldPair::new(grid, c1, c2).unwrap()
}

pub fn grid1() -> Grid {
    Grid::new(1, 256, 20.0).unwrap()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(1e-300)
}
