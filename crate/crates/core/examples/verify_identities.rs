//! Residuals of the breather identities on a random sweep of [−50, 0] × [0, 2].

use breather_lab::breather::identity_residuals;
use breather_lab::BreatherParams;
use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> breather_lab::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    for (a, b) in [(1.0, 1.0), (2.0, 1.0), (3.0, 1.0), (1.0, 2.0)] {
        let p = BreatherParams::centered(a, b)?;
        let mut worst = 0.0f64;
        for _ in 0..1000 {
            let x = rng.random_range(-50.0..0.0);
            let t = rng.random_range(0.0..2.0);
            worst = worst.max(identity_residuals(&p, x, t).max_abs());
        }
        println!("α = {a}, β = {b}: max residual {worst:.3e}");
    }
    Ok(())
}
