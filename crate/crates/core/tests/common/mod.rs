#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use signforge::KinematicChain;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_q(chain: &KinematicChain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    chain.joints.iter().map(|j| rng.random_range(j.lower..=j.upper)).collect()
}

/// Central-difference Jacobian from forward kinematics alone.
pub fn finite_difference_jacobian(chain: &KinematicChain, q: &[f64], step: f64) -> Vec<[f64; 6]> {
    (0..q.len())
        .map(|i| {
            let mut plus = q.to_vec();
            let mut minus = q.to_vec();
            plus[i] += step;
            minus[i] -= step;
            let a = signforge::forward(chain, &plus).unwrap();
            let b = signforge::forward(chain, &minus).unwrap();
            let omega = (a.orientation * b.orientation.inverse()).scaled_axis() / (2.0 * step);
            let v = (a.position - b.position) / (2.0 * step);
            [omega.x, omega.y, omega.z, v.x, v.y, v.z]
        })
        .collect()
}
