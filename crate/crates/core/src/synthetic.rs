//! Deterministic WISDM-format accelerometer logs for demos and tests.
//!
//! Each activity is a mix of a gravity offset on one axis and a periodic
//! component with its own frequency and amplitude, plus Gaussian-ish noise.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::LabelScheme;

#[derive(Clone, Debug)]
pub struct SyntheticSpec {
    pub users: Vec<u32>,
    /// Runs per (user, activity) pair.
    pub runs_per_activity: usize,
    pub run_length: usize,
    pub scheme: LabelScheme,
    pub noise: f64,
    pub seed: u64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        Self {
            users: (1..=6).collect(),
            runs_per_activity: 1,
            run_length: 400,
            scheme: LabelScheme::V1,
            noise: 0.5,
            seed: 0,
        }
    }
}

/// (frequency Hz, amplitude, gravity axis) per class.
const PROFILES: [(f64, f64, usize); 6] = [
    (1.8, 4.0, 1),
    (2.8, 9.0, 1),
    (1.5, 3.0, 2),
    (2.2, 5.0, 0),
    (0.0, 0.0, 2),
    (0.0, 0.0, 1),
];

fn raw_name(scheme: LabelScheme, class: usize) -> &'static str {
    match scheme {
        LabelScheme::V1 => LabelScheme::V1.names()[class],
        LabelScheme::V2 => ["Walking", "Jogging", "Stairs", "Sitting", "Standing", "LyingDown"][class],
    }
}

pub fn synthetic_wisdm(spec: &SyntheticSpec) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut out = String::new();
    let mut timestamp: i64 = 1_000_000_000_000;
    for &user in &spec.users {
        for _ in 0..spec.runs_per_activity {
            for (class, &(freq, amp, axis)) in PROFILES.iter().enumerate() {
                let phase = rng.random_range(0.0..std::f64::consts::TAU);
                let gain = rng.random_range(0.8..1.2);
                for i in 0..spec.run_length {
                    let t = i as f64 / 20.0;
                    let wave = gain * amp * (std::f64::consts::TAU * freq * t + phase).sin();
                    let mut v = [0.0f64; 3];
                    v[axis] = 9.81;
                    v[(axis + 1) % 3] += wave;
                    v[(axis + 2) % 3] += 0.5 * wave * (class as f64 + 1.0) / 6.0;
                    for x in &mut v {
                        // sum of uniforms: cheap, bounded, roughly normal
                        let n: f64 = (0..4).map(|_| rng.random_range(-1.0..1.0)).sum::<f64>() / 2.0;
                        *x += spec.noise * n;
                    }
                    let _ = writeln!(
                        out,
                        "{user},{},{timestamp},{:.4},{:.4},{:.4};",
                        raw_name(spec.scheme, class),
                        v[0],
                        v[1],
                        v[2]
                    );
                    timestamp += 50_000_000;
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::parse_wisdm;

    #[test]
    fn parses_cleanly() {
        for scheme in [LabelScheme::V1, LabelScheme::V2] {
            let spec = SyntheticSpec {
                users: vec![3, 9],
                run_length: 50,
                scheme,
                ..SyntheticSpec::default()
            };
            let text = synthetic_wisdm(&spec);
            let r = parse_wisdm(text.as_bytes(), scheme).unwrap();
            assert_eq!(r.skipped, 0);
            assert_eq!(r.samples.len(), 2 * 6 * 50);
            assert_eq!(text, synthetic_wisdm(&spec));
        }
    }
}
