//! Fixed-topology 21-8-2 feedforward network and its genome.
//!
//! Genome layout: for each of the 8 hidden neurons, 21 input weights then a
//! bias; then for each of the 2 outputs (v, ω), 8 hidden weights then a
//! bias. Both layers use tanh; outputs are scaled to the actuator limits.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dynamics::ControlCommand;
use crate::error::{Error, Result};
use crate::sensors::{SensorFrame, FRAME_LEN};
use crate::world::{RobotSpec, WorldState};

pub const INPUTS: usize = FRAME_LEN;
pub const HIDDEN: usize = 8;
pub const OUTPUTS: usize = 2;
pub const TOPOLOGY: [usize; 3] = [INPUTS, HIDDEN, OUTPUTS];
pub const GENOME_LEN: usize = (INPUTS + 1) * HIDDEN + (HIDDEN + 1) * OUTPUTS;

const OUTPUT_OFFSET: usize = (INPUTS + 1) * HIDDEN;

/// Flat weight vector of length [`GENOME_LEN`] with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Genome(Vec<f64>);

impl Genome {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.len() != GENOME_LEN {
            return Err(Error::Dimension {
                expected: GENOME_LEN,
                got: weights.len(),
            });
        }
        if let Some(index) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Genome(weights))
    }

    pub fn zeros() -> Self {
        Genome(vec![0.0; GENOME_LEN])
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.0
    }

    /// Mutable access for variation operators; the length is fixed.
    pub(crate) fn weights_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl<'de> Deserialize<'de> for Genome {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let w = Vec::<f64>::deserialize(d)?;
        Genome::new(w).map_err(serde::de::Error::custom)
    }
}

/// Draws every weight independently from U[-0.5, 0.5].
pub fn random_genome(rng: &mut impl Rng) -> Genome {
    Genome((0..GENOME_LEN).map(|_| rng.random_range(-0.5..=0.5)).collect())
}

/// Raw network outputs in (-1, 1) for an arbitrary weight slice.
pub fn forward_raw(weights: &[f64], inputs: &[f64; INPUTS]) -> Result<[f64; OUTPUTS]> {
    if weights.len() != GENOME_LEN {
        return Err(Error::Dimension {
            expected: GENOME_LEN,
            got: weights.len(),
        });
    }
    let mut hidden = [0.0; HIDDEN];
    for (h, row) in hidden.iter_mut().zip(weights[..OUTPUT_OFFSET].chunks_exact(INPUTS + 1)) {
        let z: f64 = row[..INPUTS].iter().zip(inputs).map(|(w, s)| w * s).sum::<f64>() + row[INPUTS];
        *h = z.tanh();
    }
    let mut out = [0.0; OUTPUTS];
    for (o, row) in out.iter_mut().zip(weights[OUTPUT_OFFSET..].chunks_exact(HIDDEN + 1)) {
        let z: f64 = row[..HIDDEN].iter().zip(&hidden).map(|(w, h)| w * h).sum::<f64>() + row[HIDDEN];
        *o = z.tanh();
    }
    Ok(out)
}

/// Maps a sensor frame to a velocity command within the robot's limits.
pub fn forward(genome: &Genome, frame: &SensorFrame, spec: &RobotSpec) -> ControlCommand {
    let [a_v, a_w] = forward_raw(&genome.0, &frame.to_array()).expect("genome length is an invariant");
    ControlCommand {
        v: a_v * spec.v_max,
        omega: a_w * spec.omega_max,
    }
}

/// Anything that can drive a robot. Implementations see the sensor frame
/// and, for scripted baselines, the full world.
pub trait Controller {
    fn act(&mut self, frame: &SensorFrame, world: &WorldState, robot: usize) -> ControlCommand;
}

#[derive(Debug, Clone)]
pub struct NeuralController<'g> {
    genome: &'g Genome,
}

impl<'g> NeuralController<'g> {
    pub fn new(genome: &'g Genome) -> Self {
        NeuralController { genome }
    }
}

impl Controller for NeuralController<'_> {
    fn act(&mut self, frame: &SensorFrame, world: &WorldState, _robot: usize) -> ControlCommand {
        forward(self.genome, frame, &world.robot_spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn genome_length() {
        assert_eq!(GENOME_LEN, 194);
        assert!(matches!(
            Genome::new(vec![0.0; 184]),
            Err(Error::Dimension {
                expected: 194,
                got: 184
            })
        ));
        let mut w = vec![0.0; 194];
        w[7] = f64::NAN;
        assert!(matches!(Genome::new(w), Err(Error::NonFinite { index: 7 })));
    }

    #[test]
    fn zero_genome_stands_still() {
        let f = SensorFrame::from_array(&[0.7; 21]);
        let c = forward(&Genome::zeros(), &f, &RobotSpec::default());
        assert_eq!((c.v, c.omega), (0.0, 0.0));
    }

    #[test]
    fn saturated_bias_gives_full_speed() {
        let mut w = vec![0.0; GENOME_LEN];
        w[OUTPUT_OFFSET + HIDDEN] = 20.0;
        let g = Genome::new(w).unwrap();
        let c = forward(&g, &SensorFrame::from_array(&[0.3; 21]), &RobotSpec::default());
        // oracle: tanh(20) evaluated directly
        assert!((c.v - 0.31 * 20f64.tanh()).abs() < 1e-15);
        assert!((c.v - 0.31).abs() < 1e-8);
        assert_eq!(c.omega, 0.0);
    }

    #[test]
    fn layout_hidden_then_output() {
        // One path: input s1 -> hidden 0 -> omega.
        let mut w = vec![0.0; GENOME_LEN];
        w[0] = 1.0; // hidden 0, input 0
        w[OUTPUT_OFFSET + (HIDDEN + 1)] = 1.0; // omega row, hidden 0
        let mut s = [0.0; 21];
        s[0] = 0.5;
        let out = forward_raw(&w, &s).unwrap();
        assert_eq!(out[0], 0.0);
        assert!((out[1] - 0.5f64.tanh().tanh()).abs() < 1e-15);
        // hidden bias of neuron 1 sits at index 2*22-1
        let mut w = vec![0.0; GENOME_LEN];
        w[2 * (INPUTS + 1) - 1] = 1.0;
        w[OUTPUT_OFFSET + 1] = 1.0;
        let out = forward_raw(&w, &[0.0; 21]).unwrap();
        assert!((out[0] - 1f64.tanh().tanh()).abs() < 1e-15);
    }

    #[test]
    fn forward_raw_rejects_wrong_length() {
        assert!(matches!(
            forward_raw(&[0.0; 10], &[0.0; 21]),
            Err(Error::Dimension { expected: 194, got: 10 })
        ));
    }

    #[test]
    fn random_genome_range_and_determinism() {
        let a = random_genome(&mut stream(4, &[]));
        let b = random_genome(&mut stream(4, &[]));
        assert_eq!(a, b);
        assert!(a.weights().iter().all(|w| (-0.5..=0.5).contains(w)));
    }

    #[test]
    fn random_genome_mean_is_zero() {
        let mut rng = stream(8, &[]);
        let n = 100_000;
        let mut sum = 0.0;
        for _ in 0..n {
            sum += random_genome(&mut rng).weights().iter().sum::<f64>() / GENOME_LEN as f64;
        }
        let mean = sum / n as f64;
        assert!(mean.abs() < 0.01, "{mean}");
    }

    #[test]
    fn serde_round_trip_is_bit_exact() {
        let g = random_genome(&mut stream(1, &[]));
        let s = serde_json::to_string(&g).unwrap();
        let back: Genome = serde_json::from_str(&s).unwrap();
        assert_eq!(
            g.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>(),
            back.weights().iter().map(|w| w.to_bits()).collect::<Vec<_>>()
        );
        assert!(serde_json::from_str::<Genome>("[1.0, 2.0]").is_err());
    }

    /// Independent analytic Jacobian of the raw outputs w.r.t. the inputs.
    #[allow(clippy::needless_range_loop)]
    fn jacobian(w: &[f64], s: &[f64; 21]) -> [[f64; 21]; 2] {
        let mut h = [0.0; HIDDEN];
        for j in 0..HIDDEN {
            let base = j * 22;
            let mut z = w[base + 21];
            for i in 0..21 {
                z += w[base + i] * s[i];
            }
            h[j] = z.tanh();
        }
        let mut jac = [[0.0; 21]; 2];
        for o in 0..2 {
            let base = 176 + o * 9;
            let mut z = w[base + 8];
            for j in 0..HIDDEN {
                z += w[base + j] * h[j];
            }
            let da = 1.0 - z.tanh().powi(2);
            for i in 0..21 {
                let mut acc = 0.0;
                for j in 0..HIDDEN {
                    acc += w[base + j] * (1.0 - h[j] * h[j]) * w[j * 22 + i];
                }
                jac[o][i] = da * acc;
            }
        }
        jac
    }

    #[test]
    fn finite_differences_match_jacobian() {
        let mut rng = stream(21, &[]);
        let eps = 1e-6;
        for _ in 0..100 {
            let g = random_genome(&mut rng);
            let s: [f64; 21] = std::array::from_fn(|_| rng.random::<f64>());
            let jac = jacobian(g.weights(), &s);
            for i in 0..21 {
                let mut hi = s;
                let mut lo = s;
                hi[i] += eps;
                lo[i] -= eps;
                let a = forward_raw(g.weights(), &hi).unwrap();
                let b = forward_raw(g.weights(), &lo).unwrap();
                for o in 0..2 {
                    let fd = (a[o] - b[o]) / (2.0 * eps);
                    let scale = jac[o][i].abs().max(1e-3);
                    assert!(
                        (fd - jac[o][i]).abs() / scale < 1e-5,
                        "o{o} i{i}: {fd} vs {}",
                        jac[o][i]
                    );
                }
            }
        }
    }

    proptest! {
        #[test]
        fn outputs_within_limits(
            w in proptest::collection::vec(-50.0f64..50.0, GENOME_LEN),
            s in proptest::collection::vec(0.0f64..1.0, 21),
        ) {
            let g = Genome::new(w).unwrap();
            let f = SensorFrame::from_array(&s.try_into().unwrap());
            let c = forward(&g, &f, &RobotSpec::default());
            prop_assert!(c.v.abs() <= 0.31);
            prop_assert!(c.omega.abs() <= 1.9);
        }
    }
}
