//! Seeded random models for benchmarks and property tests.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Bnn, BnnBlock, BnnOutput, Body, Classifier, Domain, FeatureSpace, Lookup};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Shape of a random binarized network over binary inputs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnnShape {
    pub inputs: usize,
    pub hidden: Vec<usize>,
    pub classes: usize,
}

impl BnnShape {
    /// Random shape with 8..=32 inputs and two or three hidden blocks of
    /// 16..=320 neurons each.
    pub fn random(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15);
        let inputs = rng.gen_range(8..=32);
        let depth = rng.gen_range(2..=3);
        let hidden = (0..depth).map(|_| rng.gen_range(16..=320)).collect();
        BnnShape {
            inputs,
            hidden,
            classes: 2,
        }
    }
}

fn sign(rng: &mut ChaCha8Rng) -> i8 {
    if rng.gen_bool(0.5) {
        1
    } else {
        -1
    }
}

fn random_network(shape: &BnnShape, rng: &mut ChaCha8Rng) -> Bnn {
    let mut blocks = Vec::with_capacity(shape.hidden.len());
    let mut width = shape.inputs;
    for (l, &n) in shape.hidden.iter().enumerate() {
        let mut weights = Vec::with_capacity(n);
        let mut thresholds = Vec::with_capacity(n);
        for _ in 0..n {
            let row: Vec<i8> = (0..width).map(|_| sign(rng)).collect();
            // keep each neuron able to fire and to stay off
            let (lo, hi) = if l == 0 {
                let pos = row.iter().filter(|&&w| w > 0).count() as i64;
                let neg = width as i64 - pos;
                (-neg + 1, pos)
            } else {
                (-(width as i64) + 1, width as i64)
            };
            let mid = (lo + hi) / 2;
            let spread = ((hi - lo) / 4).max(1);
            thresholds.push(rng.gen_range((mid - spread).max(lo)..=(mid + spread).min(hi)));
            weights.push(row);
        }
        blocks.push(BnnBlock { weights, thresholds });
        width = n;
    }
    let weights = (0..shape.classes)
        .map(|_| (0..width).map(|_| sign(rng)).collect())
        .collect();
    let bias = (0..shape.classes).map(|_| rng.gen_range(-1..=1)).collect();
    Bnn {
        blocks,
        output: BnnOutput { weights, bias },
    }
}

const BALANCE_SAMPLES: usize = 256;

/// Random nontrivial network: redrawn until at least two classes each take
/// 5% of a random input sample.
pub fn random_bnn<S: Scalar>(shape: &BnnShape, seed: u64) -> Result<Classifier<S>> {
    if shape.inputs == 0 || shape.classes < 2 || shape.hidden.contains(&0) {
        return Err(Error::Precondition(
            "a random network needs inputs, neurons and two classes".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = FeatureSpace::new(vec![Domain::Binary; shape.inputs])?;
    for _ in 0..1000 {
        let net = random_network(shape, &mut rng);
        let mut counts = vec![0usize; shape.classes];
        for _ in 0..BALANCE_SAMPLES {
            let x: Vec<i64> = (0..shape.inputs).map(|_| rng.gen_range(0..=1)).collect();
            counts[net.forward(&x)] += 1;
        }
        let mixed = counts.iter().filter(|&&c| c * 20 >= BALANCE_SAMPLES).count() >= 2;
        if mixed {
            return Classifier::with_class_count(space, shape.classes, Body::Bnn(net));
        }
    }
    Err(Error::Precondition(
        "could not draw a nontrivial network of this shape".into(),
    ))
}

/// Random truth table over `m` binary features with `classes` labels.
pub fn random_lookup<S: Scalar>(m: usize, classes: usize, seed: u64) -> Result<Classifier<S>> {
    if m > 20 {
        return Err(Error::TooLarge(format!("a full table over {m} binary features")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let space = FeatureSpace::new(vec![Domain::Binary; m])?;
    let labels: Vec<usize> = (0..classes).collect();
    let entries = (0..1u64 << m)
        .map(|p| {
            let point = (0..m).map(|i| S::from_u64(p >> i & 1).unwrap()).collect();
            (point, *labels.choose(&mut rng).unwrap())
        })
        .collect();
    let table = Lookup::new(&space, entries, 0)?;
    Classifier::with_class_count(space, classes, Body::Lookup(table))
}
