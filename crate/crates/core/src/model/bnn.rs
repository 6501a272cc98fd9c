//! Binarized neural networks with pre-folded integer thresholds.
//!
//! The first block reads per-feature *levels* (0/1 for binary features, the
//! grid index for quantized ones); deeper blocks read ±1 activations. A
//! neuron fires (+1) iff `Σ w·input >= threshold`. The output layer scores
//! each class as `Σ w·activation + bias` and takes the argmax, breaking ties
//! toward the lowest class index.
//!
//! Batch normalization must already be folded into the thresholds.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnnBlock {
    /// One row of ±1 weights per neuron.
    pub weights: Vec<Vec<i8>>,
    pub thresholds: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BnnOutput {
    /// One row of ±1 weights per class.
    pub weights: Vec<Vec<i8>>,
    pub bias: Vec<i64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Bnn {
    pub blocks: Vec<BnnBlock>,
    pub output: BnnOutput,
}

fn check_rows(rows: &[Vec<i8>], width: usize, what: &str) -> Result<()> {
    for (j, row) in rows.iter().enumerate() {
        if row.len() != width {
            return Err(Error::InvalidModel(format!(
                "{what} row {j} has {} weights, expected {width}",
                row.len()
            )));
        }
        if row.iter().any(|&w| w != 1 && w != -1) {
            return Err(Error::InvalidModel(format!("{what} row {j} has a weight outside ±1")));
        }
    }
    Ok(())
}

impl Bnn {
    pub fn validate(&self, inputs: usize, classes: usize) -> Result<()> {
        let mut width = inputs;
        for (l, block) in self.blocks.iter().enumerate() {
            if block.weights.is_empty() {
                return Err(Error::InvalidModel(format!("block {l} has no neurons")));
            }
            if block.weights.len() != block.thresholds.len() {
                return Err(Error::InvalidModel(format!("block {l} has mismatched thresholds")));
            }
            check_rows(&block.weights, width, &format!("block {l}"))?;
            width = block.weights.len();
        }
        if self.output.weights.len() != classes || self.output.bias.len() != classes {
            return Err(Error::InvalidModel(format!(
                "output layer has {} rows for {classes} classes",
                self.output.weights.len()
            )));
        }
        check_rows(&self.output.weights, width, "output")
    }

    pub fn depth(&self) -> usize {
        self.blocks.len()
    }

    /// Hidden neurons plus output units.
    pub fn neurons(&self) -> usize {
        self.blocks.iter().map(|b| b.weights.len()).sum::<usize>() + self.output.weights.len()
    }

    pub fn inputs(&self) -> usize {
        self.blocks
            .first()
            .map(|b| b.weights[0].len())
            .unwrap_or_else(|| self.output.weights[0].len())
    }

    /// Activations of every block, as ±1 values.
    pub fn activations(&self, levels: &[i64]) -> Vec<Vec<i64>> {
        let mut out = Vec::with_capacity(self.blocks.len());
        let mut current: Vec<i64> = levels.to_vec();
        for block in &self.blocks {
            let next: Vec<i64> = block
                .weights
                .iter()
                .zip(&block.thresholds)
                .map(|(row, &t)| {
                    let s: i64 = row.iter().zip(&current).map(|(&w, &x)| w as i64 * x).sum();
                    if s >= t {
                        1
                    } else {
                        -1
                    }
                })
                .collect();
            out.push(next.clone());
            current = next;
        }
        out
    }

    pub fn scores(&self, levels: &[i64]) -> Vec<i64> {
        let acts = self.activations(levels);
        let last = acts.last().map(Vec::as_slice).unwrap_or(levels);
        self.output
            .weights
            .iter()
            .zip(&self.output.bias)
            .map(|(row, &b)| row.iter().zip(last).map(|(&w, &x)| w as i64 * x).sum::<i64>() + b)
            .collect()
    }

    pub fn forward(&self, levels: &[i64]) -> usize {
        let scores = self.scores(levels);
        let mut best = 0;
        for (k, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = k;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor_like() -> Bnn {
        // h1 = [a + b >= 2] (AND), h2 = [-a - b >= 0] (NOR); class 1 iff neither.
        Bnn {
            blocks: vec![BnnBlock {
                weights: vec![vec![1, 1], vec![-1, -1]],
                thresholds: vec![2, 0],
            }],
            output: BnnOutput {
                weights: vec![vec![1, 1], vec![-1, -1]],
                bias: vec![1, 0],
            },
        }
    }

    #[test]
    fn forward_truth_table() {
        let n = xor_like();
        n.validate(2, 2).unwrap();
        assert_eq!(n.forward(&[0, 0]), 0);
        assert_eq!(n.forward(&[1, 0]), 1);
        assert_eq!(n.forward(&[0, 1]), 1);
        assert_eq!(n.forward(&[1, 1]), 0);
    }

    #[test]
    fn ties_go_to_lowest_class() {
        let n = Bnn {
            blocks: vec![],
            output: BnnOutput {
                weights: vec![vec![1], vec![1]],
                bias: vec![0, 0],
            },
        };
        assert_eq!(n.forward(&[1]), 0);
    }

    #[test]
    fn validation_catches_bad_shapes() {
        let mut n = xor_like();
        assert!(n.validate(3, 2).is_err());
        assert!(n.validate(2, 3).is_err());
        n.blocks[0].weights[0][0] = 0;
        assert!(n.validate(2, 2).is_err());
    }
}
