use rand::Rng;
use tensor_core::{log_softmax_row_into, softmax_row_into, Tensor};

/// Categorical action distributions, one per logit row.
///
/// Probabilities and log-probabilities come from the same softmax kernels
/// the autodiff tape uses, so a probability recorded here during a rollout
/// is bit-identical to the one a training graph recomputes from the same
/// logits.
#[derive(Clone, Debug)]
pub struct ActionDistribution {
    probs: Tensor,
    log_probs: Tensor,
}

impl ActionDistribution {
    pub fn from_logits(logits: &Tensor) -> Self {
        let (rows, cols) = (logits.rows(), logits.cols());
        let mut probs = Tensor::zeros(rows, cols);
        let mut log_probs = Tensor::zeros(rows, cols);
        for r in 0..rows {
            softmax_row_into(logits.row_slice(r), probs.row_slice_mut(r));
            log_softmax_row_into(logits.row_slice(r), log_probs.row_slice_mut(r));
        }
        ActionDistribution { probs, log_probs }
    }

    pub fn rows(&self) -> usize {
        self.probs.rows()
    }

    pub fn num_actions(&self) -> usize {
        self.probs.cols()
    }

    pub fn probs(&self) -> &Tensor {
        &self.probs
    }

    pub fn prob(&self, row: usize, action: usize) -> f64 {
        self.probs.get(row, action)
    }

    pub fn log_prob(&self, row: usize, action: usize) -> f64 {
        self.log_probs.get(row, action)
    }

    /// Shannon entropy of one row in nats.
    pub fn entropy(&self, row: usize) -> f64 {
        -self
            .probs
            .row_slice(row)
            .iter()
            .zip(self.log_probs.row_slice(row))
            .map(|(p, lp)| p * lp)
            .sum::<f64>()
    }

    /// Draws an action for one row by inverse-CDF over the categories in
    /// index order, consuming exactly one uniform from `rng`.
    pub fn sample<R: Rng>(&self, row: usize, rng: &mut R) -> usize {
        let u: f64 = rng.gen();
        let probs = self.probs.row_slice(row);
        let mut cumulative = 0.0;
        for (i, p) in probs.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return i;
            }
        }
        probs.len() - 1
    }

    /// Highest-probability action; ties break to the lowest index.
    pub fn greedy(&self, row: usize) -> usize {
        let probs = self.probs.row_slice(row);
        let mut best = 0;
        for (i, &p) in probs.iter().enumerate().skip(1) {
            if p > probs[best] {
                best = i;
            }
        }
        best
    }
}
