use rand::Rng;
use tensor_core::{NodeId, ParamStore, Tape, Tensor, TensorError};

/// A three-layer perceptron: `input -> hidden -> hidden -> output`, tanh on
/// the hidden layers, and optionally tanh on the output (the actor's
/// bounded-logit head). Parameters are named `<prefix>.l{1,2,3}.W` and
/// `<prefix>.l{1,2,3}.b`; the bias rows broadcast over batch rows, so a
/// `B x input` matrix forwards to `B x output` in one pass.
#[derive(Clone, Debug)]
pub struct Mlp {
    prefix: String,
    sizes: [usize; 4],
    output_tanh: bool,
}

impl Mlp {
    /// Policy head: bounded logits, one column per action.
    pub fn actor(input: usize, hidden: usize, actions: usize) -> Result<Self, TensorError> {
        Self::new("actor", input, hidden, actions, true)
    }

    /// Value head: a single linear output column.
    pub fn critic(input: usize, hidden: usize) -> Result<Self, TensorError> {
        Self::new("critic", input, hidden, 1, false)
    }

    pub fn new(
        prefix: impl Into<String>,
        input: usize,
        hidden: usize,
        output: usize,
        output_tanh: bool,
    ) -> Result<Self, TensorError> {
        if input == 0 || hidden == 0 || output == 0 {
            return Err(TensorError::InvalidArgument {
                op: "mlp",
                msg: format!("layer sizes must be positive, got {input}/{hidden}/{output}"),
            });
        }
        Ok(Mlp {
            prefix: prefix.into(),
            sizes: [input, hidden, hidden, output],
            output_tanh,
        })
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[3]
    }

    fn weight_name(&self, layer: usize) -> String {
        format!("{}.l{}.W", self.prefix, layer)
    }

    fn bias_name(&self, layer: usize) -> String {
        format!("{}.l{}.b", self.prefix, layer)
    }

    /// Every parameter name in canonical (registration) order.
    pub fn param_names(&self) -> Vec<String> {
        (1..=3)
            .flat_map(|l| [self.weight_name(l), self.bias_name(l)])
            .collect()
    }

    /// Registers freshly initialized parameters: each layer's weight matrix
    /// and bias row draw uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`
    /// with `fan_in` the layer's input width. Draws consume `rng` in
    /// canonical order, row-major.
    pub fn register_params<R: Rng>(
        &self,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<(), TensorError> {
        for l in 1..=3 {
            let (fan_in, fan_out) = (self.sizes[l - 1], self.sizes[l]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let mut draw = |rows: usize, cols: usize| {
                let data: Vec<f64> = (0..rows * cols)
                    .map(|_| rng.gen_range(-bound..bound))
                    .collect();
                Tensor::new(rows, cols, data).expect("buffer length matches")
            };
            store.insert(&self.weight_name(l), draw(fan_in, fan_out))?;
            store.insert(&self.bias_name(l), draw(1, fan_out))?;
        }
        Ok(())
    }

    /// Builds the forward graph for a `B x input` node, returning the
    /// `B x output` head.
    pub fn forward(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        input: NodeId,
    ) -> Result<NodeId, TensorError> {
        let got = tape.value(input).shape();
        if got[1] != self.sizes[0] {
            return Err(TensorError::InvalidArgument {
                op: "mlp_forward",
                msg: format!(
                    "expected {} input columns for `{}`, got {}",
                    self.sizes[0], self.prefix, got[1]
                ),
            });
        }
        let mut x = input;
        for l in 1..=3 {
            let w_id = store.id(&self.weight_name(l))?;
            let b_id = store.id(&self.bias_name(l))?;
            let w = tape.param(w_id, store.get(w_id).clone());
            let b = tape.param(b_id, store.get(b_id).clone());
            let lin = tape.matmul(x, w)?;
            x = tape.add_row_bias(lin, b)?;
            if l < 3 || self.output_tanh {
                x = tape.tanh(x);
            }
        }
        Ok(x)
    }

    /// Convenience forward pass on a scratch tape.
    pub fn forward_values(&self, store: &ParamStore, input: &Tensor) -> Result<Tensor, TensorError> {
        let mut tape = Tape::new();
        let node = tape.constant(input.clone());
        let out = self.forward(&mut tape, store, node)?;
        Ok(tape.value(out).clone())
    }
}
