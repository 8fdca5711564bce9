use rand::Rng;
use tensor_core::{NodeId, ParamStore, Tape, Tensor, TensorError};

/// Shape of the attention encoder.
///
/// `width` must be even: the head count is fixed at `width / 2`, giving
/// every head a two-dimensional subspace.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct LsaConfig {
    /// Observation rows (observer + neighbor slots).
    pub rows: usize,
    /// Features per row.
    pub width: usize,
    /// Stacked attention blocks; the flattening layer runs once after the
    /// last block.
    pub blocks: usize,
}

impl LsaConfig {
    pub fn new(rows: usize, width: usize) -> Self {
        LsaConfig {
            rows,
            width,
            blocks: 1,
        }
    }

    /// Attention heads: half the row width.
    pub fn heads(&self) -> usize {
        self.width / 2
    }

    /// Per-head subspace width (always 2 given `heads = width / 2`).
    pub fn head_dim(&self) -> usize {
        self.width / self.heads()
    }

    /// Length of the flattened output vector.
    pub fn output_len(&self) -> usize {
        self.rows * self.width
    }

    pub fn validate(&self) -> Result<(), TensorError> {
        if self.rows == 0 || self.blocks == 0 {
            return Err(TensorError::InvalidArgument {
                op: "lsa_config",
                msg: format!(
                    "rows and blocks must be positive, got rows={} blocks={}",
                    self.rows, self.blocks
                ),
            });
        }
        if self.width < 2 || self.width % 2 != 0 {
            return Err(TensorError::InvalidArgument {
                op: "lsa_config",
                msg: format!("width must be even and at least 2, got {}", self.width),
            });
        }
        Ok(())
    }
}

/// Multi-head self-attention encoder over observation rows.
///
/// Per block `m` and head `i`, the parameters are the query/key/value
/// projections `<prefix>.block{m}.head{i}.WQ|WK|WV` (`width x head_dim`
/// each), the per-block mixing matrix `<prefix>.block{m}.WO`
/// (`width x width`), and one final `<prefix>.block{last}.WFF`
/// (`output_len x output_len`) applied to the flattened last block. Blocks
/// and heads are numbered from 1. A head computes
/// `softmax_rows(Q K^T / sqrt(head_dim)) V`; head outputs concatenate along
/// columns before `WO`.
pub struct LsaEncoder {
    cfg: LsaConfig,
    prefix: String,
}

impl LsaEncoder {
    pub fn new(cfg: LsaConfig, prefix: impl Into<String>) -> Result<Self, TensorError> {
        cfg.validate()?;
        Ok(LsaEncoder {
            cfg,
            prefix: prefix.into(),
        })
    }

    pub fn cfg(&self) -> &LsaConfig {
        &self.cfg
    }

    pub fn prefix(&self) -> &str {
        &self.prefix
    }

    fn head_name(&self, block: usize, head: usize, which: &str) -> String {
        format!("{}.block{}.head{}.{}", self.prefix, block, head, which)
    }

    fn mix_name(&self, block: usize) -> String {
        format!("{}.block{}.WO", self.prefix, block)
    }

    fn ff_name(&self) -> String {
        format!("{}.block{}.WFF", self.prefix, self.cfg.blocks)
    }

    /// Every parameter name in canonical (registration) order.
    pub fn param_names(&self) -> Vec<String> {
        let mut names = Vec::new();
        for m in 1..=self.cfg.blocks {
            for i in 1..=self.cfg.heads() {
                for which in ["WQ", "WK", "WV"] {
                    names.push(self.head_name(m, i, which));
                }
            }
            names.push(self.mix_name(m));
        }
        names.push(self.ff_name());
        names
    }

    /// Registers freshly initialized parameters into `store`. Every matrix
    /// draws uniformly from `[-1/sqrt(fan_in), 1/sqrt(fan_in)]` where
    /// `fan_in` is its row count; draws consume `rng` in canonical
    /// parameter order, entry by entry, row-major.
    pub fn register_params<R: Rng>(
        &self,
        store: &mut ParamStore,
        rng: &mut R,
    ) -> Result<(), TensorError> {
        let d = self.cfg.head_dim();
        let w = self.cfg.width;
        let k = self.cfg.output_len();
        for m in 1..=self.cfg.blocks {
            for i in 1..=self.cfg.heads() {
                for which in ["WQ", "WK", "WV"] {
                    store.insert(&self.head_name(m, i, which), uniform_init(rng, w, d))?;
                }
            }
            store.insert(&self.mix_name(m), uniform_init(rng, w, w))?;
        }
        store.insert(&self.ff_name(), uniform_init(rng, k, k))?;
        Ok(())
    }

    fn param_node(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        name: &str,
    ) -> Result<NodeId, TensorError> {
        let id = store.id(name)?;
        Ok(tape.param(id, store.get(id).clone()))
    }

    /// One attention block: returns the mixed `rows x width` output and the
    /// per-head row-stochastic attention matrices.
    fn block(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        block: usize,
        x: NodeId,
    ) -> Result<(NodeId, Vec<NodeId>), TensorError> {
        let scale = 1.0 / (self.cfg.head_dim() as f64).sqrt();
        let mut head_outs = Vec::with_capacity(self.cfg.heads());
        let mut attentions = Vec::with_capacity(self.cfg.heads());
        for i in 1..=self.cfg.heads() {
            let wq = self.param_node(tape, store, &self.head_name(block, i, "WQ"))?;
            let wk = self.param_node(tape, store, &self.head_name(block, i, "WK"))?;
            let wv = self.param_node(tape, store, &self.head_name(block, i, "WV"))?;
            let q = tape.matmul(x, wq)?;
            let k = tape.matmul(x, wk)?;
            let v = tape.matmul(x, wv)?;
            let scores = tape.matmul_nt(q, k)?;
            let scaled = tape.scale(scores, scale);
            let attention = tape.softmax_rows(scaled);
            attentions.push(attention);
            head_outs.push(tape.matmul(attention, v)?);
        }
        let concat = tape.concat_cols(&head_outs)?;
        let wo = self.param_node(tape, store, &self.mix_name(block))?;
        Ok((tape.matmul(concat, wo)?, attentions))
    }

    fn check_input(&self, tape: &Tape, obs: NodeId) -> Result<(), TensorError> {
        let shape = tape.value(obs).shape();
        if shape != [self.cfg.rows, self.cfg.width] {
            return Err(TensorError::InvalidArgument {
                op: "lsa_encode",
                msg: format!(
                    "expected a {}x{} observation, got {}x{}",
                    self.cfg.rows, self.cfg.width, shape[0], shape[1]
                ),
            });
        }
        Ok(())
    }

    /// Runs the attention blocks only, keeping the `rows x width` shape.
    /// Attention carries no positional information, so permuting the input
    /// rows permutes this output the same way.
    pub fn attend(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        obs: NodeId,
    ) -> Result<NodeId, TensorError> {
        self.check_input(tape, obs)?;
        let mut x = obs;
        for m in 1..=self.cfg.blocks {
            x = self.block(tape, store, m, x)?.0;
        }
        Ok(x)
    }

    /// Full encoding: attention blocks, flatten row-major, then the final
    /// square linear layer. Output is `1 x output_len`.
    pub fn encode(
        &self,
        tape: &mut Tape,
        store: &ParamStore,
        obs: NodeId,
    ) -> Result<NodeId, TensorError> {
        let attended = self.attend(tape, store, obs)?;
        let flat = tape.reshape(attended, 1, self.cfg.output_len())?;
        let wff = self.param_node(tape, store, &self.ff_name())?;
        tape.matmul(flat, wff)
    }

    /// Convenience forward pass on a scratch tape.
    pub fn forward(&self, store: &ParamStore, obs: &Tensor) -> Result<Tensor, TensorError> {
        let mut tape = Tape::new();
        let input = tape.constant(obs.clone());
        let out = self.encode(&mut tape, store, input)?;
        Ok(tape.value(out).clone())
    }

    /// The row-stochastic attention matrices for one observation, indexed
    /// `[block][head]`, each `rows x rows`: entry `(i, j)` is how much row
    /// `i` attends to row `j`.
    pub fn attention_weights(
        &self,
        store: &ParamStore,
        obs: &Tensor,
    ) -> Result<Vec<Vec<Tensor>>, TensorError> {
        let mut tape = Tape::new();
        let mut x = tape.constant(obs.clone());
        self.check_input(&tape, x)?;
        let mut all = Vec::with_capacity(self.cfg.blocks);
        for m in 1..=self.cfg.blocks {
            let (next, attentions) = self.block(&mut tape, store, m, x)?;
            x = next;
            all.push(
                attentions
                    .into_iter()
                    .map(|a| tape.value(a).clone())
                    .collect(),
            );
        }
        Ok(all)
    }
}

/// Uniform init in `[-1/sqrt(rows), 1/sqrt(rows)]`, filled row-major.
fn uniform_init<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> Tensor {
    let bound = 1.0 / (rows as f64).sqrt();
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.gen_range(-bound..bound))
        .collect();
    Tensor::new(rows, cols, data).expect("buffer length matches by construction")
}
