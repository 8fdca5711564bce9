use crate::error::TensorError;
use crate::tensor::Tensor;
use std::collections::HashMap;

/// Stable handle to a parameter in a [`ParamStore`].
///
/// Ids are assigned in insertion order and never change, so they double as
/// deterministic iteration indices for optimizers and gradient maps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Ordered collection of named trainable tensors.
///
/// Insertion order is the canonical order: optimizer updates, gradient-norm
/// reductions and snapshots all iterate in it, which keeps every
/// floating-point reduction bit-reproducible across runs.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    by_name: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    /// Registers a new parameter. Names must be unique.
    pub fn insert(&mut self, name: &str, value: Tensor) -> Result<ParamId, TensorError> {
        if self.by_name.contains_key(name) {
            return Err(TensorError::DuplicateParam(name.to_string()));
        }
        let id = ParamId(self.values.len());
        self.names.push(name.to_string());
        self.values.push(value);
        self.by_name.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Result<ParamId, TensorError> {
        self.by_name
            .get(name)
            .copied()
            .ok_or_else(|| TensorError::UnknownParam(name.to_string()))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn get_by_name(&self, name: &str) -> Result<&Tensor, TensorError> {
        Ok(self.get(self.id(name)?))
    }

    /// Replaces the value of an existing parameter; the shape must match.
    pub fn set(&mut self, id: ParamId, value: Tensor) -> Result<(), TensorError> {
        let current = &self.values[id.0];
        if current.shape() != value.shape() {
            return Err(TensorError::GradientShape {
                name: self.names[id.0].clone(),
                grad_rows: value.rows(),
                grad_cols: value.cols(),
                param_rows: current.rows(),
                param_cols: current.cols(),
            });
        }
        self.values[id.0] = value;
        Ok(())
    }

    /// Iterates parameters in insertion order.
    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &str, &Tensor)> {
        self.names
            .iter()
            .zip(&self.values)
            .enumerate()
            .map(|(i, (n, v))| (ParamId(i), n.as_str(), v))
    }

    /// Total number of scalar coordinates across all parameters.
    pub fn num_scalars(&self) -> usize {
        self.values.iter().map(Tensor::len).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn insert_assigns_sequential_ids_and_rejects_duplicates() {
        let mut store = ParamStore::new();
        let a = store.insert("net.w", Tensor::zeros(2, 2)).unwrap();
        let b = store.insert("net.b", Tensor::zeros(1, 2)).unwrap();
        assert_eq!(a.index(), 0);
        assert_eq!(b.index(), 1);
        assert!(matches!(
            store.insert("net.w", Tensor::zeros(2, 2)),
            Err(TensorError::DuplicateParam(_))
        ));
        assert_eq!(store.id("net.b").unwrap(), b);
        assert!(store.id("missing").is_err());
    }

    #[test]
    fn set_rejects_shape_change() {
        let mut store = ParamStore::new();
        let id = store.insert("w", Tensor::zeros(2, 3)).unwrap();
        assert!(store.set(id, Tensor::zeros(3, 2)).is_err());
        assert!(store.set(id, Tensor::filled(2, 3, 1.0)).is_ok());
        assert_eq!(store.get(id).get(0, 0), 1.0);
    }
}
