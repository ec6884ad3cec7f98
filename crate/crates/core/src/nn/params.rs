use std::collections::HashMap;
use std::path::Path;

use indexmap::IndexMap;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Matrix;
use crate::error::{Error, Result};

/// A trainable array together with its gradient accumulator.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseArray {
    pub value: Matrix,
    pub grad: Matrix,
}

impl DenseArray {
    pub fn new(value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Self { value, grad }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ParamId(usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named parameters in insertion order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    params: Vec<DenseArray>,
    index: HashMap<String, ParamId>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Matrix) -> Result<ParamId> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(Error::invalid(format!("duplicate parameter {name}")));
        }
        let id = ParamId(self.params.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.params.push(DenseArray::new(value));
        Ok(id)
    }

    /// Adds a `rows x cols` array drawn uniformly from `±1/sqrt(fan_in)`.
    pub fn add_uniform<R: Rng + ?Sized>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        fan_in: usize,
        rng: &mut R,
    ) -> Result<ParamId> {
        let bound = 1.0 / (fan_in.max(1) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        self.add(name, Matrix::from_vec(rows, cols, data)?)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &DenseArray {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut DenseArray {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.params[id.0].value
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.params.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &DenseArray)> {
        self.names.iter().map(String::as_str).zip(&self.params)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut DenseArray> {
        self.params.iter_mut()
    }

    /// Total number of scalar parameters.
    pub fn numel(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.params
            .iter()
            .map(|p| p.grad.sq_norm())
            .sum::<f64>()
            .sqrt()
    }

    /// Copies values (not gradients) from a store with the same layout.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::shape("parameter layouts differ"));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            dst.value.data_mut().copy_from_slice(src.value.data());
        }
        Ok(())
    }

    /// Adds the gradients of a store with the same layout into this one.
    pub fn accumulate_grads_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.names != other.names {
            return Err(Error::shape("parameter layouts differ"));
        }
        for (dst, src) in self.params.iter_mut().zip(&other.params) {
            dst.grad.add_assign(&src.grad);
        }
        Ok(())
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        let params = self
            .iter()
            .map(|(name, p)| {
                (
                    name.to_owned(),
                    ParamRecord {
                        shape: [p.value.rows(), p.value.cols()],
                        data: p.value.data().to_vec(),
                    },
                )
            })
            .collect();
        Checkpoint {
            format: CHECKPOINT_FORMAT.to_owned(),
            manifest: None,
            params,
        }
    }

    /// Builds a store from every entry of `ckpt` whose name starts with `prefix`.
    pub fn from_checkpoint(ckpt: &Checkpoint, prefix: &str) -> Result<Self> {
        let mut store = ParamStore::new();
        for (name, rec) in ckpt.params.iter().filter(|(n, _)| n.starts_with(prefix)) {
            let value = Matrix::from_vec(rec.shape[0], rec.shape[1], rec.data.clone())?;
            store.add(name.clone(), value)?;
        }
        Ok(store)
    }

    /// Overwrites values from `ckpt`; names and shapes must match exactly.
    pub fn load_values(&mut self, ckpt: &Checkpoint) -> Result<()> {
        for (name, p) in self.names.iter().zip(&mut self.params) {
            let rec = ckpt
                .params
                .get(name)
                .ok_or_else(|| Error::invalid(format!("checkpoint lacks {name}")))?;
            if rec.shape != [p.value.rows(), p.value.cols()] || rec.data.len() != p.value.len() {
                return Err(Error::shape(format!("checkpoint shape mismatch for {name}")));
            }
            p.value.data_mut().copy_from_slice(&rec.data);
        }
        Ok(())
    }
}

pub const CHECKPOINT_FORMAT: &str = "hitmac-params/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamRecord {
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// JSON checkpoint: parameter name to shape and flat row-major values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub manifest: Option<String>,
    pub params: IndexMap<String, ParamRecord>,
}

impl Checkpoint {
    pub fn empty() -> Self {
        Self {
            format: CHECKPOINT_FORMAT.to_owned(),
            manifest: None,
            params: IndexMap::new(),
        }
    }

    /// Appends all entries of `other`; names must not collide.
    pub fn merge(&mut self, other: &Checkpoint) -> Result<()> {
        for (name, rec) in &other.params {
            if self.params.insert(name.clone(), rec.clone()).is_some() {
                return Err(Error::invalid(format!("duplicate parameter {name}")));
            }
        }
        Ok(())
    }

    pub fn has_prefix(&self, prefix: &str) -> bool {
        self.params.keys().any(|k| k.starts_with(prefix))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let ckpt: Checkpoint = serde_json::from_str(s)?;
        if ckpt.format != CHECKPOINT_FORMAT {
            return Err(Error::invalid(format!("unknown checkpoint format {}", ckpt.format)));
        }
        for (name, rec) in &ckpt.params {
            if rec.shape[0] * rec.shape[1] != rec.data.len() {
                return Err(Error::shape(format!("{name}: shape does not match data length")));
            }
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
