//! Named, shaped parameter storage with parallel gradient buffers.

use std::collections::HashMap;

use super::math::Real;
use super::ModelError;

/// On-disk element type tag.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dtype {
    F32 = 0,
    F64 = 1,
}

impl Dtype {
    pub fn from_u8(v: u8) -> Option<Dtype> {
        match v {
            0 => Some(Dtype::F32),
            1 => Some(Dtype::F64),
            _ => None,
        }
    }
}

/// Handle to one parameter tensor. Only valid for the store that created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone)]
pub struct ParamEntry<T> {
    pub name: String,
    pub shape: Vec<usize>,
    pub weight: Vec<T>,
    pub grad: Vec<T>,
}

/// All learnable state of a model, in registration order.
#[derive(Debug, Clone)]
pub struct ParameterStore<T> {
    entries: Vec<ParamEntry<T>>,
    by_name: HashMap<String, usize>,
    /// Bumped whenever weights are handed out mutably; lets a backward pass
    /// detect that its tape is stale.
    version: u64,
}

impl<T: Real> ParameterStore<T> {
    pub fn new() -> Self {
        ParameterStore {
            entries: Vec::new(),
            by_name: HashMap::new(),
            version: 0,
        }
    }

    pub fn add(&mut self, name: &str, shape: &[usize], weight: Vec<T>) -> ParamId {
        assert_eq!(
            weight.len(),
            shape.iter().product::<usize>(),
            "shape/data mismatch for {name}"
        );
        assert!(
            !self.by_name.contains_key(name),
            "duplicate parameter {name}"
        );
        let id = self.entries.len();
        self.by_name.insert(name.to_string(), id);
        let grad = vec![T::zero(); weight.len()];
        self.entries.push(ParamEntry {
            name: name.to_string(),
            shape: shape.to_vec(),
            weight,
            grad,
        });
        ParamId(id)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.weight.len()).sum()
    }

    pub fn version(&self) -> u64 {
        self.version
    }

    pub fn entries(&self) -> &[ParamEntry<T>] {
        &self.entries
    }

    /// Mutable access to all entries (optimizer updates); marks tapes stale.
    pub fn entries_mut(&mut self) -> &mut [ParamEntry<T>] {
        self.version += 1;
        &mut self.entries
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    /// Handle for the entry at registration index `i`.
    pub fn id_at(&self, i: usize) -> ParamId {
        assert!(i < self.entries.len());
        ParamId(i)
    }

    #[inline]
    pub fn w(&self, id: ParamId) -> &[T] {
        &self.entries[id.0].weight
    }

    /// Mutable weight access; marks every existing tape stale.
    pub fn w_mut(&mut self, id: ParamId) -> &mut [T] {
        self.version += 1;
        &mut self.entries[id.0].weight
    }

    #[inline]
    pub fn g(&self, id: ParamId) -> &[T] {
        &self.entries[id.0].grad
    }

    pub fn g_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.entries[id.0].grad
    }

    pub fn zero_grads(&mut self) {
        for e in &mut self.entries {
            e.grad.iter_mut().for_each(|g| *g = T::zero());
        }
    }

    /// Copies a gradient buffer into the store's gradient arrays.
    pub fn set_grads(&mut self, grads: &GradBuffer<T>) {
        assert_eq!(grads.0.len(), self.entries.len());
        for (e, g) in self.entries.iter_mut().zip(&grads.0) {
            e.grad.copy_from_slice(g);
        }
    }

    /// All weights and gradients finite?
    pub fn all_finite(&self) -> bool {
        self.entries
            .iter()
            .all(|e| super::math::all_finite(&e.weight) && super::math::all_finite(&e.grad))
    }

    /// Replaces every weight from a name-indexed tensor list, verifying
    /// names, shapes and dtype. Extra tensors in `tensors` are ignored.
    pub fn load_weights(
        &mut self,
        tensors: &[super::checkpoint::RawTensor],
    ) -> Result<(), ModelError> {
        let by_name: HashMap<&str, &super::checkpoint::RawTensor> =
            tensors.iter().map(|t| (t.name.as_str(), t)).collect();
        self.version += 1;
        for e in &mut self.entries {
            let t = by_name.get(e.name.as_str()).ok_or_else(|| {
                ModelError::ConfigMismatch(format!("checkpoint is missing tensor {}", e.name))
            })?;
            if t.shape != e.shape {
                return Err(ModelError::ConfigMismatch(format!(
                    "tensor {} has shape {:?}, model expects {:?}",
                    e.name, t.shape, e.shape
                )));
            }
            if t.dtype != T::DTYPE {
                return Err(ModelError::ConfigMismatch(format!(
                    "tensor {} has dtype {:?}, model expects {:?}",
                    e.name,
                    t.dtype,
                    T::DTYPE
                )));
            }
            e.weight.clear();
            e.weight.extend(t.data.iter().map(|&v| T::fl(v)));
            // Exact round trip for f64; for f32 the stored f64 values were
            // produced from f32 so the cast is lossless too.
        }
        Ok(())
    }
}

impl<T: Real> Default for ParameterStore<T> {
    fn default() -> Self {
        Self::new()
    }
}

/// Standalone gradient accumulator aligned with a store's entries; lets
/// per-sample backward passes run concurrently and reduce in a fixed order.
#[derive(Debug, Clone)]
pub struct GradBuffer<T>(pub(crate) Vec<Vec<T>>);

impl<T: Real> GradBuffer<T> {
    pub fn zeros_like(store: &ParameterStore<T>) -> Self {
        GradBuffer(
            store
                .entries
                .iter()
                .map(|e| vec![T::zero(); e.weight.len()])
                .collect(),
        )
    }

    #[inline]
    pub fn g(&self, id: ParamId) -> &[T] {
        &self.0[id.0]
    }

    #[inline]
    pub fn g_mut(&mut self, id: ParamId) -> &mut [T] {
        &mut self.0[id.0]
    }

    /// `self += scale * other`, entry by entry.
    pub fn add_scaled(&mut self, other: &GradBuffer<T>, scale: T) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            for (av, &bv) in a.iter_mut().zip(b) {
                *av += scale * bv;
            }
        }
    }

    pub fn scale(&mut self, s: T) {
        for a in &mut self.0 {
            a.iter_mut().for_each(|v| *v *= s);
        }
    }

    pub fn global_norm(&self) -> f64 {
        let mut sq = 0.0;
        for a in &self.0 {
            for &v in a {
                let vd = v.db();
                sq += vd * vd;
            }
        }
        sq.sqrt()
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(|a| super::math::all_finite(a))
    }
}
