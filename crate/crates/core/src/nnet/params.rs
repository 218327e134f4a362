use std::collections::HashMap;

use rand::Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::NnetError;
use crate::rng;

/// Parameter partition. The first four make up Θ_g, the last one Θ_d.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Group {
    Ufe,
    Vfe,
    Acaf,
    HandoffHead,
    Tih,
}

impl Group {
    pub const ALL: [Group; 5] = [Group::Ufe, Group::Vfe, Group::Acaf, Group::HandoffHead, Group::Tih];
    pub const HANDOFF: [Group; 4] = [Group::Ufe, Group::Vfe, Group::Acaf, Group::HandoffHead];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(c: u8) -> Option<Self> {
        Self::ALL.get(c as usize).copied()
    }
}

/// Dense value with an optional gradient slot of the same shape.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
    pub grad: Option<Vec<f64>>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self, NnetError> {
        let n: usize = shape.iter().product();
        if n != data.len() {
            return Err(NnetError::Shape(format!("shape {shape:?} needs {n} values, got {}", data.len())));
        }
        Ok(Self { shape, data, grad: None })
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Self {
            shape,
            data: vec![0.0; n],
            grad: None,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Param {
    pub name: String,
    pub group: Group,
    pub tensor: Tensor,
}

/// Parameter id inside a [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub usize);

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    params: Vec<Param>,
    index: HashMap<String, usize>,
    frozen: [bool; 5],
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, group: Group, tensor: Tensor) -> Result<ParamId, NnetError> {
        if self.index.contains_key(name) {
            return Err(NnetError::Shape(format!("duplicate parameter {name}")));
        }
        self.index.insert(name.to_string(), self.params.len());
        self.params.push(Param {
            name: name.to_string(),
            group,
            tensor,
        });
        Ok(ParamId(self.params.len() - 1))
    }

    /// Adds a `[fan_out, fan_in…]` weight drawn uniformly from
    /// `±sqrt(6 / fan_in)`, for layers followed by a ReLU.
    pub fn add_weight(&mut self, name: &str, group: Group, shape: Vec<usize>, seed: u64) -> Result<ParamId, NnetError> {
        let fan_in: usize = shape[1..].iter().product::<usize>().max(1);
        self.add_uniform(name, group, shape, seed, (6.0 / fan_in as f64).sqrt())
    }

    /// Adds a tensor drawn uniformly from `±bound`.
    pub fn add_uniform(&mut self, name: &str, group: Group, shape: Vec<usize>, seed: u64, bound: f64) -> Result<ParamId, NnetError> {
        let mut r = rng::stream(&[seed, rng::TAG_INIT, name_hash(name)]);
        let n: usize = shape.iter().product();
        let data = (0..n).map(|_| r.gen_range(-bound..=bound)).collect();
        self.add(name, group, Tensor::new(shape, data)?)
    }

    pub fn add_zeros(&mut self, name: &str, group: Group, shape: Vec<usize>) -> Result<ParamId, NnetError> {
        self.add(name, group, Tensor::zeros(shape))
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Param {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param {
        &mut self.params[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).map(|&i| ParamId(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn set_frozen(&mut self, group: Group, frozen: bool) {
        self.frozen[group as usize] = frozen;
    }

    pub fn is_frozen(&self, group: Group) -> bool {
        self.frozen[group as usize]
    }

    pub fn trainable(&self, id: ParamId) -> bool {
        !self.is_frozen(self.params[id.0].group)
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.tensor.len()).sum()
    }

    /// SHA-256 over name, shape and little-endian values of one tensor.
    pub fn tensor_hash(&self, id: ParamId) -> [u8; 32] {
        let p = &self.params[id.0];
        let mut h = Sha256::new();
        h.update(p.name.as_bytes());
        for &d in &p.tensor.shape {
            h.update((d as u64).to_le_bytes());
        }
        for &x in &p.tensor.data {
            h.update(x.to_le_bytes());
        }
        h.finalize().into()
    }

    /// Hash of every tensor in `groups`, keyed by name.
    pub fn group_hashes(&self, groups: &[Group]) -> Vec<(String, [u8; 32])> {
        self.iter()
            .filter(|(_, p)| groups.contains(&p.group))
            .map(|(id, p)| (p.name.clone(), self.tensor_hash(id)))
            .collect()
    }

    /// Replaces every value with the matching tensor of `other`.
    pub fn copy_values_from(&mut self, other: &ParameterStore) -> Result<(), NnetError> {
        for p in &mut self.params {
            let src = other
                .id(&p.name)
                .map(|id| other.get(id))
                .ok_or_else(|| NnetError::Checkpoint(format!("missing tensor {}", p.name)))?;
            if src.tensor.shape != p.tensor.shape {
                return Err(NnetError::Checkpoint(format!("shape mismatch for {}", p.name)));
            }
            p.tensor.data.clone_from(&src.tensor.data);
        }
        Ok(())
    }
}

fn name_hash(name: &str) -> u64 {
    let d = Sha256::digest(name.as_bytes());
    u64::from_le_bytes(d[..8].try_into().unwrap())
}
