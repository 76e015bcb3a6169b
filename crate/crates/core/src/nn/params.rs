//! Named parameters, their gradients, Adam state and the checkpoint format.

use std::collections::HashMap;
use std::io::{Read, Write};

use ndarray::Array2;

use crate::error::{invalid, IlseError, Result};

type Matrix = Array2<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(usize);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn new(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Matrix>,
    grads: Vec<Matrix>,
    first_moment: Vec<Matrix>,
    second_moment: Vec<Matrix>,
    index: HashMap<String, ParamId>,
    step: u64,
}

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"ILSECKPT";
pub const CHECKPOINT_VERSION: u32 = 1;

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Matrix) -> Result<ParamId> {
        if self.index.contains_key(name) {
            return invalid(format!("duplicate parameter name {name:?}"));
        }
        let id = ParamId(self.values.len());
        let zeros = Matrix::zeros(value.dim());
        self.names.push(name.to_string());
        self.grads.push(zeros.clone());
        self.first_moment.push(zeros.clone());
        self.second_moment.push(zeros);
        self.values.push(value);
        self.index.insert(name.to_string(), id);
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Matrix {
        &self.values[id.0]
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Matrix {
        &mut self.values[id.0]
    }

    pub fn grad(&self, id: ParamId) -> &Matrix {
        &self.grads[id.0]
    }

    pub fn step(&self) -> u64 {
        self.step
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.values.iter().map(Matrix::len).sum()
    }

    pub fn accumulate_grad(&mut self, id: ParamId, g: &Matrix) -> Result<()> {
        let slot = &mut self.grads[id.0];
        if slot.dim() != g.dim() {
            return invalid(format!(
                "gradient shape {:?} for parameter {:?} of shape {:?}",
                g.dim(),
                self.names[id.0],
                slot.dim()
            ));
        }
        *slot += g;
        Ok(())
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.fill(0.0);
        }
    }

    /// Flattened parameter values in registration order.
    pub fn flat_values(&self) -> Vec<f64> {
        self.values.iter().flat_map(|m| m.iter().copied()).collect()
    }

    pub fn flat_grads(&self) -> Vec<f64> {
        self.grads.iter().flat_map(|m| m.iter().copied()).collect()
    }

    /// Copies values (not optimizer state) from another store with the same layout.
    pub fn load_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if other.names != self.names {
            return invalid("parameter layouts differ");
        }
        for (dst, src) in self.values.iter_mut().zip(&other.values) {
            dst.assign(src);
        }
        Ok(())
    }

    /// One bias-corrected Adam update with decoupled weight decay, then zeroes gradients.
    pub fn adam_step(&mut self, cfg: &AdamConfig) -> Result<()> {
        if cfg.lr.is_nan() || cfg.lr <= 0.0 {
            return invalid(format!("learning rate must be positive, got {}", cfg.lr));
        }
        if cfg.weight_decay < 0.0 {
            return invalid("weight decay must be non-negative");
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - cfg.beta1.powi(t);
        let c2 = 1.0 - cfg.beta2.powi(t);
        for i in 0..self.values.len() {
            let (p, g) = (&mut self.values[i], &self.grads[i]);
            let (m, v) = (&mut self.first_moment[i], &mut self.second_moment[i]);
            ndarray::Zip::from(p)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|p, &g, m, v| {
                    *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
                    *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
                    let m_hat = *m / c1;
                    let v_hat = *v / c2;
                    *p -= cfg.lr * (m_hat / (v_hat.sqrt() + cfg.eps) + cfg.weight_decay * *p);
                });
        }
        self.zero_grads();
        Ok(())
    }

    /// Writes the `ILSECKPT` checkpoint: magic, u32 version, then per parameter
    /// `u32 name_len, name bytes, u32 rank, u64 dims..., f64 payload`, little-endian.
    pub fn write_checkpoint<W: Write>(&self, mut out: W) -> Result<()> {
        out.write_all(CHECKPOINT_MAGIC)?;
        out.write_all(&CHECKPOINT_VERSION.to_le_bytes())?;
        for (name, value) in self.names.iter().zip(&self.values) {
            out.write_all(&(name.len() as u32).to_le_bytes())?;
            out.write_all(name.as_bytes())?;
            out.write_all(&2u32.to_le_bytes())?;
            for dim in [value.nrows(), value.ncols()] {
                out.write_all(&(dim as u64).to_le_bytes())?;
            }
            for v in value.iter() {
                out.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    /// Reads a checkpoint into a fresh store. Rank-1 tensors load as `1 x w`.
    pub fn read_checkpoint<R: Read>(mut input: R) -> Result<Self> {
        let mut bytes = Vec::new();
        input.read_to_end(&mut bytes)?;
        let mut cur = Cursor { bytes: &bytes, pos: 0 };
        if cur.take(8)? != CHECKPOINT_MAGIC {
            return Err(IlseError::Format {
                offset: 0,
                reason: "bad checkpoint magic".into(),
            });
        }
        let version = cur.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(IlseError::Format {
                offset: 8,
                reason: format!("unsupported checkpoint version {version}"),
            });
        }
        let mut store = ParamStore::new();
        while cur.pos < bytes.len() {
            let at = cur.pos as u64;
            let len = cur.u32()? as usize;
            let name = String::from_utf8(cur.take(len)?.to_vec()).map_err(|_| IlseError::Format {
                offset: at,
                reason: "parameter name is not utf-8".into(),
            })?;
            let rank = cur.u32()?;
            let dims = (0..rank).map(|_| cur.u64().map(|d| d as usize)).collect::<Result<Vec<_>>>()?;
            let (rows, cols) = match dims.as_slice() {
                [w] => (1, *w),
                [r, c] => (*r, *c),
                _ => {
                    return Err(IlseError::Format {
                        offset: at,
                        reason: format!("unsupported tensor rank {rank}"),
                    })
                }
            };
            let data = (0..rows * cols).map(|_| cur.f64()).collect::<Result<Vec<_>>>()?;
            let value = Matrix::from_shape_vec((rows, cols), data).map_err(|e| IlseError::Format {
                offset: at,
                reason: e.to_string(),
            })?;
            store.add(&name, value)?;
        }
        Ok(store)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(IlseError::Format {
                offset: self.pos as u64,
                reason: "truncated checkpoint".into(),
            });
        }
        let out = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}
