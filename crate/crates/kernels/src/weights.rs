//! Named-tensor weights archive.
//!
//! Layout (all integers little-endian):
//!
//! ```text
//! magic   b"NFWA"
//! version u32 = 1
//! count   u32
//! repeat count times:
//!   name_len u32, name (UTF-8)
//!   ndim u32, dims u64 × ndim
//!   data f32 × prod(dims), row-major
//! ```

use std::collections::BTreeMap;
use std::io::{Read, Write};

use ndarray::{Array1, Array2};

use crate::error::{KernelError, Result};
use crate::forward::PolicyParams;
use crate::gat::{GatHead, GatParams};
use crate::gate::GateParams;
use crate::linear::Linear;
use crate::norm::LayerNorm;
use crate::ode::MlpDynamics;
use crate::LAYER_NORM_EPS;

const MAGIC: &[u8; 4] = b"NFWA";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl Tensor {
    fn from_array1(a: &Array1<f64>) -> Self {
        Self {
            shape: vec![a.len()],
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }

    fn from_array2(a: &Array2<f64>) -> Self {
        Self {
            shape: vec![a.nrows(), a.ncols()],
            data: a.iter().map(|&v| v as f32).collect(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightsArchive {
    pub tensors: BTreeMap<String, Tensor>,
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut buf = [0u8; 4];
    r.read_exact(&mut buf)?;
    Ok(u32::from_le_bytes(buf))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut buf = [0u8; 8];
    r.read_exact(&mut buf)?;
    Ok(u64::from_le_bytes(buf))
}

impl WeightsArchive {
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        self.tensors.insert(name.into(), tensor);
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| KernelError::MissingTensor(name.to_string()))
    }

    pub fn array1(&self, name: &str) -> Result<Array1<f64>> {
        let t = self.get(name)?;
        if t.shape.len() != 1 {
            return Err(KernelError::Format(format!("`{name}` is not 1-d: {:?}", t.shape)));
        }
        Ok(t.data.iter().map(|&v| v as f64).collect())
    }

    pub fn array2(&self, name: &str) -> Result<Array2<f64>> {
        let t = self.get(name)?;
        if t.shape.len() != 2 {
            return Err(KernelError::Format(format!("`{name}` is not 2-d: {:?}", t.shape)));
        }
        Array2::from_shape_vec((t.shape[0], t.shape[1]), t.data.iter().map(|&v| v as f64).collect())
            .map_err(|e| KernelError::Format(e.to_string()))
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&VERSION.to_le_bytes())?;
        w.write_all(&(self.tensors.len() as u32).to_le_bytes())?;
        for (name, t) in &self.tensors {
            w.write_all(&(name.len() as u32).to_le_bytes())?;
            w.write_all(name.as_bytes())?;
            w.write_all(&(t.shape.len() as u32).to_le_bytes())?;
            for &d in &t.shape {
                w.write_all(&(d as u64).to_le_bytes())?;
            }
            for &v in &t.data {
                w.write_all(&v.to_le_bytes())?;
            }
        }
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(KernelError::Format("bad magic".into()));
        }
        let version = read_u32(r)?;
        if version != VERSION {
            return Err(KernelError::Format(format!("unsupported version {version}")));
        }
        let count = read_u32(r)?;
        let mut archive = Self::default();
        for _ in 0..count {
            let name_len = read_u32(r)? as usize;
            let mut name = vec![0u8; name_len];
            r.read_exact(&mut name)?;
            let name = String::from_utf8(name).map_err(|e| KernelError::Format(e.to_string()))?;
            let ndim = read_u32(r)? as usize;
            let mut shape = Vec::with_capacity(ndim);
            for _ in 0..ndim {
                shape.push(read_u64(r)? as usize);
            }
            let len: usize = shape.iter().product();
            let mut raw = vec![0u8; len * 4];
            r.read_exact(&mut raw)?;
            let data = raw
                .chunks_exact(4)
                .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
                .collect();
            archive.insert(name, Tensor { shape, data });
        }
        Ok(archive)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        buf
    }
}

fn put_linear(archive: &mut WeightsArchive, prefix: &str, l: &Linear) {
    archive.insert(format!("{prefix}.weight"), Tensor::from_array2(&l.weight));
    archive.insert(format!("{prefix}.bias"), Tensor::from_array1(&l.bias));
}

fn get_linear(archive: &WeightsArchive, prefix: &str) -> Result<Linear> {
    Ok(Linear {
        weight: archive.array2(&format!("{prefix}.weight"))?,
        bias: archive.array1(&format!("{prefix}.bias"))?,
    })
}

fn put_norm(archive: &mut WeightsArchive, prefix: &str, n: &LayerNorm) {
    archive.insert(format!("{prefix}.gamma"), Tensor::from_array1(&n.gamma));
    archive.insert(format!("{prefix}.beta"), Tensor::from_array1(&n.beta));
}

fn get_norm(archive: &WeightsArchive, prefix: &str) -> Result<LayerNorm> {
    Ok(LayerNorm {
        gamma: archive.array1(&format!("{prefix}.gamma"))?,
        beta: archive.array1(&format!("{prefix}.beta"))?,
        eps: LAYER_NORM_EPS,
    })
}

impl PolicyParams {
    pub fn to_archive(&self) -> WeightsArchive {
        let mut a = WeightsArchive::default();
        for (k, head) in self.gat.heads.iter().enumerate() {
            a.insert(format!("gat.head{k}.weight"), Tensor::from_array2(&head.weight));
            a.insert(format!("gat.head{k}.attn"), Tensor::from_array1(&head.attn));
        }
        put_norm(&mut a, "gat.norm", &self.gat.norm);
        a.insert("msg.weight", Tensor::from_array2(&self.msg));
        put_linear(&mut a, "ode.inner", &self.ode.inner);
        put_linear(&mut a, "ode.outer", &self.ode.outer);
        a.insert("gate.w_gate", Tensor::from_array2(&self.gate.w_gate));
        a.insert("gate.w_cand", Tensor::from_array2(&self.gate.w_cand));
        put_norm(&mut a, "gate.norm", &self.gate.norm);
        put_linear(&mut a, "head.type", &self.type_head);
        put_linear(&mut a, "head.target", &self.target_head);
        put_linear(&mut a, "value", &self.value_head);
        a
    }

    pub fn from_archive(a: &WeightsArchive) -> Result<Self> {
        let mut heads = Vec::new();
        while a.tensors.contains_key(&format!("gat.head{}.weight", heads.len())) {
            let k = heads.len();
            heads.push(GatHead {
                weight: a.array2(&format!("gat.head{k}.weight"))?,
                attn: a.array1(&format!("gat.head{k}.attn"))?,
            });
        }
        if heads.is_empty() {
            return Err(KernelError::MissingTensor("gat.head0.weight".into()));
        }
        Ok(Self {
            gat: GatParams {
                heads,
                norm: get_norm(a, "gat.norm")?,
            },
            msg: a.array2("msg.weight")?,
            ode: MlpDynamics {
                inner: get_linear(a, "ode.inner")?,
                outer: get_linear(a, "ode.outer")?,
            },
            gate: GateParams {
                w_gate: a.array2("gate.w_gate")?,
                w_cand: a.array2("gate.w_cand")?,
                norm: get_norm(a, "gate.norm")?,
            },
            type_head: get_linear(a, "head.type")?,
            target_head: get_linear(a, "head.target")?,
            value_head: get_linear(a, "value")?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn archive_round_trip_preserves_f32_values() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let params = PolicyParams::random(8, 2, &mut rng);
        let bytes = params.to_archive().to_bytes();
        let archive = WeightsArchive::read_from(&mut bytes.as_slice()).unwrap();
        let loaded = PolicyParams::from_archive(&archive).unwrap();
        assert_eq!(loaded.gat.heads.len(), 2);
        // a second trip is lossless once values are f32-representable
        assert_eq!(PolicyParams::from_archive(&loaded.to_archive()).unwrap(), loaded);
        assert!((loaded.msg[[1, 2]] - params.msg[[1, 2]]).abs() < 1e-6);
    }

    #[test]
    fn header_is_little_endian() {
        let mut a = WeightsArchive::default();
        a.insert("x", Tensor { shape: vec![1], data: vec![1.0] });
        let bytes = a.to_bytes();
        assert_eq!(&bytes[..4], b"NFWA");
        assert_eq!(&bytes[4..8], &[1, 0, 0, 0]);
        assert_eq!(&bytes[bytes.len() - 4..], &1.0f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_magic_and_missing_tensors() {
        assert!(WeightsArchive::read_from(&mut &b"XXXX\x01\0\0\0\0\0\0\0"[..]).is_err());
        assert!(matches!(
            PolicyParams::from_archive(&WeightsArchive::default()),
            Err(KernelError::MissingTensor(_))
        ));
    }
}
