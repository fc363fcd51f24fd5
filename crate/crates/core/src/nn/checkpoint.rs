//! Versioned container of named `f64` arrays.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! magic     8 bytes   "GDMWCKPT"
//! version   u32       currently 1
//! count     u32       number of entries
//! entry*    name_len u32, name (UTF-8), ndim u32, dims u64 * ndim,
//!           values f64 * prod(dims) (IEEE-754 bit patterns)
//! ```
//!
//! Values are stored as raw bit patterns, so a load reproduces every
//! parameter exactly.

use std::io::{Read, Write};
use std::path::Path;

use super::{NnError, Tensor};

pub const MAGIC: &[u8; 8] = b"GDMWCKPT";
pub const VERSION: u32 = 1;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Checkpoint {
    entries: Vec<(String, Tensor)>,
}

impl Checkpoint {
    pub fn new() -> Self {
        Self::default()
    }

    /// Insert or replace `name`.
    pub fn insert(&mut self, name: impl Into<String>, tensor: Tensor) {
        let name = name.into();
        match self.entries.iter_mut().find(|(n, _)| *n == name) {
            Some(slot) => slot.1 = tensor,
            None => self.entries.push((name, tensor)),
        }
    }

    pub fn insert_scalar(&mut self, name: impl Into<String>, value: f64) {
        self.insert(name, Tensor::new(vec![1], vec![value]).expect("finite scalar"));
    }

    /// A `u64` split into two exactly representable 32-bit halves.
    pub fn insert_u64(&mut self, name: impl Into<String>, value: u64) {
        let halves = vec![(value >> 32) as f64, (value & 0xffff_ffff) as f64];
        self.insert(name, Tensor::new(vec![2], halves).expect("finite"));
    }

    /// Store a tensor list under `prefix.0`, `prefix.1`, ...
    pub fn insert_all(&mut self, prefix: &str, tensors: &[Tensor]) {
        for (i, t) in tensors.iter().enumerate() {
            self.insert(format!("{prefix}.{i}"), t.clone());
        }
    }

    pub fn get(&self, name: &str) -> Result<&Tensor, NnError> {
        self.entries
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t)
            .ok_or_else(|| NnError::Checkpoint(format!("missing entry `{name}`")))
    }

    pub fn scalar(&self, name: &str) -> Result<f64, NnError> {
        let t = self.get(name)?;
        t.data().first().copied().ok_or_else(|| NnError::Checkpoint(format!("`{name}` is empty")))
    }

    pub fn u64(&self, name: &str) -> Result<u64, NnError> {
        let d = self.get(name)?.data();
        if d.len() != 2 {
            return Err(NnError::Checkpoint(format!("`{name}` is not a u64 pair")));
        }
        Ok(((d[0] as u64) << 32) | d[1] as u64)
    }

    /// Tensors stored by [`Checkpoint::insert_all`].
    pub fn get_all(&self, prefix: &str, count: usize) -> Result<Vec<Tensor>, NnError> {
        (0..count).map(|i| self.get(&format!("{prefix}.{i}")).cloned()).collect()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(self.entries.len() as u32).to_le_bytes());
        for (name, t) in &self.entries {
            out.extend_from_slice(&(name.len() as u32).to_le_bytes());
            out.extend_from_slice(name.as_bytes());
            out.extend_from_slice(&(t.shape().len() as u32).to_le_bytes());
            for &d in t.shape() {
                out.extend_from_slice(&(d as u64).to_le_bytes());
            }
            for v in t.data() {
                out.extend_from_slice(&v.to_bits().to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = bytes;
        let mut magic = [0u8; 8];
        read_exact(&mut r, &mut magic)?;
        if &magic != MAGIC {
            return Err(NnError::Checkpoint("bad magic".into()));
        }
        let version = read_u32(&mut r)?;
        if version != VERSION {
            return Err(NnError::Checkpoint(format!("unsupported version {version}")));
        }
        let count = read_u32(&mut r)?;
        let mut ckpt = Checkpoint::new();
        for _ in 0..count {
            let name_len = read_u32(&mut r)? as usize;
            if name_len > r.len() {
                return Err(NnError::Checkpoint("truncated name".into()));
            }
            let mut name = vec![0u8; name_len];
            read_exact(&mut r, &mut name)?;
            let name = String::from_utf8(name).map_err(|_| NnError::Checkpoint("name is not UTF-8".into()))?;
            let ndim = read_u32(&mut r)? as usize;
            let mut shape = Vec::with_capacity(ndim.min(8));
            for _ in 0..ndim {
                shape.push(read_u64(&mut r)? as usize);
            }
            let len = shape
                .iter()
                .try_fold(1usize, |acc, &d| acc.checked_mul(d))
                .filter(|&l| l.checked_mul(8).is_some_and(|b| b <= r.len()))
                .ok_or_else(|| NnError::Checkpoint(format!("truncated values for `{name}`")))?;
            let data = (0..len).map(|_| read_u64(&mut r).map(f64::from_bits)).collect::<Result<Vec<_>, _>>()?;
            ckpt.entries.push((name, Tensor::new(shape, data)?));
        }
        if !r.is_empty() {
            return Err(NnError::Checkpoint(format!("{} trailing bytes", r.len())));
        }
        Ok(ckpt)
    }

    pub fn save(&self, path: &Path) -> Result<(), NnError> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(&self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

fn read_exact(r: &mut &[u8], buf: &mut [u8]) -> Result<(), NnError> {
    r.read_exact(buf).map_err(|_| NnError::Checkpoint("unexpected end of data".into()))
}

fn read_u32(r: &mut &[u8]) -> Result<u32, NnError> {
    let mut b = [0u8; 4];
    read_exact(r, &mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64(r: &mut &[u8]) -> Result<u64, NnError> {
    let mut b = [0u8; 8];
    read_exact(r, &mut b)?;
    Ok(u64::from_le_bytes(b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_corruption() {
        let mut c = Checkpoint::new();
        c.insert("w", Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap());
        let bytes = c.to_bytes();
        assert!(Checkpoint::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Checkpoint::from_bytes(&bad).is_err());
        let mut trailing = bytes;
        trailing.push(0);
        assert!(Checkpoint::from_bytes(&trailing).is_err());
    }

    #[test]
    fn u64_survives() {
        let mut c = Checkpoint::new();
        c.insert_u64("seed", u64::MAX - 12345);
        assert_eq!(c.u64("seed").unwrap(), u64::MAX - 12345);
        assert!(c.get("nope").is_err());
    }

    proptest! {
        #[test]
        fn round_trip_is_bit_exact(
            entries in prop::collection::vec(
                ("[a-z.]{1,12}", prop::collection::vec(-1e300f64..1e300, 0..40)),
                0..6,
            )
        ) {
            let mut c = Checkpoint::new();
            for (name, values) in entries {
                let n = values.len();
                c.insert(name, Tensor::new(vec![n], values).unwrap());
            }
            let back = Checkpoint::from_bytes(&c.to_bytes()).unwrap();
            prop_assert_eq!(back.len(), c.len());
            for ((n1, t1), (n2, t2)) in c.entries.iter().zip(&back.entries) {
                prop_assert_eq!(n1, n2);
                prop_assert_eq!(t1.shape(), t2.shape());
                for (a, b) in t1.data().iter().zip(t2.data()) {
                    prop_assert_eq!(a.to_bits(), b.to_bits());
                }
            }
        }
    }
}
