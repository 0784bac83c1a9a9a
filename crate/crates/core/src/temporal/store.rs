use std::collections::BTreeMap;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Tape, Tensor, Var};
use crate::temporal::Scheme;

/// Address of one state matrix.
///
/// Under UTA `relation` is always set; under ATU it is always `None` (the
/// aggregated state).
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateKey {
    pub layer: usize,
    pub relation: Option<usize>,
    pub node_type: usize,
}

/// Node states carried from one snapshot to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeStateStore {
    scheme: Scheme,
    entries: BTreeMap<StateKey, Tensor>,
}

const MAGIC: &[u8; 8] = b"THNSTATE";
const VERSION: u32 = 1;
const AGG: u32 = u32::MAX;

impl NodeStateStore {
    pub fn new(scheme: Scheme) -> Self {
        Self {
            scheme,
            entries: BTreeMap::new(),
        }
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn get(&self, key: &StateKey) -> Option<&Tensor> {
        self.entries.get(key)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&StateKey, &Tensor)> {
        self.entries.iter()
    }

    fn check_key(&self, key: &StateKey) -> Result<()> {
        match (self.scheme, key.relation) {
            (Scheme::Uta, Some(_)) | (Scheme::Atu, None) => Ok(()),
            (Scheme::Uta, None) => Err(Error::Contract("UTA store holds per-relation states only".into())),
            (Scheme::Atu, Some(_)) => Err(Error::Contract("ATU store holds aggregated states only".into())),
        }
    }

    pub fn insert(&mut self, key: StateKey, value: Tensor) -> Result<()> {
        self.check_key(&key)?;
        self.entries.insert(key, value);
        Ok(())
    }

    /// The stored state as a constant on `tape`, grown with zero rows to
    /// `rows`. Missing states start as zeros.
    pub fn bind(&self, tape: &mut Tape, key: &StateKey, rows: usize, dim: usize) -> Result<Var> {
        self.check_key(key)?;
        let value = match self.entries.get(key) {
            None => Tensor::zeros(rows, dim),
            Some(t) if t.cols() != dim => {
                return Err(Error::dim(format!(
                    "state {key:?} has width {}, layer expects {dim}",
                    t.cols()
                )))
            }
            Some(t) if t.rows() > rows => {
                return Err(Error::Contract(format!(
                    "state {key:?} covers {} nodes but only {rows} exist",
                    t.rows()
                )))
            }
            Some(t) => t.pad_rows(rows),
        };
        Ok(tape.constant(value))
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.push(match self.scheme {
            Scheme::Uta => 0,
            Scheme::Atu => 1,
        });
        out.extend_from_slice(&(self.entries.len() as u64).to_le_bytes());
        for (k, t) in &self.entries {
            out.extend_from_slice(&(k.layer as u32).to_le_bytes());
            out.extend_from_slice(&k.relation.map_or(AGG, |r| r as u32).to_le_bytes());
            out.extend_from_slice(&(k.node_type as u32).to_le_bytes());
            out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
            for x in t.data() {
                out.extend_from_slice(&x.to_le_bytes());
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut cur = Cursor { bytes, pos: 0 };
        if cur.take(8)? != MAGIC {
            return Err(Error::Validation("not a node-state checkpoint".into()));
        }
        let version = u32::from_le_bytes(cur.array()?);
        if version != VERSION {
            return Err(Error::Validation(format!("unsupported checkpoint version {version}")));
        }
        let scheme = match cur.take(1)?[0] {
            0 => Scheme::Uta,
            1 => Scheme::Atu,
            s => return Err(Error::Validation(format!("unknown scheme tag {s}"))),
        };
        let n = u64::from_le_bytes(cur.array()?);
        let mut store = Self::new(scheme);
        for _ in 0..n {
            let layer = u32::from_le_bytes(cur.array()?) as usize;
            let rel = u32::from_le_bytes(cur.array()?);
            let node_type = u32::from_le_bytes(cur.array()?) as usize;
            let rows = u64::from_le_bytes(cur.array()?) as usize;
            let cols = u64::from_le_bytes(cur.array()?) as usize;
            let len = rows
                .checked_mul(cols)
                .ok_or_else(|| Error::Validation("checkpoint entry too large".into()))?;
            let mut data = Vec::with_capacity(len.min(1 << 24));
            for _ in 0..len {
                data.push(f64::from_le_bytes(cur.array()?));
            }
            let key = StateKey {
                layer,
                relation: (rel != AGG).then_some(rel as usize),
                node_type,
            };
            store.insert(key, Tensor::from_vec(rows, cols, data)?)?;
        }
        if cur.pos != bytes.len() {
            return Err(Error::Validation("trailing bytes after checkpoint".into()));
        }
        Ok(store)
    }

    /// Writes the checkpoint atomically.
    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io::write_atomic(path, &self.to_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::Validation("truncated checkpoint".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N]> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}
