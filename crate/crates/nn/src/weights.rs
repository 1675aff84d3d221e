//! Checkpoints: NNWT tensor file plus a JSON architecture descriptor.
//!
//! NNWT layout (little-endian): `b"NNWT"`, version `u32`, tensor count
//! `u32`; then per tensor a `u16` name length, the UTF-8 name, `u8` rank,
//! `u32` per dimension and the `f32` values in row-major order.

use std::fs;
use std::path::Path;

use crate::graph::{Architecture, ModelGraph};
use crate::real::Real;
use crate::NnError;

pub const NNWT_MAGIC: [u8; 4] = *b"NNWT";
pub const NNWT_VERSION: u32 = 1;

pub fn to_nnwt<T: Real>(graph: &ModelGraph<T>) -> Vec<u8> {
    let params = graph.params();
    let mut out = Vec::new();
    out.extend_from_slice(&NNWT_MAGIC);
    out.extend_from_slice(&NNWT_VERSION.to_le_bytes());
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for p in params {
        out.extend_from_slice(&(p.name.len() as u16).to_le_bytes());
        out.extend_from_slice(p.name.as_bytes());
        out.push(p.shape.len() as u8);
        for &d in &p.shape {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in p.value.data() {
            out.extend_from_slice(&v.to_le_f32());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], NnError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| NnError::BadWeights("unexpected end of file".into()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, NnError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Loads values into a graph whose parameter names and shapes must match.
pub fn load_nnwt<T: Real>(graph: &mut ModelGraph<T>, bytes: &[u8]) -> Result<(), NnError> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(4)? != NNWT_MAGIC {
        return Err(NnError::BadWeights("not an NNWT file".into()));
    }
    let version = r.u32()?;
    if version != NNWT_VERSION {
        return Err(NnError::BadWeights(format!("unsupported version {version}")));
    }
    let count = r.u32()? as usize;
    if count != graph.params().len() {
        return Err(NnError::BadWeights(format!(
            "{count} tensors for a graph with {}",
            graph.params().len()
        )));
    }
    for p in graph.params_mut() {
        let len = u16::from_le_bytes(r.take(2)?.try_into().unwrap()) as usize;
        let name = std::str::from_utf8(r.take(len)?).map_err(|e| NnError::BadWeights(e.to_string()))?;
        let rank = r.take(1)?[0] as usize;
        let shape = (0..rank)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        if name != p.name || shape != p.shape {
            return Err(NnError::BadWeights(format!(
                "expected {} {:?}, found {name} {shape:?}",
                p.name, p.shape
            )));
        }
        let raw = r.take(4 * p.value.len())?;
        for (v, b) in p.value.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = T::from_f64(f32::from_le_bytes(b.try_into().unwrap()) as f64);
        }
    }
    if r.pos != bytes.len() {
        return Err(NnError::BadWeights("trailing bytes".into()));
    }
    Ok(())
}

/// Writes `<stem>.nnwt` and `<stem>.json`.
pub fn save_checkpoint<T: Real>(graph: &ModelGraph<T>, dir: &Path, stem: &str) -> Result<(), NnError> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join(format!("{stem}.nnwt")), to_nnwt(graph))?;
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_vec_pretty(graph.architecture())?,
    )?;
    Ok(())
}

pub fn load_checkpoint<T: Real>(dir: &Path, stem: &str) -> Result<ModelGraph<T>, NnError> {
    let arch: Architecture = serde_json::from_slice(&fs::read(dir.join(format!("{stem}.json")))?)?;
    let mut graph = ModelGraph::zeroed(arch)?;
    load_nnwt(&mut graph, &fs::read(dir.join(format!("{stem}.nnwt")))?)?;
    Ok(graph)
}
