//! Model checkpoints: a magic line, a JSON header describing the
//! configuration, vocabulary, and tensor shapes, then the raw parameter
//! data as little-endian doubles in header order.

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, PointerModel};
use super::vocab::{Vocab, VocabData};
use super::PointerError;

const MAGIC: &[u8] = b"UNCROSS-POINTER\n";
const VERSION: u32 = 1;

#[derive(Debug, Serialize, Deserialize)]
struct Header {
    version: u32,
    config: ModelConfig,
    vocab: VocabData,
    tensors: Vec<TensorMeta>,
}

#[derive(Debug, Serialize, Deserialize)]
struct TensorMeta {
    name: String,
    rows: usize,
    cols: usize,
}

pub fn save(model: &PointerModel) -> Vec<u8> {
    let header = Header {
        version: VERSION,
        config: model.config().clone(),
        vocab: model.vocab().to_data(),
        tensors: model
            .params()
            .iter()
            .map(|(name, t)| TensorMeta {
                name: name.to_string(),
                rows: t.rows,
                cols: t.cols,
            })
            .collect(),
    };
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(serde_json::to_string(&header).expect("serializable").as_bytes());
    out.push(b'\n');
    for (_, tensor) in model.params().iter() {
        for &v in &tensor.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn load(bytes: &[u8]) -> Result<PointerModel, PointerError> {
    let bad = |msg: &str| PointerError::Checkpoint(msg.to_string());
    if !bytes.starts_with(MAGIC) {
        return Err(bad("not a pointer checkpoint (bad magic)"));
    }
    let rest = &bytes[MAGIC.len()..];
    let header_end = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| bad("truncated header"))?;
    let header: Header = serde_json::from_slice(&rest[..header_end])
        .map_err(|e| PointerError::Checkpoint(format!("bad header: {e}")))?;
    if header.version != VERSION {
        return Err(PointerError::Checkpoint(format!(
            "unsupported checkpoint version {}",
            header.version
        )));
    }
    let vocab = Vocab::from_data(header.vocab);
    let mut model = PointerModel::new(header.config, vocab, 0)?;

    let mut offset = MAGIC.len() + header_end + 1;
    if header.tensors.len() != model.params().len() {
        return Err(bad("tensor list does not match the architecture"));
    }
    for (meta, (name, _)) in header.tensors.iter().zip(model.params().iter()) {
        if meta.name != name {
            return Err(PointerError::Checkpoint(format!(
                "tensor {} out of order (expected {name})",
                meta.name
            )));
        }
    }
    for (idx, meta) in header.tensors.iter().enumerate() {
        let tensor = &mut model.params_mut().tensors_mut()[idx];
        if tensor.rows != meta.rows || tensor.cols != meta.cols {
            return Err(PointerError::Checkpoint(format!(
                "tensor {}: shape {}x{} does not match {}x{}",
                meta.name, meta.rows, meta.cols, tensor.rows, tensor.cols
            )));
        }
        let need = tensor.data.len() * 8;
        let chunk = bytes
            .get(offset..offset + need)
            .ok_or_else(|| bad("truncated tensor data"))?;
        for (v, raw) in tensor.data.iter_mut().zip(chunk.chunks_exact(8)) {
            *v = f64::from_le_bytes(raw.try_into().expect("chunk of 8"));
        }
        offset += need;
    }
    if offset != bytes.len() {
        return Err(bad("trailing bytes after tensor data"));
    }
    model.audit_shapes();
    Ok(model)
}
