//! Binary embedding store: fixed header, little-endian `f32` body, JSON id
//! manifest at the end.

use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::encoder::{Embedding, Modality};
use crate::error::{Error, Result};

pub const STORE_MAGIC: &[u8; 6] = b"ULEMB\0";
pub const STORE_VERSION: u32 = 1;
pub const STORE_HEADER_LEN: usize = 6 + 4 * 5 + 8;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingStore {
    pub modality: Modality,
    pub tokens: usize,
    pub dim: usize,
    pub ids: Vec<String>,
    /// `ids.len() * tokens * dim` values, one embedding after another.
    pub data: Vec<f32>,
}

#[derive(Serialize, Deserialize)]
struct Manifest {
    ids: Vec<String>,
}

impl EmbeddingStore {
    pub fn from_embeddings(modality: Modality, tokens: usize, dim: usize, embeddings: &[Embedding]) -> Result<Self> {
        let mut data = Vec::with_capacity(embeddings.len() * tokens * dim);
        for e in embeddings {
            if e.tokens.dim() != (tokens, dim) {
                return Err(Error::ShapeMismatch(format!(
                    "embedding '{}' is {:?}, store expects ({tokens}, {dim})",
                    e.id,
                    e.tokens.dim()
                )));
            }
            if e.modality != modality {
                return Err(Error::ShapeMismatch(format!("embedding '{}' is {}, store is {modality}", e.id, e.modality)));
            }
            data.extend(e.flat().iter().map(|&v| v as f32));
        }
        Ok(Self { modality, tokens, dim, ids: embeddings.iter().map(|e| e.id.clone()).collect(), data })
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn to_embeddings(&self) -> Vec<Embedding> {
        let n = self.tokens * self.dim;
        self.ids
            .iter()
            .enumerate()
            .map(|(i, id)| Embedding {
                tokens: Array2::from_shape_fn((self.tokens, self.dim), |(t, d)| self.data[i * n + t * self.dim + d] as f64),
                modality: self.modality,
                id: id.clone(),
            })
            .collect()
    }

    pub fn encode(&self) -> Result<Vec<u8>> {
        if self.data.len() != self.ids.len() * self.tokens * self.dim {
            return Err(Error::ShapeMismatch("store body does not match its header".into()));
        }
        let body = self.data.len() * 4;
        let manifest = serde_json::to_vec(&Manifest { ids: self.ids.clone() }).map_err(|e| Error::Format(e.to_string()))?;
        let mut out = Vec::with_capacity(STORE_HEADER_LEN + body + manifest.len());
        out.extend_from_slice(STORE_MAGIC);
        for v in [STORE_VERSION, self.ids.len() as u32, self.tokens as u32, self.dim as u32, self.modality.index() as u32] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&((STORE_HEADER_LEN + body) as u64).to_le_bytes());
        for v in &self.data {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.extend_from_slice(&manifest);
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < STORE_HEADER_LEN {
            return Err(Error::Format("embedding store shorter than its header".into()));
        }
        if &bytes[..6] != STORE_MAGIC {
            return Err(Error::Format("bad embedding store magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().expect("4 bytes"));
        let version = u32_at(6);
        if version != STORE_VERSION {
            return Err(Error::Format(format!("unsupported embedding store version {version}")));
        }
        let (count, tokens, dim) = (u32_at(10) as usize, u32_at(14) as usize, u32_at(18) as usize);
        let modality = Modality::from_index(u32_at(22) as usize)
            .ok_or_else(|| Error::Format(format!("unknown modality tag {}", u32_at(22))))?;
        let manifest_offset = u64::from_le_bytes(bytes[26..34].try_into().expect("8 bytes")) as usize;
        let body = count
            .checked_mul(tokens)
            .and_then(|n| n.checked_mul(dim))
            .and_then(|n| n.checked_mul(4))
            .ok_or_else(|| Error::Format("embedding store header overflows".into()))?;
        if manifest_offset != STORE_HEADER_LEN + body || bytes.len() < manifest_offset {
            return Err(Error::Corrupt {
                offset: bytes.len().min(manifest_offset) as u64,
                message: format!("body length does not match header ({count} x {tokens} x {dim})"),
            });
        }
        let data = bytes[STORE_HEADER_LEN..manifest_offset]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect();
        let manifest: Manifest = serde_json::from_slice(&bytes[manifest_offset..])
            .map_err(|e| Error::Corrupt { offset: manifest_offset as u64, message: format!("bad id manifest: {e}") })?;
        if manifest.ids.len() != count {
            return Err(Error::Format(format!("manifest lists {} ids for {count} embeddings", manifest.ids.len())));
        }
        Ok(Self { modality, tokens, dim, ids: manifest.ids, data })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn store(n: usize, t: usize, d: usize) -> EmbeddingStore {
        let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
        EmbeddingStore {
            modality: Modality::Irradiance,
            tokens: t,
            dim: d,
            ids: (0..n).map(|i| format!("sample-{i}")).collect(),
            data: (0..n * t * d).map(|_| rng.gen_range(-1.0..1.0)).collect(),
        }
    }

    #[test]
    fn roundtrip_is_bit_exact() {
        let s = store(100, 8, 512);
        let back = EmbeddingStore::decode(&s.encode().unwrap()).unwrap();
        assert_eq!(back.ids, s.ids);
        assert!(back.data.iter().zip(&s.data).all(|(a, b)| a.to_bits() == b.to_bits()));
        assert_eq!(back.to_embeddings()[3].id, "sample-3");
    }

    #[test]
    fn empty_store() {
        let s = store(0, 8, 16);
        let back = EmbeddingStore::decode(&s.encode().unwrap()).unwrap();
        assert!(back.is_empty());
        assert!(back.to_embeddings().is_empty());
    }

    #[test]
    fn corruption_detected() {
        let bytes = store(3, 2, 4).encode().unwrap();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(EmbeddingStore::decode(&bad), Err(Error::Format(_))));
        let mut wrong_count = bytes.clone();
        wrong_count[10] = 4;
        assert!(EmbeddingStore::decode(&wrong_count).is_err());
        assert!(EmbeddingStore::decode(&bytes[..40]).is_err());
        let mut version = bytes;
        version[6] = 9;
        assert!(matches!(EmbeddingStore::decode(&version), Err(Error::Format(_))));
    }
}
