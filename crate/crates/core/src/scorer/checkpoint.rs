//! Binary checkpoint container.
//!
//! Layout, all integers little-endian `u32`:
//! magic `CRFKCKPT`, version, config text (length-prefixed `key = value`
//! lines), token vocabulary, deprel vocabulary (count then length-prefixed
//! strings, reserved entries excluded), then every parameter array as name,
//! rows, cols and `rows·cols` little-endian `f32` values.

use std::io::{Read, Write};

use super::config::ModelConfig;
use super::params::Parameters;
use super::vocab::Vocab;
use super::Model;
use crate::error::{Error, Result};
use crate::kv::KeyValues;
use crate::tensor::Mat;

const MAGIC: &[u8; 8] = b"CRFKCKPT";
const VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&(v as u32).to_le_bytes());
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    put_u32(out, s.len());
    out.extend_from_slice(s.as_bytes());
}

pub fn to_bytes(model: &Model) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let mut kv = KeyValues::default();
    model.config.write_kv(&mut kv);
    put_str(&mut out, &kv.to_text());
    for list in [&model.vocab.tokens, &model.vocab.deprels] {
        put_u32(&mut out, list.len() - 2);
        for s in &list[2..] {
            put_str(&mut out, s);
        }
    }
    put_u32(&mut out, model.params.arrays.len());
    for (name, m) in &model.params.arrays {
        put_str(&mut out, name);
        put_u32(&mut out, m.rows);
        put_u32(&mut out, m.cols);
        for &v in &m.data {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.buf.len() {
            return Err(Error::Checkpoint("truncated file".into()));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<usize> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u32()?;
        String::from_utf8(self.take(n)?.to_vec()).map_err(|_| Error::Checkpoint("invalid UTF-8".into()))
    }
}

pub fn from_bytes(buf: &[u8]) -> Result<Model> {
    let mut r = Reader { buf, pos: 0 };
    if r.take(8)? != MAGIC.as_slice() {
        return Err(Error::Checkpoint("not a checkpoint file".into()));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::Checkpoint(format!("unsupported version {version}")));
    }
    let config = ModelConfig::from_kv(&KeyValues::parse(&r.string()?)?)?;
    let mut lists = Vec::new();
    for _ in 0..2 {
        let n = r.u32()?;
        lists.push((0..n).map(|_| r.string()).collect::<Result<Vec<_>>>()?);
    }
    let deprels = lists.pop().unwrap();
    let tokens = lists.pop().unwrap();
    let vocab = Vocab::from_lists(tokens, deprels);
    let count = r.u32()?;
    let mut arrays = Vec::with_capacity(count);
    for _ in 0..count {
        let name = r.string()?;
        let rows = r.u32()?;
        let cols = r.u32()?;
        let raw = r.take(rows * cols * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        arrays.push((name, Mat::from_vec(rows, cols, data)));
    }
    if r.pos != buf.len() {
        return Err(Error::Checkpoint("trailing bytes".into()));
    }
    let params = Parameters { arrays };
    if !params.matches(&config) {
        return Err(Error::Checkpoint("parameter arrays do not match the stored configuration".into()));
    }
    if vocab.num_tokens() != config.encoder.vocab_size || vocab.num_deprels() != config.num_deprels {
        return Err(Error::Checkpoint("vocabulary size does not match the configuration".into()));
    }
    Ok(Model { config, vocab, params })
}

pub fn save(model: &Model, path: &std::path::Path) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&to_bytes(model))?;
    Ok(())
}

pub fn load(path: &std::path::Path) -> Result<Model> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    from_bytes(&buf)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scorer::{SingletonMode, Span2HeadMode};

    #[test]
    fn round_trip_preserves_f32_values() {
        let vocab = Vocab::from_lists(vec!["a".into(), "b".into()], vec!["nsubj".into()]);
        let cfg = ModelConfig {
            singleton_mode: SingletonMode::Separate,
            span2head: Span2HeadMode::Multiclass,
            ..small()
        };
        let model = Model::new(cfg, vocab, 7).unwrap();
        let back = from_bytes(&to_bytes(&model)).unwrap();
        assert_eq!(back.config, model.config);
        assert_eq!(back.vocab, model.vocab);
        for ((n1, a), (n2, b)) in model.params.arrays.iter().zip(&back.params.arrays) {
            assert_eq!(n1, n2);
            for (x, y) in a.data.iter().zip(&b.data) {
                assert_eq!(*x as f32, *y as f32);
            }
        }
    }

    #[test]
    fn corrupt_files_are_rejected() {
        let model = Model::new(small(), Vocab::default(), 1).unwrap();
        let bytes = to_bytes(&model);
        assert!(from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(from_bytes(b"NOTACKPT").is_err());
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(from_bytes(&extra).is_err());
    }

    fn small() -> ModelConfig {
        ModelConfig {
            hidden_dim: 4,
            width_dim: 2,
            distance_dim: 2,
            max_span_width: 3,
            encoder: crate::scorer::EncoderConfig {
                embedding_dim: 4,
                ..Default::default()
            },
            ..ModelConfig::default()
        }
    }
}
