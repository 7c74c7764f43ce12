//! Model files: a versioned, self-describing binary format.
//!
//! Layout (all integers little-endian):
//!   magic "SSEQM", version u32,
//!   kind u8 (0 tokens / 1 events), attention u8,
//!   vocab_size u64, embed_dim u64, hidden_dim u64,
//!   (vocab_size - 5) strings (u32 length + UTF-8 bytes),
//!   parameter blocks in canonical order (u64 count + count f64),
//!   trailing magic "MEND".
//!
//! f64 bits pass through untouched, so save -> load round trips are
//! bit-exact.

use std::fs;
use std::path::Path;

use super::{ParamSet, SeqModel, SequenceKind};
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::fsutil::write_atomic;

pub const MODEL_FORMAT_VERSION: u32 = 1;
const MAGIC: &[u8; 5] = b"SSEQM";
const END_MAGIC: &[u8; 4] = b"MEND";

pub fn save_model(model: &SeqModel, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_FORMAT_VERSION.to_le_bytes());
    out.push(match model.kind {
        SequenceKind::Tokens => 0,
        SequenceKind::Events => 1,
    });
    out.push(model.has_attention() as u8);
    out.extend_from_slice(&(model.vocab_size() as u64).to_le_bytes());
    out.extend_from_slice(&(model.embed_dim as u64).to_le_bytes());
    out.extend_from_slice(&(model.hidden_dim as u64).to_le_bytes());
    for token in model.vocab.listed_tokens() {
        let bytes = token.as_bytes();
        out.extend_from_slice(&(bytes.len() as u32).to_le_bytes());
        out.extend_from_slice(bytes);
    }
    for (_, block) in model.params.blocks() {
        out.extend_from_slice(&(block.len() as u64).to_le_bytes());
        for v in block {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out.extend_from_slice(END_MAGIC);
    write_atomic(path, &out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::ModelFormat {
                path: self.path.to_owned(),
                message: format!(
                    "truncated file: wanted {} bytes at offset {}, only {} remain",
                    n,
                    self.pos,
                    self.bytes.len() - self.pos
                ),
            });
        }
        let slice = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn f64_block(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(8 * n)?;
        Ok(raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn load_model(path: &Path) -> Result<SeqModel> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    let fail = |message: String| Error::ModelFormat {
        path: path.to_owned(),
        message,
    };

    if r.take(MAGIC.len())? != MAGIC {
        return Err(fail("bad magic; not a model file".into()));
    }
    let version = r.u32()?;
    if version != MODEL_FORMAT_VERSION {
        return Err(fail(format!(
            "format version {version} not supported (expected {MODEL_FORMAT_VERSION})"
        )));
    }
    let kind = match r.u8()? {
        0 => SequenceKind::Tokens,
        1 => SequenceKind::Events,
        k => return Err(fail(format!("unknown sequence kind tag {k}"))),
    };
    let attention = match r.u8()? {
        0 => false,
        1 => true,
        a => return Err(fail(format!("unknown attention tag {a}"))),
    };
    let vocab_size = r.u64()? as usize;
    let embed_dim = r.u64()? as usize;
    let hidden_dim = r.u64()? as usize;
    if vocab_size < 5 || embed_dim == 0 || hidden_dim == 0 {
        return Err(fail(format!(
            "implausible dimensions: vocab {vocab_size}, embed {embed_dim}, hidden {hidden_dim}"
        )));
    }

    let mut tokens = Vec::with_capacity(vocab_size - 5);
    for _ in 0..vocab_size - 5 {
        let len = r.u32()? as usize;
        let raw = r.take(len)?;
        let tok = std::str::from_utf8(raw)
            .map_err(|_| fail("vocabulary entry is not valid UTF-8".into()))?;
        tokens.push(tok.to_owned());
    }
    let vocab = Vocabulary::from_listed_tokens(&tokens)
        .map_err(|e| fail(format!("bad vocabulary: {e}")))?;

    let mut params = ParamSet::zeros(vocab_size, embed_dim, hidden_dim, attention);
    for (name, block) in params.blocks_mut() {
        let declared = r.u64()? as usize;
        if declared != block.len() {
            return Err(fail(format!(
                "block {name}: file declares {declared} values, dimensions imply {}",
                block.len()
            )));
        }
        let values = r.f64_block(declared)?;
        block.copy_from_slice(&values);
    }

    if r.take(END_MAGIC.len())? != END_MAGIC {
        return Err(fail("missing end marker".into()));
    }
    if r.pos != bytes.len() {
        return Err(fail(format!(
            "{} trailing bytes after end marker",
            bytes.len() - r.pos
        )));
    }

    Ok(SeqModel {
        kind,
        vocab,
        embed_dim,
        hidden_dim,
        params,
    })
}
