//! Embedding exchange file.
//!
//! ```text
//! {"format":"proxylab-embeddings","version":1,"count":2,"dim":2,"labels":[7,3]}
//! 3ff0000000000000 0000000000000000
//! 0000000000000000 bff0000000000000
//! ```

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numgrad::Matrix;
use crate::textfmt;

const FORMAT: &str = "proxylab-embeddings";
const VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingSet {
    pub embeddings: Matrix,
    pub labels: Vec<u32>,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    count: usize,
    dim: usize,
    labels: Vec<u32>,
}

impl EmbeddingSet {
    pub fn new(embeddings: Matrix, labels: Vec<u32>) -> Result<Self> {
        if embeddings.rows() != labels.len() {
            return Err(Error::Shape {
                op: "embedding set",
                left: embeddings.shape(),
                right: (labels.len(), 1),
            });
        }
        Ok(Self { embeddings, labels })
    }

    pub fn to_text(&self) -> Result<String> {
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            count: self.labels.len(),
            dim: self.embeddings.cols(),
            labels: self.labels.clone(),
        };
        let mut out = Vec::new();
        textfmt::write(
            &mut out,
            &header,
            self.embeddings.iter_rows().map(|r| r.to_vec()),
        )?;
        Ok(String::from_utf8(out).expect("ascii output"))
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let (header, rows): (Header, _) =
            textfmt::read(text, FORMAT, VERSION, |h: &Header| (h.count, h.dim))?;
        if header.labels.len() != header.count {
            return Err(Error::parse(1, "label list length differs from count"));
        }
        let data = rows.into_iter().flatten().collect();
        Self::new(Matrix::new(header.count, header.dim, data)?, header.labels)
    }
}

pub fn save_embeddings(set: &EmbeddingSet, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, set.to_text()?)?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<EmbeddingSet> {
    EmbeddingSet::from_text(&fs::read_to_string(path)?)
}
