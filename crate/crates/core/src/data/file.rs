//! Dataset file: a JSON header line followed by one line per sample.
//!
//! ```text
//! {"format":"proxylab-dataset","version":1,"kind":"points","count":2,"width":2,"spatial":null,"channels":null,"labels":[0,1],"class_names":null}
//! 3ff0000000000000 0000000000000000
//! bff0000000000000 3fe0000000000000
//! ```
//!
//! Each value is the 16-hex-digit IEEE-754 bit pattern of an `f64`, so the
//! rows above are `(1, 0)` and `(-1, 0.5)`. Feature-map rows hold the `M²×E`
//! map flattened position-major (all channels of position 0, then position 1,
//! ...), and `width = M²·E`.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{LabeledDataset, Samples};
use crate::error::{Error, Result};
use crate::numgrad::Matrix;
use crate::pooling::FeatureMap;
use crate::textfmt;

const FORMAT: &str = "proxylab-dataset";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum Kind {
    Points,
    FeatureMaps,
}

#[derive(Serialize, Deserialize)]
struct Header {
    format: String,
    version: u32,
    kind: Kind,
    count: usize,
    width: usize,
    spatial: Option<usize>,
    channels: Option<usize>,
    labels: Vec<u32>,
    class_names: Option<Vec<String>>,
}

pub trait DatasetText: Sized {
    fn to_text(&self) -> Result<String>;
    fn from_text(text: &str) -> Result<Self>;
}

impl DatasetText for LabeledDataset {
    fn to_text(&self) -> Result<String> {
        if self.is_empty() {
            return Err(Error::param("refusing to write an empty dataset"));
        }
        let (kind, width, spatial, channels, rows): (_, _, _, _, Vec<Vec<f64>>) = match &self.samples {
            Samples::Points(m) => (Kind::Points, m.cols(), None, None, m.iter_rows().map(<[f64]>::to_vec).collect()),
            Samples::FeatureMaps(maps) => {
                let (s, e) = (maps[0].spatial(), maps[0].channels());
                let rows = maps.iter().map(|f| f.data().as_slice().to_vec()).collect();
                (Kind::FeatureMaps, s * s * e, Some(s), Some(e), rows)
            }
        };
        let header = Header {
            format: FORMAT.into(),
            version: VERSION,
            kind,
            count: self.len(),
            width,
            spatial,
            channels,
            labels: self.labels.clone(),
            class_names: self.class_names.clone(),
        };
        let mut out = Vec::new();
        textfmt::write(&mut out, &header, rows.into_iter())?;
        Ok(String::from_utf8(out).expect("ascii output"))
    }

    fn from_text(text: &str) -> Result<Self> {
        let (header, rows): (Header, _) =
            textfmt::read(text, FORMAT, VERSION, |h: &Header| (h.count, h.width))?;
        if header.count == 0 {
            return Err(Error::parse(1, "dataset has no samples"));
        }
        if header.labels.len() != header.count {
            return Err(Error::parse(1, "label list length differs from count"));
        }
        if let Some(names) = &header.class_names {
            if names.is_empty() {
                return Err(Error::parse(1, "empty class_names list"));
            }
        }
        let samples = match header.kind {
            Kind::Points => Samples::Points(Matrix::new(header.count, header.width, rows.concat())?),
            Kind::FeatureMaps => {
                let (s, e) = match (header.spatial, header.channels) {
                    (Some(s), Some(e)) if s * s * e == header.width && s > 0 && e > 0 => (s, e),
                    _ => return Err(Error::parse(1, "feature maps need spatial and channels matching width")),
                };
                let maps = rows
                    .into_iter()
                    .map(|r| FeatureMap::new(s, Matrix::new(s * s, e, r)?))
                    .collect::<Result<Vec<_>>>()?;
                Samples::FeatureMaps(maps)
            }
        };
        let mut ds = LabeledDataset::new(samples, header.labels)?;
        ds.class_names = header.class_names;
        Ok(ds)
    }
}

pub fn save_dataset(ds: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, ds.to_text()?)?;
    Ok(())
}

pub fn load_dataset(path: impl AsRef<Path>) -> Result<LabeledDataset> {
    LabeledDataset::from_text(&fs::read_to_string(path)?)
}
