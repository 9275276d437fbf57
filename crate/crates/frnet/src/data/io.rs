//! Dataset persistence.
//!
//! Two formats behind one loader:
//!
//! **Single binary file** (all integers little-endian):
//!
//! ```text
//! magic       4 bytes  "FRDS"
//! version     u16      1
//! dtype       u8       1 = f32
//! ndim        u8       2 (flat: N,D) or 4 (images: N,C,H,W)
//! dims        ndim x u32
//! class_count u32
//! labels      N x u32
//! payload     product(dims) x f32, row-major (sample-major, then C, H, W)
//! ```
//!
//! **Directory**: `manifest.toml` (shape, class count, optional channel
//! stats) + `labels.bin` (N x u32 LE) + `values.bin` (raw f32 LE, row-major).

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::InputShape;
use crate::error::{Error, Result};

use super::{ChannelStats, Dataset, SplitTag};

const MAGIC: &[u8; 4] = b"FRDS";
const VERSION: u16 = 1;
const DTYPE_F32: u8 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DatasetFormat {
    Binary,
    Dir,
}

fn dims_of(ds: &Dataset) -> Vec<usize> {
    match ds.shape() {
        InputShape::Flat { dim } => vec![ds.len(), dim],
        InputShape::Image { channels, height, width } => {
            vec![ds.len(), channels, height, width]
        }
    }
}

fn shape_from_dims(path: &Path, dims: &[usize]) -> Result<(usize, InputShape)> {
    match dims {
        [n, d] => Ok((*n, InputShape::Flat { dim: *d })),
        [n, c, h, w] => Ok((*n, InputShape::Image { channels: *c, height: *h, width: *w })),
        _ => Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("unsupported rank {}", dims.len()),
        }),
    }
}

pub fn save_dataset_binary(ds: &Dataset, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.push(DTYPE_F32);
    let dims = dims_of(ds);
    out.push(dims.len() as u8);
    for d in &dims {
        out.extend_from_slice(&(*d as u32).to_le_bytes());
    }
    out.extend_from_slice(&(ds.class_count() as u32).to_le_bytes());
    for l in ds.labels() {
        out.extend_from_slice(&(*l as u32).to_le_bytes());
    }
    for v in ds.values() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn load_binary(path: &Path) -> Result<Dataset> {
    let bytes = std::fs::read(path)?;
    let need = |pos: usize, n: usize| -> Result<()> {
        if pos + n > bytes.len() {
            Err(Error::TruncatedPayload {
                path: path.to_path_buf(),
                expected_bytes: (pos + n) as u64,
                actual_bytes: bytes.len() as u64,
            })
        } else {
            Ok(())
        }
    };

    need(0, 8)?;
    if &bytes[0..4] != MAGIC {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("bad magic {:02x?}", &bytes[0..4]),
        });
    }
    let version = u16::from_le_bytes([bytes[4], bytes[5]]);
    if version != VERSION {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("unsupported version {version}"),
        });
    }
    if bytes[6] != DTYPE_F32 {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("unsupported dtype {}", bytes[6]),
        });
    }
    let ndim = bytes[7] as usize;
    if ndim != 2 && ndim != 4 {
        return Err(Error::CorruptHeader {
            path: path.to_path_buf(),
            detail: format!("unsupported rank {ndim}"),
        });
    }
    let mut pos = 8;
    need(pos, 4 * ndim + 4)?;
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize);
        pos += 4;
    }
    let class_count = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
    pos += 4;

    let (n, shape) = shape_from_dims(path, &dims)?;
    need(pos, 4 * n)?;
    let mut labels = Vec::with_capacity(n);
    for _ in 0..n {
        let l = u32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()) as usize;
        if l >= class_count {
            return Err(Error::LabelOutOfRange { label: l, classes: class_count });
        }
        labels.push(l);
        pos += 4;
    }
    let numel: usize = dims.iter().product();
    need(pos, 4 * numel)?;
    let mut values = Vec::with_capacity(numel);
    for _ in 0..numel {
        values.push(f32::from_le_bytes(bytes[pos..pos + 4].try_into().unwrap()));
        pos += 4;
    }
    Dataset::new(values, shape, labels, class_count, SplitTag::Train)
}

#[derive(Debug, Serialize, Deserialize)]
struct Manifest {
    shape: Vec<usize>,
    class_count: usize,
    #[serde(default)]
    normalize: Option<ChannelStats>,
}

pub fn save_dataset_dir(ds: &Dataset, dir: &Path, stats: Option<&ChannelStats>) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let manifest = Manifest {
        shape: dims_of(ds),
        class_count: ds.class_count(),
        normalize: stats.cloned(),
    };
    let manifest_toml = toml::to_string(&manifest)
        .map_err(|e| Error::InvalidConfig(format!("manifest not serializable: {e}")))?;
    std::fs::write(dir.join("manifest.toml"), manifest_toml)?;

    let mut labels = Vec::with_capacity(ds.len() * 4);
    for l in ds.labels() {
        labels.extend_from_slice(&(*l as u32).to_le_bytes());
    }
    std::fs::write(dir.join("labels.bin"), labels)?;

    let mut values = Vec::with_capacity(ds.values().len() * 4);
    for v in ds.values() {
        values.extend_from_slice(&v.to_le_bytes());
    }
    std::fs::write(dir.join("values.bin"), values)?;
    Ok(())
}

fn load_dir(dir: &Path) -> Result<(Dataset, Option<ChannelStats>)> {
    let manifest_path = dir.join("manifest.toml");
    let manifest_str = std::fs::read_to_string(&manifest_path)?;
    let manifest: Manifest =
        toml::from_str(&manifest_str).map_err(|e| Error::CorruptHeader {
            path: manifest_path.clone(),
            detail: format!("manifest not parseable: {e}"),
        })?;
    let (n, shape) = shape_from_dims(&manifest_path, &manifest.shape)?;

    let labels_path = dir.join("labels.bin");
    let label_bytes = std::fs::read(&labels_path)?;
    if label_bytes.len() != 4 * n {
        return Err(Error::TruncatedPayload {
            path: labels_path,
            expected_bytes: (4 * n) as u64,
            actual_bytes: label_bytes.len() as u64,
        });
    }
    let labels: Vec<usize> = label_bytes
        .chunks_exact(4)
        .map(|c| u32::from_le_bytes(c.try_into().unwrap()) as usize)
        .collect();
    if let Some(&max) = labels.iter().max() {
        if max >= manifest.class_count {
            return Err(Error::ValidationFailed {
                path: dir.join("manifest.toml"),
                detail: format!(
                    "class_count {} inconsistent with max label {max}",
                    manifest.class_count
                ),
            });
        }
    }

    let values_path = dir.join("values.bin");
    let value_bytes = std::fs::read(&values_path)?;
    let numel: usize = manifest.shape.iter().product();
    if value_bytes.len() != 4 * numel {
        return Err(Error::TruncatedPayload {
            path: values_path,
            expected_bytes: (4 * numel) as u64,
            actual_bytes: value_bytes.len() as u64,
        });
    }
    let values: Vec<f32> = value_bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    let ds = Dataset::new(values, shape, labels, manifest.class_count, SplitTag::Train)?;
    Ok((ds, manifest.normalize))
}

/// Load a dataset in either format. Directory loads also return any channel
/// statistics stored in the manifest.
pub fn load_image_dataset(path: &Path, format: DatasetFormat) -> Result<(Dataset, Option<ChannelStats>)> {
    match format {
        DatasetFormat::Binary => Ok((load_binary(path)?, None)),
        DatasetFormat::Dir => load_dir(path),
    }
}
