//! IDX files: big-endian `u32` magic (`0x0000_08NN`, type `u8`, `NN` dims),
//! one big-endian `u32` per dimension, then the raw bytes.

use std::path::Path;

use ndarray::Array2;

use super::{dense_class_count, Dataset};
use crate::error::{Error, Result};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

fn read_u32(bytes: &[u8], offset: usize) -> Option<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
}

/// Parsed header and payload of an IDX file.
struct Idx<'a> {
    dims: Vec<usize>,
    body: &'a [u8],
}

fn parse<'a>(bytes: &'a [u8], magic: u32, path: &Path) -> Result<Idx<'a>> {
    let found = read_u32(bytes, 0).ok_or_else(|| Error::format(path, "file shorter than the 4-byte magic number"))?;
    if found != magic {
        return Err(Error::format(
            path,
            format!("bad magic number 0x{found:08X}, expected 0x{magic:08X}"),
        ));
    }
    let ndim = (magic & 0xFF) as usize;
    let mut dims = Vec::with_capacity(ndim);
    for d in 0..ndim {
        let v = read_u32(bytes, 4 + 4 * d)
            .ok_or_else(|| Error::format(path, format!("truncated header: missing dimension {d}")))?;
        dims.push(v as usize);
    }
    let header = 4 + 4 * ndim;
    let expected = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| Error::format(path, "dimension product overflows"))?;
    let body = &bytes[header..];
    if body.len() < expected {
        return Err(Error::format(
            path,
            format!("truncated data: header declares {expected} bytes, found {}", body.len()),
        ));
    }
    if body.len() > expected {
        return Err(Error::format(
            path,
            format!("{} trailing bytes after the declared data", body.len() - expected),
        ));
    }
    Ok(Idx { dims, body })
}

/// Decodes an image file into `(rows, cols, pixels)` with one flattened image per row.
pub fn parse_idx_images(bytes: &[u8], path: &Path) -> Result<(usize, usize, Array2<f64>)> {
    let idx = parse(bytes, IDX_IMAGES_MAGIC, path)?;
    let (n, rows, cols) = (idx.dims[0], idx.dims[1], idx.dims[2]);
    let pixels = Array2::from_shape_fn((n, rows * cols), |(i, j)| f64::from(idx.body[i * rows * cols + j]) / 255.0);
    Ok((rows, cols, pixels))
}

pub fn parse_idx_labels(bytes: &[u8], path: &Path) -> Result<Vec<usize>> {
    let idx = parse(bytes, IDX_LABELS_MAGIC, path)?;
    Ok(idx.body.iter().map(|&b| usize::from(b)).collect())
}

/// Loads an image/label IDX pair. Pixel bytes are scaled to `[0, 1]`.
pub fn load_idx(images_path: impl AsRef<Path>, labels_path: impl AsRef<Path>) -> Result<Dataset> {
    let (images_path, labels_path) = (images_path.as_ref(), labels_path.as_ref());
    let image_bytes = std::fs::read(images_path).map_err(|e| Error::io(images_path, e))?;
    let label_bytes = std::fs::read(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let (_, _, features) = parse_idx_images(&image_bytes, images_path)?;
    let labels = parse_idx_labels(&label_bytes, labels_path)?;
    if features.nrows() != labels.len() {
        return Err(Error::format(
            labels_path,
            format!(
                "{} labels but {} images in {}",
                labels.len(),
                features.nrows(),
                images_path.display()
            ),
        ));
    }
    let k = dense_class_count(&labels).map_err(|d| Error::format(labels_path, d))?;
    let name = images_path
        .file_stem()
        .map_or_else(|| "idx".to_string(), |s| s.to_string_lossy().into_owned());
    Dataset::new(name, features, labels, k)
}

/// Encodes `n` images of `rows × cols` bytes.
pub fn encode_idx_images(n: usize, rows: usize, cols: usize, pixels: &[u8]) -> Result<Vec<u8>> {
    if pixels.len() != n * rows * cols {
        return Err(Error::shape(format!(
            "{} pixel bytes for {n} images of {rows}x{cols}",
            pixels.len()
        )));
    }
    let mut out = Vec::with_capacity(16 + pixels.len());
    out.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    for d in [n, rows, cols] {
        out.extend_from_slice(&dim_u32(d)?.to_be_bytes());
    }
    out.extend_from_slice(pixels);
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    out.extend_from_slice(&dim_u32(labels.len())?.to_be_bytes());
    out.extend_from_slice(labels);
    Ok(out)
}

fn dim_u32(d: usize) -> Result<u32> {
    u32::try_from(d).map_err(|_| Error::shape(format!("dimension {d} does not fit in u32")))
}
