//! IDX image/label containers and the grayscale preprocessing that turns a
//! raw 8-bit image into a per-element load vector.
//!
//! Pixel grids are stored row-major in [`RawImage`]. Grayscale vectors in a
//! [`Sample`] are column-major (`gray[col * rows + row]`) so that the element
//! numbering of [`GridMesh`](crate::fem::GridMesh) lines up with pixels.

use std::fs;
use std::path::Path;

use crate::error::{Error, IdxKind, Result};

pub const IMAGE_MAGIC: u32 = 0x0000_0803;
pub const LABEL_MAGIC: u32 = 0x0000_0801;

/// An unsigned 8-bit grayscale image, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawImage {
    rows: usize,
    cols: usize,
    pixels: Vec<u8>,
}

impl RawImage {
    pub fn new(rows: usize, cols: usize, pixels: Vec<u8>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::DimensionMismatch(format!(
                "image must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if pixels.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{rows}x{cols} image needs {} pixels, got {}",
                rows * cols,
                pixels.len()
            )));
        }
        Ok(RawImage { rows, cols, pixels })
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        RawImage {
            rows,
            cols,
            pixels: vec![0; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u8 {
        self.pixels[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: u8) {
        self.pixels[row * self.cols + col] = value;
    }

    /// Intensity-weighted mean `(row, col)` coordinate, or `None` for a blank image.
    pub fn centroid(&self) -> Option<(f64, f64)> {
        let mut total = 0.0;
        let mut sr = 0.0;
        let mut sc = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let v = f64::from(self.get(r, c));
                total += v;
                sr += v * r as f64;
                sc += v * c as f64;
            }
        }
        (total > 0.0).then(|| (sr / total, sc / total))
    }

    /// Integer translation that moves the centroid to the grid center
    /// `((rows-1)/2, (cols-1)/2)`. Offsets of at most half a pixel round to
    /// zero, which makes alignment idempotent.
    pub fn centroid_shift(&self) -> Result<(i64, i64)> {
        let (cr, cc) = self.centroid().ok_or(Error::BlankImage)?;
        let target_r = (self.rows as f64 - 1.0) / 2.0;
        let target_c = (self.cols as f64 - 1.0) / 2.0;
        Ok((round_half_toward_zero(target_r - cr), round_half_toward_zero(target_c - cc)))
    }

    /// Shifts pixels by `(dr, dc)`; pixels leaving the grid are dropped and
    /// vacated pixels become zero.
    pub fn translated(&self, dr: i64, dc: i64) -> RawImage {
        let mut out = RawImage::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let nr = r as i64 + dr;
            if nr < 0 || nr >= self.rows as i64 {
                continue;
            }
            for c in 0..self.cols {
                let nc = c as i64 + dc;
                if nc < 0 || nc >= self.cols as i64 {
                    continue;
                }
                out.set(nr as usize, nc as usize, self.get(r, c));
            }
        }
        out
    }

    /// Centroid-aligned copy of the image.
    pub fn aligned(&self) -> Result<RawImage> {
        let (dr, dc) = self.centroid_shift()?;
        Ok(self.translated(dr, dc))
    }
}

fn round_half_toward_zero(x: f64) -> i64 {
    // the small slack absorbs rounding in the centroid sums at exact half offsets
    let m = (x.abs() - 0.5 - 1e-9).ceil().max(0.0);
    (m * x.signum()) as i64
}

/// Scaling applied after dividing by 255.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    /// Unit Euclidean norm.
    #[default]
    L2,
    /// Unit sum.
    L1,
    /// Unit maximum.
    Max,
    /// Values stay in `[0, 1]`.
    None,
}

impl std::str::FromStr for Normalization {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "l2" => Ok(Normalization::L2),
            "l1" => Ok(Normalization::L1),
            "max" => Ok(Normalization::Max),
            "none" => Ok(Normalization::None),
            other => Err(Error::Config(format!("unknown normalization '{other}'"))),
        }
    }
}

impl std::fmt::Display for Normalization {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Normalization::L2 => "l2",
            Normalization::L1 => "l1",
            Normalization::Max => "max",
            Normalization::None => "none",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Preprocess {
    pub align_centroid: bool,
    pub normalization: Normalization,
}

impl Default for Preprocess {
    fn default() -> Self {
        Preprocess {
            align_centroid: true,
            normalization: Normalization::L2,
        }
    }
}

/// Aligns the centroid, scales to `[0, 1]` and normalizes. The result is a
/// column-major grayscale vector of length `rows * cols`.
pub fn preprocess(img: &RawImage) -> Result<Vec<f64>> {
    preprocess_with(img, Preprocess::default())
}

pub fn preprocess_with(img: &RawImage, opts: Preprocess) -> Result<Vec<f64>> {
    let aligned;
    let src = if opts.align_centroid {
        aligned = img.aligned()?;
        &aligned
    } else {
        if img.centroid().is_none() {
            return Err(Error::BlankImage);
        }
        img
    };
    let (rows, cols) = (src.rows(), src.cols());
    let mut gray = vec![0.0; rows * cols];
    for c in 0..cols {
        for r in 0..rows {
            gray[c * rows + r] = f64::from(src.get(r, c)) / 255.0;
        }
    }
    let scale = match opts.normalization {
        Normalization::L2 => gray.iter().map(|v| v * v).sum::<f64>().sqrt(),
        Normalization::L1 => gray.iter().sum::<f64>(),
        Normalization::Max => gray.iter().cloned().fold(0.0, f64::max),
        Normalization::None => 1.0,
    };
    for v in &mut gray {
        *v /= scale;
    }
    Ok(gray)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sample {
    pub gray: Vec<f64>,
    pub label: usize,
}

/// Preprocessed samples sharing one image geometry.
#[derive(Debug, Clone)]
pub struct Dataset {
    rows: usize,
    cols: usize,
    n_classes: usize,
    samples: Vec<Sample>,
    class_counts: Vec<usize>,
}

impl Dataset {
    pub fn new(rows: usize, cols: usize, n_classes: usize, samples: Vec<Sample>) -> Result<Self> {
        let mut class_counts = vec![0; n_classes];
        for s in &samples {
            if s.gray.len() != rows * cols {
                return Err(Error::DimensionMismatch(format!(
                    "sample has {} values, expected {}",
                    s.gray.len(),
                    rows * cols
                )));
            }
            if s.label >= n_classes {
                return Err(Error::LabelOutOfRange {
                    label: s.label,
                    classes: n_classes,
                });
            }
            class_counts[s.label] += 1;
        }
        Ok(Dataset {
            rows,
            cols,
            n_classes,
            samples,
            class_counts,
        })
    }

    /// Pairs images with labels positionally and preprocesses every image.
    pub fn from_raw(
        images: &[RawImage],
        labels: &[usize],
        n_classes: usize,
        opts: Preprocess,
    ) -> Result<Self> {
        if images.len() != labels.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} images but {} labels",
                images.len(),
                labels.len()
            )));
        }
        let (rows, cols) = match images.first() {
            Some(img) => (img.rows(), img.cols()),
            None => (0, 0),
        };
        let samples = images
            .iter()
            .zip(labels)
            .map(|(img, &label)| {
                Ok(Sample {
                    gray: preprocess_with(img, opts)?,
                    label,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Dataset::new(rows, cols, n_classes, samples)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn sample(&self, i: usize) -> &Sample {
        &self.samples[i]
    }

    pub fn class_counts(&self) -> &[usize] {
        &self.class_counts
    }

    /// Keeps samples whose label is in `classes`, relabeled to their position
    /// in that list. At most `limit` samples are kept, in file order.
    pub fn select_classes(&self, classes: &[usize], limit: Option<usize>) -> Result<Dataset> {
        let mut samples = Vec::new();
        for s in &self.samples {
            if limit.is_some_and(|l| samples.len() >= l) {
                break;
            }
            if let Some(pos) = classes.iter().position(|&c| c == s.label) {
                samples.push(Sample {
                    gray: s.gray.clone(),
                    label: pos,
                });
            }
        }
        Dataset::new(self.rows, self.cols, classes.len(), samples)
    }

    /// Element-wise mean of the grayscale vectors at `indices`.
    pub fn mean_gray(&self, indices: &[usize]) -> Option<Vec<f64>> {
        if indices.is_empty() {
            return None;
        }
        let mut mean = vec![0.0; self.rows * self.cols];
        for &i in indices {
            for (m, g) in mean.iter_mut().zip(&self.samples[i].gray) {
                *m += g;
            }
        }
        let n = indices.len() as f64;
        mean.iter_mut().for_each(|m| *m /= n);
        Some(mean)
    }
}

fn read_u32(bytes: &[u8], at: usize) -> u32 {
    u32::from_be_bytes([bytes[at], bytes[at + 1], bytes[at + 2], bytes[at + 3]])
}

fn check_header(bytes: &[u8], kind: IdxKind, magic: u32, header_len: usize) -> Result<()> {
    if bytes.len() < 4 {
        return Err(Error::Truncated {
            kind,
            expected: header_len,
            actual: bytes.len(),
        });
    }
    let found = read_u32(bytes, 0);
    if found != magic {
        return Err(Error::WrongMagic {
            kind,
            expected: magic,
            found,
        });
    }
    if bytes.len() < header_len {
        return Err(Error::Truncated {
            kind,
            expected: header_len,
            actual: bytes.len(),
        });
    }
    Ok(())
}

/// Parses an IDX image container (magic 2051).
pub fn parse_idx_images(bytes: &[u8]) -> Result<Vec<RawImage>> {
    check_header(bytes, IdxKind::Images, IMAGE_MAGIC, 16)?;
    let count = read_u32(bytes, 4) as usize;
    let rows = read_u32(bytes, 8) as usize;
    let cols = read_u32(bytes, 12) as usize;
    if count > 0 && (rows == 0 || cols == 0) {
        return Err(Error::DimensionMismatch(format!(
            "image dimensions {rows}x{cols} are empty"
        )));
    }
    let stride = rows * cols;
    let expected = 16 + count * stride;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            kind: IdxKind::Images,
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "image file has {} trailing bytes beyond {count} images of {rows}x{cols}",
            bytes.len() - expected
        )));
    }
    Ok(bytes[16..]
        .chunks_exact(stride.max(1))
        .take(count)
        .map(|px| RawImage {
            rows,
            cols,
            pixels: px.to_vec(),
        })
        .collect())
}

/// Parses an IDX label container (magic 2049).
pub fn parse_idx_labels(bytes: &[u8]) -> Result<Vec<usize>> {
    check_header(bytes, IdxKind::Labels, LABEL_MAGIC, 8)?;
    let count = read_u32(bytes, 4) as usize;
    let expected = 8 + count;
    if bytes.len() < expected {
        return Err(Error::Truncated {
            kind: IdxKind::Labels,
            expected,
            actual: bytes.len(),
        });
    }
    if bytes.len() > expected {
        return Err(Error::DimensionMismatch(format!(
            "label file has {} trailing bytes beyond {count} labels",
            bytes.len() - expected
        )));
    }
    Ok(bytes[8..].iter().map(|&b| usize::from(b)).collect())
}

pub fn load_idx_images(path: impl AsRef<Path>) -> Result<Vec<RawImage>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_images(&bytes)
}

pub fn load_idx_labels(path: impl AsRef<Path>) -> Result<Vec<usize>> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_idx_labels(&bytes)
}

/// Serializes images into an IDX container. All images must share one shape.
pub fn encode_idx_images(images: &[RawImage]) -> Result<Vec<u8>> {
    let (rows, cols) = images.first().map_or((0, 0), |i| (i.rows, i.cols));
    let mut out = Vec::with_capacity(16 + images.len() * rows * cols);
    out.extend_from_slice(&IMAGE_MAGIC.to_be_bytes());
    out.extend_from_slice(&(images.len() as u32).to_be_bytes());
    out.extend_from_slice(&(rows as u32).to_be_bytes());
    out.extend_from_slice(&(cols as u32).to_be_bytes());
    for img in images {
        if (img.rows, img.cols) != (rows, cols) {
            return Err(Error::DimensionMismatch(format!(
                "mixed image shapes {rows}x{cols} and {}x{}",
                img.rows, img.cols
            )));
        }
        out.extend_from_slice(&img.pixels);
    }
    Ok(out)
}

pub fn encode_idx_labels(labels: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(8 + labels.len());
    out.extend_from_slice(&LABEL_MAGIC.to_be_bytes());
    out.extend_from_slice(&(labels.len() as u32).to_be_bytes());
    out.extend_from_slice(labels);
    out
}

pub fn write_idx_images(path: impl AsRef<Path>, images: &[RawImage]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_idx_images(images)?).map_err(|e| Error::io(path, e))
}

pub fn write_idx_labels(path: impl AsRef<Path>, labels: &[u8]) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_idx_labels(labels)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Byte-level writer kept independent of `encode_idx_*`.
    fn fixture_images(count: u32, rows: u32, cols: u32, fill: impl Fn(usize) -> u8) -> Vec<u8> {
        let mut b = vec![0, 0, 8, 3];
        for d in [count, rows, cols] {
            b.extend_from_slice(&d.to_be_bytes());
        }
        let n = (count * rows * cols) as usize;
        b.extend((0..n).map(fill));
        b
    }

    #[test]
    fn parses_two_mnist_sized_images() {
        let bytes = fixture_images(2, 28, 28, |i| (i % 251) as u8);
        assert_eq!(bytes.len(), 16 + 2 * 784);
        let imgs = parse_idx_images(&bytes).unwrap();
        assert_eq!(imgs.len(), 2);
        assert_eq!((imgs[1].rows(), imgs[1].cols()), (28, 28));
        assert_eq!(imgs[1].get(0, 0), (784 % 251) as u8);
        assert_eq!(imgs[0].get(1, 2), 30);
    }

    #[test]
    fn label_magic_on_image_parser_is_rejected() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 0];
        let err = parse_idx_images(&bytes).unwrap_err();
        assert!(err.to_string().starts_with("wrong magic for images"), "{err}");
        let err = parse_idx_labels(&fixture_images(1, 1, 1, |_| 0)).unwrap_err();
        assert!(err.to_string().starts_with("wrong magic for labels"), "{err}");
    }

    #[test]
    fn truncated_payload_is_an_error() {
        let mut bytes = fixture_images(3, 4, 4, |_| 7);
        bytes.truncate(bytes.len() - 5);
        assert!(matches!(
            parse_idx_images(&bytes),
            Err(Error::Truncated { kind: IdxKind::Images, .. })
        ));
        assert!(matches!(
            parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 4, 1, 2]),
            Err(Error::Truncated { kind: IdxKind::Labels, .. })
        ));
    }

    #[test]
    fn labels_fixture() {
        let bytes = [0, 0, 8, 1, 0, 0, 0, 3, 0, 1, 4];
        assert_eq!(parse_idx_labels(&bytes).unwrap(), vec![0, 1, 4]);
        assert!(parse_idx_labels(&[0, 0, 8, 1, 0, 0, 0, 0]).unwrap().is_empty());
    }

    #[test]
    fn count_mismatch_is_hard_error() {
        let imgs = vec![RawImage::new(1, 1, vec![3]).unwrap()];
        assert!(matches!(
            Dataset::from_raw(&imgs, &[0, 1], 2, Preprocess::default()),
            Err(Error::DimensionMismatch(_))
        ));
    }

    #[test]
    fn symmetric_image_is_not_moved() {
        let mut img = RawImage::zeros(28, 28);
        for (r, c) in [(10, 10), (10, 17), (17, 10), (17, 17)] {
            img.set(r, c, 200);
        }
        assert_eq!(img.centroid_shift().unwrap(), (0, 0));
        let gray = preprocess(&img).unwrap();
        // 4 equal pixels, unit norm => each 0.5
        assert!((gray[10 * 28 + 10] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn single_pixel_moves_to_center_cell() {
        let mut img = RawImage::zeros(28, 28);
        img.set(5, 5, 255);
        // brute-force oracle: the target is the cell nearest (13.5, 13.5) on the
        // side of the original pixel, i.e. distance 8.5 rounds toward zero to 8
        let mut best = None;
        for r in 0..28usize {
            for c in 0..28usize {
                let (dr, dc) = (13.5 - r as f64, 13.5 - c as f64);
                if dr.abs() <= 0.5 && dc.abs() <= 0.5 && r >= 5 && c >= 5 && r <= 13 && c <= 13 {
                    best = Some((r, c));
                }
            }
        }
        assert_eq!(best, Some((13, 13)));
        let gray = preprocess(&img).unwrap();
        assert_eq!(gray[13 * 28 + 13], 1.0);
        assert_eq!(gray.iter().filter(|&&v| v != 0.0).count(), 1);
    }

    #[test]
    fn blank_image_rejected() {
        assert!(matches!(preprocess(&RawImage::zeros(4, 4)), Err(Error::BlankImage)));
    }

    #[test]
    fn gray_is_column_major() {
        let mut img = RawImage::zeros(2, 3);
        img.set(0, 2, 255);
        img.set(1, 0, 255);
        let gray = preprocess_with(
            &img,
            Preprocess {
                align_centroid: false,
                normalization: Normalization::None,
            },
        )
        .unwrap();
        assert_eq!(gray, vec![0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn class_selection_relabels() {
        let samples = (0..6)
            .map(|i| Sample {
                gray: vec![1.0],
                label: i % 3,
            })
            .collect();
        let d = Dataset::new(1, 1, 3, samples).unwrap();
        let s = d.select_classes(&[2, 0], None).unwrap();
        assert_eq!(s.len(), 4);
        assert_eq!(s.class_counts(), &[2, 2]);
        assert_eq!(s.sample(0).label, 1);
        let s = d.select_classes(&[2, 0], Some(3)).unwrap();
        assert_eq!(s.len(), 3);
    }
}
