//! Labeled datasets and the splits the threat model needs: the fixed set
//! the adversary knows, the shadow pool, and held-out test targets.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::rng::Rng;

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
const IDX_LABELS_MAGIC: u32 = 0x0000_0801;

/// A feature vector with its class label.
#[derive(Debug, Clone, PartialEq)]
pub struct DataPoint {
    pub x: Vec<f64>,
    pub y: usize,
}

impl DataPoint {
    pub fn new(x: Vec<f64>, y: usize) -> Self {
        Self { x, y }
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }
}

/// An ordered, homogeneous collection of [`DataPoint`]s.
///
/// Order is insertion order; every determinism guarantee in the crate is
/// stated relative to it.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    points: Vec<DataPoint>,
    dim: usize,
    classes: usize,
}

impl LabeledDataset {
    pub fn new(dim: usize, classes: usize) -> Self {
        Self {
            points: Vec::new(),
            dim,
            classes,
        }
    }

    pub fn from_points(points: Vec<DataPoint>, dim: usize, classes: usize) -> Result<Self> {
        let mut ds = Self::new(dim, classes);
        for p in points {
            ds.push(p)?;
        }
        Ok(ds)
    }

    pub fn push(&mut self, point: DataPoint) -> Result<()> {
        if point.x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: point.x.len(),
            });
        }
        if point.y >= self.classes {
            return Err(Error::invalid(format!(
                "label {} out of range for {} classes",
                point.y, self.classes
            )));
        }
        if point.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite feature"));
        }
        self.points.push(point);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn points(&self) -> &[DataPoint] {
        &self.points
    }

    pub fn get(&self, i: usize) -> &DataPoint {
        &self.points[i]
    }

    pub fn iter(&self) -> std::slice::Iter<'_, DataPoint> {
        self.points.iter()
    }

    /// `self ∪ {z}`, with `z` appended last.
    pub fn with_point(&self, z: &DataPoint) -> Result<Self> {
        let mut out = self.clone();
        out.push(z.clone())?;
        Ok(out)
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            points: indices.iter().map(|&i| self.points[i].clone()).collect(),
            dim: self.dim,
            classes: self.classes,
        }
    }

    /// Splits off the first `n` points.
    pub fn split_at(&self, n: usize) -> (Self, Self) {
        let n = n.min(self.len());
        (
            self.subset(&(0..n).collect::<Vec<_>>()),
            self.subset(&(n..self.len()).collect::<Vec<_>>()),
        )
    }

    pub fn features(&self) -> Vec<&[f64]> {
        self.points.iter().map(|p| p.x.as_slice()).collect()
    }
}

/// Sizes of the three disjoint parts and the permutation seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SplitSpec {
    pub fixed_size: usize,
    pub shadow_size: usize,
    pub test_target_size: usize,
    pub split_seed: u64,
}

/// The three disjoint parts produced by [`split`].
#[derive(Debug, Clone)]
pub struct Splits {
    pub fixed: LabeledDataset,
    pub shadow: LabeledDataset,
    pub targets: LabeledDataset,
}

/// Seeded disjoint split into fixed set, shadow pool and test targets.
pub fn split(dataset: &LabeledDataset, spec: &SplitSpec) -> Result<Splits> {
    let total = spec.fixed_size + spec.shadow_size + spec.test_target_size;
    if total > dataset.len() {
        return Err(Error::invalid(format!(
            "split sizes sum to {total} but the dataset has {} points",
            dataset.len()
        )));
    }
    let mut order: Vec<usize> = (0..dataset.len()).collect();
    order.shuffle(&mut Rng::new(spec.split_seed).named("split").stream());
    let (fixed_idx, rest) = order.split_at(spec.fixed_size);
    let (shadow_idx, rest) = rest.split_at(spec.shadow_size);
    let target_idx = &rest[..spec.test_target_size];
    Ok(Splits {
        fixed: dataset.subset(fixed_idx),
        shadow: dataset.subset(shadow_idx),
        targets: dataset.subset(target_idx),
    })
}

/// Parameters of the Gaussian-blob generator.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub dim: usize,
    pub classes: usize,
    pub n: usize,
    pub cluster_std: f64,
    pub seed: u64,
}

/// `classes` isotropic Gaussian blobs, features clipped to `[0, 1]`.
///
/// Labels cycle through the classes so every class is (near-)balanced;
/// centers are uniform in `[0.1, 0.9]^dim`.
pub fn synth_classification(spec: &SynthSpec) -> Result<LabeledDataset> {
    if spec.dim == 0 || spec.classes == 0 {
        return Err(Error::invalid("dim and classes must be positive"));
    }
    if !(spec.cluster_std >= 0.0 && spec.cluster_std.is_finite()) {
        return Err(Error::invalid("cluster_std must be finite and nonnegative"));
    }
    let root = Rng::new(spec.seed);
    let mut center_rng = root.named("centers").stream();
    let centers: Vec<Vec<f64>> = (0..spec.classes)
        .map(|_| (0..spec.dim).map(|_| center_rng.random_range(0.1..0.9)).collect())
        .collect();
    let noise = Normal::new(0.0, spec.cluster_std).map_err(|e| Error::invalid(e.to_string()))?;
    let mut point_rng = root.named("points").stream();
    let mut ds = LabeledDataset::new(spec.dim, spec.classes);
    for i in 0..spec.n {
        let y = i % spec.classes;
        let x = centers[y]
            .iter()
            .map(|c| (c + noise.sample(&mut point_rng)).clamp(0.0, 1.0))
            .collect();
        ds.push(DataPoint::new(x, y))?;
    }
    Ok(ds)
}

/// Block-mean pooling of `height × width` row-major images.
pub fn downsample_images(
    dataset: &LabeledDataset,
    height: usize,
    width: usize,
    factor: usize,
) -> Result<LabeledDataset> {
    if height * width != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: height * width,
            actual: dataset.dim(),
        });
    }
    if factor == 0 || !height.is_multiple_of(factor) || !width.is_multiple_of(factor) {
        return Err(Error::invalid(format!(
            "factor {factor} must divide both {height} and {width}"
        )));
    }
    let (oh, ow) = (height / factor, width / factor);
    let area = (factor * factor) as f64;
    let mut out = LabeledDataset::new(oh * ow, dataset.classes());
    for p in dataset.iter() {
        let mut x = vec![0.0; oh * ow];
        for (r, row) in p.x.chunks(width).enumerate() {
            for (c, v) in row.iter().enumerate() {
                x[(r / factor) * ow + c / factor] += v;
            }
        }
        x.iter_mut().for_each(|v| *v /= area);
        out.push(DataPoint::new(x, p.y))?;
    }
    Ok(out)
}

/// Replaces every label with a seeded uniform draw over `0..classes`.
///
/// Used to turn an out-of-distribution pool into shadow targets for a
/// `classes`-way task.
pub fn relabel_random(dataset: &LabeledDataset, classes: usize, seed: u64) -> Result<LabeledDataset> {
    if classes == 0 {
        return Err(Error::invalid("classes must be positive"));
    }
    let mut rng = Rng::new(seed).named("relabel").stream();
    let mut out = LabeledDataset::new(dataset.dim(), classes);
    for p in dataset.iter() {
        out.push(DataPoint::new(p.x.clone(), rng.random_range(0..classes)))?;
    }
    Ok(out)
}

fn read_u32_be(bytes: &[u8], offset: usize, path: &Path) -> Result<u32> {
    bytes
        .get(offset..offset + 4)
        .map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]]))
        .ok_or_else(|| Error::format(path, "truncated header"))
}

/// Loads an IDX image file (`0x00000803`) and its label file
/// (`0x00000801`). Pixels are scaled by `1/255`.
pub fn load_idx(images: impl AsRef<Path>, labels: impl AsRef<Path>) -> Result<LabeledDataset> {
    let (images, labels) = (images.as_ref(), labels.as_ref());
    let img = fs::read(images)?;
    let lab = fs::read(labels)?;

    if read_u32_be(&img, 0, images)? != IDX_IMAGES_MAGIC {
        return Err(Error::format(images, "bad magic for IDX images"));
    }
    if read_u32_be(&lab, 0, labels)? != IDX_LABELS_MAGIC {
        return Err(Error::format(labels, "bad magic for IDX labels"));
    }
    let n = read_u32_be(&img, 4, images)? as usize;
    let rows = read_u32_be(&img, 8, images)? as usize;
    let cols = read_u32_be(&img, 12, images)? as usize;
    let n_labels = read_u32_be(&lab, 4, labels)? as usize;
    if n != n_labels {
        return Err(Error::format(
            labels,
            format!("{n_labels} labels for {n} images"),
        ));
    }
    let d = rows * cols;
    let pixels = img
        .get(16..16 + n * d)
        .ok_or_else(|| Error::format(images, "truncated pixel data"))?;
    let ys = lab
        .get(8..8 + n)
        .ok_or_else(|| Error::format(labels, "truncated label data"))?;
    let classes = ys.iter().copied().max().map_or(0, |m| m as usize + 1);

    let mut ds = LabeledDataset::new(d, classes);
    for (row, &y) in pixels.chunks(d.max(1)).zip(ys) {
        let x = row.iter().map(|&p| f64::from(p) / 255.0).collect();
        ds.push(DataPoint::new(x, y as usize))?;
    }
    Ok(ds)
}

/// Writes an IDX image/label pair; features are rounded to bytes.
pub fn write_idx(
    dataset: &LabeledDataset,
    rows: usize,
    cols: usize,
    images: impl AsRef<Path>,
    labels: impl AsRef<Path>,
) -> Result<()> {
    if rows * cols != dataset.dim() {
        return Err(Error::DimensionMismatch {
            expected: rows * cols,
            actual: dataset.dim(),
        });
    }
    let n = dataset.len() as u32;
    let mut img = Vec::with_capacity(16 + dataset.len() * dataset.dim());
    img.extend_from_slice(&IDX_IMAGES_MAGIC.to_be_bytes());
    img.extend_from_slice(&n.to_be_bytes());
    img.extend_from_slice(&(rows as u32).to_be_bytes());
    img.extend_from_slice(&(cols as u32).to_be_bytes());
    let mut lab = Vec::with_capacity(8 + dataset.len());
    lab.extend_from_slice(&IDX_LABELS_MAGIC.to_be_bytes());
    lab.extend_from_slice(&n.to_be_bytes());
    for p in dataset.iter() {
        img.extend(p.x.iter().map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8));
        lab.push(p.y as u8);
    }
    fs::write(images, img)?;
    fs::write(labels, lab)?;
    Ok(())
}

/// Loads a numeric CSV with one header row. `label_column` names the
/// label column; every other column is a feature.
pub fn load_csv(path: impl AsRef<Path>, label_column: &str) -> Result<LabeledDataset> {
    let path = path.as_ref();
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
    let headers = reader.headers()?.clone();
    let label_idx = headers
        .iter()
        .position(|h| h.trim() == label_column)
        .ok_or_else(|| Error::format(path, format!("no column named {label_column:?}")))?;

    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(path, e.to_string()))?;
        if record.len() != headers.len() {
            return Err(Error::format(path, format!("ragged row {}", line + 2)));
        }
        let mut x = Vec::with_capacity(headers.len() - 1);
        let mut y = 0usize;
        for (j, cell) in record.iter().enumerate() {
            let v: f64 = cell.trim().parse().map_err(|_| {
                Error::format(path, format!("non-numeric cell {cell:?} on row {}", line + 2))
            })?;
            if j == label_idx {
                if v < 0.0 || v.fract() != 0.0 {
                    return Err(Error::format(path, format!("label {v} is not a class index")));
                }
                y = v as usize;
            } else {
                x.push(v);
            }
        }
        rows.push(DataPoint::new(x, y));
    }
    if rows.is_empty() {
        return Err(Error::Empty(format!("{} has no data rows", path.display())));
    }
    let classes = rows.iter().map(|p| p.y).max().unwrap_or(0) + 1;
    LabeledDataset::from_points(rows, headers.len() - 1, classes)
}

/// Writes `f0,...,f{d-1},label` with a header row. Values use the
/// shortest round-trip representation.
pub fn write_csv(dataset: &LabeledDataset, path: impl AsRef<Path>) -> Result<()> {
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    let header: Vec<String> = (0..dataset.dim())
        .map(|j| format!("f{j}"))
        .chain(std::iter::once("label".to_string()))
        .collect();
    writeln!(out, "{}", header.join(","))?;
    for p in dataset.iter() {
        let row: Vec<String> = p.x.iter().map(|v| v.to_string()).collect();
        writeln!(out, "{},{}", row.join(","), p.y)?;
    }
    out.flush()?;
    Ok(())
}
