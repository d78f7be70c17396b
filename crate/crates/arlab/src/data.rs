//! Dataset ingestion (IDX image files, labeled CSV), synthetic blob
//! generation, and train/validation/test split management.

use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::{Path, PathBuf};

use crate::linalg::{Matrix, Rng};
use crate::{Error, Result};

const IDX_IMAGES_MAGIC: u32 = 0x0000_0803; // 2051
const IDX_LABELS_MAGIC: u32 = 0x0000_0801; // 2049

/// Disjoint index lists whose union covers `[0, N)`.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SplitIndices {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
    pub test: Vec<usize>,
}

impl SplitIndices {
    pub fn all_in_train(n: usize) -> Self {
        SplitIndices {
            train: (0..n).collect(),
            validation: Vec::new(),
            test: Vec::new(),
        }
    }
}

/// Input matrix, integer labels, class count, and split membership.
///
/// Immutable after construction; every constructor runs [`Dataset::validate`].
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<usize>,
    pub k: usize,
    pub split: SplitIndices,
}

impl Dataset {
    pub fn new(x: Matrix, y: Vec<usize>, k: usize, split: SplitIndices) -> Result<Self> {
        let ds = Dataset { x, y, k, split };
        ds.validate()?;
        Ok(ds)
    }

    pub fn len(&self) -> usize {
        self.x.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Checks the structural invariants: labels in `[0, K)`, finite features,
    /// and splits that partition `[0, N)`.
    pub fn validate(&self) -> Result<()> {
        let n = self.x.rows();
        if self.y.len() != n {
            return Err(Error::Split(format!(
                "{} labels for {} rows",
                self.y.len(),
                n
            )));
        }
        if let Some(&bad) = self.y.iter().find(|&&l| l >= self.k) {
            return Err(Error::Split(format!(
                "label {bad} out of range for K={}",
                self.k
            )));
        }
        if !self.x.all_finite() {
            return Err(Error::Split("non-finite feature value".into()));
        }
        let mut seen = vec![false; n];
        let parts = [
            &self.split.train,
            &self.split.validation,
            &self.split.test,
        ];
        let mut total = 0;
        for part in parts {
            for &i in part.iter() {
                if i >= n {
                    return Err(Error::Split(format!("split index {i} out of range")));
                }
                if seen[i] {
                    return Err(Error::Split(format!("split index {i} appears twice")));
                }
                seen[i] = true;
                total += 1;
            }
        }
        if total != n {
            return Err(Error::Split(format!(
                "splits cover {total} of {n} indices"
            )));
        }
        Ok(())
    }

    /// Gathers the rows and labels of one split, in split order.
    pub fn gather(&self, indices: &[usize]) -> (Matrix, Vec<usize>) {
        let x = self.x.gather_rows(indices);
        let y = indices.iter().map(|&i| self.y[i]).collect();
        (x, y)
    }
}

fn read_u32_be(reader: &mut impl Read, path: &Path, offset: &mut u64) -> Result<u32> {
    let mut buf = [0u8; 4];
    reader.read_exact(&mut buf).map_err(|e| Error::IdxFormat {
        path: path.to_path_buf(),
        offset: *offset,
        message: format!("truncated while reading u32: {e}"),
    })?;
    *offset += 4;
    Ok(u32::from_be_bytes(buf))
}

/// A matrix of flattened images plus their labels, as read from one
/// IDX image/label file pair.
#[derive(Debug, Clone)]
pub struct IdxFragment {
    pub x: Matrix,
    pub y: Vec<usize>,
}

/// Loads an IDX image file (magic 2051) and its label file (magic 2049).
///
/// Pixels are flattened row-major to `rows*cols` features and scaled into
/// `[0, 1]` by dividing by 255. Malformed files produce an error carrying the
/// byte offset of the problem.
pub fn load_idx(images_path: &Path, labels_path: &Path) -> Result<IdxFragment> {
    // Images.
    let file = File::open(images_path).map_err(|e| Error::io(images_path, e))?;
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;
    let magic = read_u32_be(&mut reader, images_path, &mut offset)?;
    if magic != IDX_IMAGES_MAGIC {
        return Err(Error::IdxFormat {
            path: images_path.into(),
            offset: 0,
            message: format!("bad image magic {magic:#010x}, want 0x00000803"),
        });
    }
    let n = read_u32_be(&mut reader, images_path, &mut offset)? as usize;
    let h = read_u32_be(&mut reader, images_path, &mut offset)? as usize;
    let w = read_u32_be(&mut reader, images_path, &mut offset)? as usize;
    let dim = h * w;
    let mut pixels = vec![0u8; n * dim];
    reader
        .read_exact(&mut pixels)
        .map_err(|e| Error::IdxFormat {
            path: images_path.into(),
            offset,
            message: format!("truncated pixel data ({n} images of {h}x{w}): {e}"),
        })?;

    // Labels.
    let file = File::open(labels_path).map_err(|e| Error::io(labels_path, e))?;
    let mut reader = BufReader::new(file);
    let mut offset = 0u64;
    let magic = read_u32_be(&mut reader, labels_path, &mut offset)?;
    if magic != IDX_LABELS_MAGIC {
        return Err(Error::IdxFormat {
            path: labels_path.into(),
            offset: 0,
            message: format!("bad label magic {magic:#010x}, want 0x00000801"),
        });
    }
    let n_labels = read_u32_be(&mut reader, labels_path, &mut offset)? as usize;
    if n_labels != n {
        return Err(Error::IdxFormat {
            path: labels_path.into(),
            offset: 4,
            message: format!("{n_labels} labels for {n} images"),
        });
    }
    let mut labels = vec![0u8; n_labels];
    reader
        .read_exact(&mut labels)
        .map_err(|e| Error::IdxFormat {
            path: labels_path.into(),
            offset,
            message: format!("truncated label data: {e}"),
        })?;

    let data: Vec<f64> = pixels.into_iter().map(|p| f64::from(p) / 255.0).collect();
    Ok(IdxFragment {
        x: Matrix::from_vec(n, dim, data),
        y: labels.into_iter().map(usize::from).collect(),
    })
}

/// File names of the canonical MNIST-layout distribution inside a directory.
#[derive(Debug, Clone)]
pub struct IdxPaths {
    pub train_images: PathBuf,
    pub train_labels: PathBuf,
    pub test_images: PathBuf,
    pub test_labels: PathBuf,
}

impl IdxPaths {
    pub fn mnist_dir(dir: &Path) -> Self {
        IdxPaths {
            train_images: dir.join("train-images-idx3-ubyte"),
            train_labels: dir.join("train-labels-idx1-ubyte"),
            test_images: dir.join("t10k-images-idx3-ubyte"),
            test_labels: dir.join("t10k-labels-idx1-ubyte"),
        }
    }
}

/// Number of training samples carved off as the validation set on the IDX
/// path, taken as the tail of a seeded shuffle of the training indices.
pub const IDX_VALIDATION_SIZE: usize = 5000;

/// Loads the canonical two-file-pair layout: training pair plus test pair.
///
/// The validation set is the last [`IDX_VALIDATION_SIZE`] training samples
/// after a seeded shuffle; the test split is exactly the test file. Class
/// count is inferred as `max(label) + 1`.
pub fn load_idx_dataset(paths: &IdxPaths, rng: &mut Rng) -> Result<Dataset> {
    let train = load_idx(&paths.train_images, &paths.train_labels)?;
    let test = load_idx(&paths.test_images, &paths.test_labels)?;
    if train.x.cols() != test.x.cols() {
        return Err(Error::Config(format!(
            "train images are {}-dimensional but test images are {}-dimensional",
            train.x.cols(),
            test.x.cols()
        )));
    }
    let n_train_file = train.x.rows();
    if n_train_file <= IDX_VALIDATION_SIZE {
        return Err(Error::Split(format!(
            "training file has {n_train_file} samples, need more than {IDX_VALIDATION_SIZE}"
        )));
    }

    let mut data = train.x.data().to_vec();
    data.extend_from_slice(test.x.data());
    let x = Matrix::from_vec(n_train_file + test.x.rows(), train.x.cols(), data);
    let mut y = train.y.clone();
    y.extend_from_slice(&test.y);
    let k = y.iter().copied().max().unwrap_or(0) + 1;

    let mut order: Vec<usize> = (0..n_train_file).collect();
    rng.shuffle(&mut order);
    let validation = order.split_off(n_train_file - IDX_VALIDATION_SIZE);
    let test_idx: Vec<usize> = (n_train_file..n_train_file + test.x.rows()).collect();

    Dataset::new(
        x,
        y,
        k,
        SplitIndices {
            train: order,
            validation,
            test: test_idx,
        },
    )
}

/// Synthetic isotropic Gaussian blobs: `k` class centers drawn uniformly in
/// `[-center_spread, center_spread]^dim`, `n_per_class` samples per center.
/// Everything lands in the train split; apply [`split`] afterwards.
pub fn make_blobs(
    k: usize,
    n_per_class: usize,
    dim: usize,
    center_spread: f64,
    noise_sigma: f64,
    rng: &mut Rng,
) -> Result<Dataset> {
    if k < 2 {
        return Err(Error::Config(format!("make_blobs needs k >= 2, got {k}")));
    }
    if dim < 2 {
        return Err(Error::Config(format!("make_blobs needs dim >= 2, got {dim}")));
    }
    if !(noise_sigma > 0.0) {
        return Err(Error::Config(format!(
            "make_blobs needs noise_sigma > 0, got {noise_sigma}"
        )));
    }
    if n_per_class == 0 {
        return Err(Error::Config("make_blobs needs n_per_class >= 1".into()));
    }

    let centers: Vec<Vec<f64>> = (0..k)
        .map(|_| {
            (0..dim)
                .map(|_| rng.uniform(-center_spread, center_spread))
                .collect()
        })
        .collect();

    let n = k * n_per_class;
    let mut data = Vec::with_capacity(n * dim);
    let mut y = Vec::with_capacity(n);
    for (class, center) in centers.iter().enumerate() {
        for _ in 0..n_per_class {
            for &c in center {
                data.push(c + rng.normal(0.0, noise_sigma));
            }
            y.push(class);
        }
    }

    Dataset::new(
        Matrix::from_vec(n, dim, data),
        y,
        k,
        SplitIndices::all_in_train(n),
    )
}

/// Re-partitions a dataset into shuffled train/validation/test splits of the
/// requested fractions (sizes rounded to nearest).
pub fn split(ds: &Dataset, val_fraction: f64, test_fraction: f64, rng: &mut Rng) -> Result<Dataset> {
    if val_fraction < 0.0 || test_fraction < 0.0 || val_fraction + test_fraction >= 1.0 {
        return Err(Error::Split(format!(
            "bad fractions val={val_fraction} test={test_fraction}"
        )));
    }
    let n = ds.len();
    let n_val = (n as f64 * val_fraction).round() as usize;
    let n_test = (n as f64 * test_fraction).round() as usize;
    if val_fraction > 0.0 && n_val == 0 {
        return Err(Error::Split(format!(
            "validation fraction {val_fraction} yields an empty split at N={n}"
        )));
    }
    if test_fraction > 0.0 && n_test == 0 {
        return Err(Error::Split(format!(
            "test fraction {test_fraction} yields an empty split at N={n}"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    rng.shuffle(&mut order);
    let test = order.split_off(n - n_test);
    let validation = order.split_off(n - n_test - n_val);
    debug_assert_eq!(order.len(), n - n_val - n_test);

    Dataset::new(
        ds.x.clone(),
        ds.y.clone(),
        ds.k,
        SplitIndices {
            train: order,
            validation,
            test,
        },
    )
}

/// Shrinks the train split to its first `n_train` indices, physically dropping
/// the unused rows so the split partition invariant keeps holding.
pub fn restrict_train(ds: &Dataset, n_train: usize) -> Result<Dataset> {
    if n_train == 0 || n_train > ds.split.train.len() {
        return Err(Error::Split(format!(
            "train subset {n_train} out of range for {} training samples",
            ds.split.train.len()
        )));
    }
    let keep: Vec<usize> = ds
        .split
        .train
        .iter()
        .take(n_train)
        .chain(ds.split.validation.iter())
        .chain(ds.split.test.iter())
        .copied()
        .collect();
    let (x, y) = ds.gather(&keep);
    let n_val = ds.split.validation.len();
    let n_test = ds.split.test.len();
    Dataset::new(
        x,
        y,
        ds.k,
        SplitIndices {
            train: (0..n_train).collect(),
            validation: (n_train..n_train + n_val).collect(),
            test: (n_train + n_val..n_train + n_val + n_test).collect(),
        },
    )
}

/// Reads a labeled CSV: optional header, features in all but the last column,
/// integer label in the last. Lines starting with `#` are skipped (artifact
/// files carry their config in such a comment).
pub fn read_labeled_csv(path: &Path, has_header: bool) -> Result<(Matrix, Vec<usize>)> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut labels: Vec<usize> = Vec::new();
    let mut width: Option<usize> = None;
    let mut header_pending = has_header;

    for (line_no, line) in reader.lines().enumerate() {
        let line_no = line_no + 1;
        let line = line.map_err(|e| Error::CsvParse {
            path: path.into(),
            line: line_no,
            message: e.to_string(),
        })?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if header_pending {
            header_pending = false;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() < 2 {
            return Err(Error::CsvParse {
                path: path.into(),
                line: line_no,
                message: format!("need at least 2 columns, got {}", fields.len()),
            });
        }
        if let Some(w) = width {
            if fields.len() != w + 1 {
                return Err(Error::CsvParse {
                    path: path.into(),
                    line: line_no,
                    message: format!("expected {} columns, got {}", w + 1, fields.len()),
                });
            }
        } else {
            width = Some(fields.len() - 1);
        }
        let mut row = Vec::with_capacity(fields.len() - 1);
        for f in &fields[..fields.len() - 1] {
            let v: f64 = f.trim().parse().map_err(|e| Error::CsvParse {
                path: path.into(),
                line: line_no,
                message: format!("bad feature value {f:?}: {e}"),
            })?;
            row.push(v);
        }
        let label: usize = fields[fields.len() - 1]
            .trim()
            .parse()
            .map_err(|e| Error::CsvParse {
                path: path.into(),
                line: line_no,
                message: format!("bad label {:?}: {e}", fields[fields.len() - 1]),
            })?;
        rows.push(row);
        labels.push(label);
    }

    if rows.is_empty() {
        return Err(Error::CsvParse {
            path: path.into(),
            line: 0,
            message: "no data rows".into(),
        });
    }
    Ok((Matrix::from_rows(&rows), labels))
}

/// Loads a labeled CSV as a dataset with everything in the train split.
pub fn load_csv(path: &Path, has_header: bool) -> Result<Dataset> {
    let (x, y) = read_labeled_csv(path, has_header)?;
    let k = y.iter().copied().max().unwrap_or(0) + 1;
    let n = x.rows();
    Dataset::new(x, y, k, SplitIndices::all_in_train(n))
}
