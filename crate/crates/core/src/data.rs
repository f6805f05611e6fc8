//! Feature matrices and dataset views.
//!
//! A [`FeatureMatrix`] stores either dense row-major values or sparse rows of
//! `(column, value)` pairs. Both layouts expose the same row view, so solvers
//! and scalers never branch on the storage kind beyond [`Row`].

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse {
        offsets: Vec<usize>,
        indices: Vec<usize>,
        values: Vec<f64>,
    },
}

/// Row-major feature matrix with a fixed column count.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    storage: Storage,
}

/// Borrowed view of a single row.
#[derive(Debug, Clone, Copy)]
pub enum Row<'a> {
    Dense(&'a [f64]),
    Sparse {
        indices: &'a [usize],
        values: &'a [f64],
    },
}

impl<'a> Row<'a> {
    /// Dot product with a dense weight vector of at least `n_cols` entries.
    #[inline]
    pub fn dot(&self, w: &[f64]) -> f64 {
        match *self {
            Row::Dense(xs) => xs.iter().zip(w).map(|(x, w)| x * w).sum(),
            Row::Sparse { indices, values } => {
                indices.iter().zip(values).map(|(&j, &v)| v * w[j]).sum()
            }
        }
    }

    /// `w += alpha * x`
    #[inline]
    pub fn axpy(&self, alpha: f64, w: &mut [f64]) {
        match *self {
            Row::Dense(xs) => {
                for (wj, x) in w.iter_mut().zip(xs) {
                    *wj += alpha * x;
                }
            }
            Row::Sparse { indices, values } => {
                for (&j, &v) in indices.iter().zip(values) {
                    w[j] += alpha * v;
                }
            }
        }
    }

    pub fn squared_norm(&self) -> f64 {
        match *self {
            Row::Dense(xs) => xs.iter().map(|x| x * x).sum(),
            Row::Sparse { values, .. } => values.iter().map(|x| x * x).sum(),
        }
    }

    /// Dot product of two rows of the same matrix layout (or mixed layouts).
    pub fn dot_row(&self, other: &Row<'_>) -> f64 {
        match (*self, *other) {
            (Row::Dense(a), Row::Dense(b)) => a.iter().zip(b).map(|(x, y)| x * y).sum(),
            (Row::Dense(a), sparse @ Row::Sparse { .. })
            | (sparse @ Row::Sparse { .. }, Row::Dense(a)) => sparse.dot(a),
            (
                Row::Sparse {
                    indices: ia,
                    values: va,
                },
                Row::Sparse {
                    indices: ib,
                    values: vb,
                },
            ) => {
                let (mut p, mut q, mut acc) = (0, 0, 0.0);
                while p < ia.len() && q < ib.len() {
                    match ia[p].cmp(&ib[q]) {
                        std::cmp::Ordering::Less => p += 1,
                        std::cmp::Ordering::Greater => q += 1,
                        std::cmp::Ordering::Equal => {
                            acc += va[p] * vb[q];
                            p += 1;
                            q += 1;
                        }
                    }
                }
                acc
            }
        }
    }

    /// Visit every stored entry. Dense rows visit every column, zeros included.
    pub fn for_each(&self, mut f: impl FnMut(usize, f64)) {
        match *self {
            Row::Dense(xs) => xs.iter().enumerate().for_each(|(j, &v)| f(j, v)),
            Row::Sparse { indices, values } => {
                indices.iter().zip(values).for_each(|(&j, &v)| f(j, v))
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Row::Dense(xs) => xs.iter().all(|v| v.is_finite()),
            Row::Sparse { values, .. } => values.iter().all(|v| v.is_finite()),
        }
    }

    /// Materialize the row as `n_cols` dense values.
    pub fn to_dense(&self, n_cols: usize) -> Vec<f64> {
        let mut out = vec![0.0; n_cols];
        self.for_each(|j, v| out[j] = v);
        out
    }
}

impl FeatureMatrix {
    /// Dense matrix from row-major values.
    pub fn dense(n_rows: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n_rows * n_cols {
            return Err(Error::LengthMismatch {
                expected: n_rows * n_cols,
                actual: values.len(),
            });
        }
        Ok(Self {
            n_rows,
            n_cols,
            storage: Storage::Dense(values),
        })
    }

    pub fn from_dense_rows(n_cols: usize, rows: &[Vec<f64>]) -> Result<Self> {
        let mut values = Vec::with_capacity(rows.len() * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::LengthMismatch {
                    expected: n_cols,
                    actual: row.len(),
                });
            }
            values.extend_from_slice(row);
        }
        Self::dense(rows.len(), n_cols, values)
    }

    /// Sparse matrix from unordered `(column, value)` rows.
    ///
    /// Entries are sorted by column, duplicate columns are summed and exact
    /// zeros are dropped.
    pub fn sparse<R>(n_cols: usize, rows: R) -> Result<Self>
    where
        R: IntoIterator,
        R::Item: IntoIterator<Item = (usize, f64)>,
    {
        let mut offsets = vec![0];
        let mut indices = Vec::new();
        let mut values = Vec::new();
        let mut scratch: Vec<(usize, f64)> = Vec::new();
        for row in rows {
            scratch.clear();
            scratch.extend(row);
            scratch.sort_by_key(|&(j, _)| j);
            let start = indices.len();
            for &(j, v) in &scratch {
                if j >= n_cols {
                    return Err(Error::ColumnOutOfRange { index: j, n_cols });
                }
                if indices.len() > start && *indices.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                }
            }
            // Drop zeros, including those produced by merging.
            let mut keep = start;
            for p in start..indices.len() {
                if values[p] != 0.0 {
                    indices[keep] = indices[p];
                    values[keep] = values[p];
                    keep += 1;
                }
            }
            indices.truncate(keep);
            values.truncate(keep);
            offsets.push(indices.len());
        }
        Ok(Self {
            n_rows: offsets.len() - 1,
            n_cols,
            storage: Storage::Sparse {
                offsets,
                indices,
                values,
            },
        })
    }

    /// An empty matrix with `n_cols` columns.
    pub fn empty(n_cols: usize) -> Self {
        Self {
            n_rows: 0,
            n_cols,
            storage: Storage::Dense(Vec::new()),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Sparse { .. })
    }

    /// Number of stored entries (all cells for dense storage).
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.len(),
            Storage::Sparse { values, .. } => values.len(),
        }
    }

    #[inline]
    pub fn row(&self, i: usize) -> Row<'_> {
        match &self.storage {
            Storage::Dense(v) => Row::Dense(&v[i * self.n_cols..(i + 1) * self.n_cols]),
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => {
                let (a, b) = (offsets[i], offsets[i + 1]);
                Row::Sparse {
                    indices: &indices[a..b],
                    values: &values[a..b],
                }
            }
        }
    }

    pub fn rows(&self) -> impl Iterator<Item = Row<'_>> + '_ {
        (0..self.n_rows).map(move |i| self.row(i))
    }

    /// Index of the first row holding a non-finite value.
    pub fn first_non_finite_row(&self) -> Option<usize> {
        self.rows().position(|r| !r.is_finite())
    }

    pub fn to_dense(&self) -> Self {
        match &self.storage {
            Storage::Dense(_) => self.clone(),
            Storage::Sparse { .. } => {
                let mut values = Vec::with_capacity(self.n_rows * self.n_cols);
                for r in self.rows() {
                    values.extend(r.to_dense(self.n_cols));
                }
                Self {
                    n_rows: self.n_rows,
                    n_cols: self.n_cols,
                    storage: Storage::Dense(values),
                }
            }
        }
    }

    pub fn to_sparse(&self) -> Self {
        match &self.storage {
            Storage::Sparse { .. } => self.clone(),
            Storage::Dense(_) => {
                let rows = self.rows().map(|r| {
                    let mut entries = Vec::new();
                    r.for_each(|j, v| entries.push((j, v)));
                    entries
                });
                Self::sparse(self.n_cols, rows.collect::<Vec<_>>())
                    .expect("dense columns are in range")
            }
        }
    }

    /// Same rows with a wider column space. Narrowing is rejected.
    pub fn with_n_cols(&self, n_cols: usize) -> Result<Self> {
        if n_cols < self.n_cols {
            return Err(Error::DimensionMismatch {
                left: self.n_cols,
                right: n_cols,
            });
        }
        if n_cols == self.n_cols {
            return Ok(self.clone());
        }
        match &self.storage {
            Storage::Sparse {
                offsets,
                indices,
                values,
            } => Ok(Self {
                n_rows: self.n_rows,
                n_cols,
                storage: Storage::Sparse {
                    offsets: offsets.clone(),
                    indices: indices.clone(),
                    values: values.clone(),
                },
            }),
            Storage::Dense(_) => {
                let mut values = Vec::with_capacity(self.n_rows * n_cols);
                for r in self.rows() {
                    values.extend(r.to_dense(n_cols));
                }
                Self::dense(self.n_rows, n_cols, values)
            }
        }
    }

    /// Rows `indices[0], indices[1], ...`; duplicates allowed.
    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&bad) = indices.iter().find(|&&i| i >= self.n_rows) {
            return Err(Error::RowOutOfRange {
                index: bad,
                n_rows: self.n_rows,
            });
        }
        let storage = match &self.storage {
            Storage::Dense(v) => {
                let mut out = Vec::with_capacity(indices.len() * self.n_cols);
                for &i in indices {
                    out.extend_from_slice(&v[i * self.n_cols..(i + 1) * self.n_cols]);
                }
                Storage::Dense(out)
            }
            Storage::Sparse {
                offsets,
                indices: cols,
                values,
            } => {
                let mut new_offsets = Vec::with_capacity(indices.len() + 1);
                new_offsets.push(0);
                let mut new_cols = Vec::new();
                let mut new_values = Vec::new();
                for &i in indices {
                    let (a, b) = (offsets[i], offsets[i + 1]);
                    new_cols.extend_from_slice(&cols[a..b]);
                    new_values.extend_from_slice(&values[a..b]);
                    new_offsets.push(new_cols.len());
                }
                Storage::Sparse {
                    offsets: new_offsets,
                    indices: new_cols,
                    values: new_values,
                }
            }
        };
        Ok(Self {
            n_rows: indices.len(),
            n_cols: self.n_cols,
            storage,
        })
    }

    /// Vertical stack. Two dense inputs stay dense; anything else is sparse.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.n_cols != other.n_cols {
            return Err(Error::DimensionMismatch {
                left: self.n_cols,
                right: other.n_cols,
            });
        }
        match (&self.storage, &other.storage) {
            (Storage::Dense(a), Storage::Dense(b)) => {
                let mut v = a.clone();
                v.extend_from_slice(b);
                Self::dense(self.n_rows + other.n_rows, self.n_cols, v)
            }
            _ => {
                let (a, b) = (self.to_sparse(), other.to_sparse());
                let (
                    Storage::Sparse {
                        offsets: oa,
                        indices: ia,
                        values: va,
                    },
                    Storage::Sparse {
                        offsets: ob,
                        indices: ib,
                        values: vb,
                    },
                ) = (a.storage, b.storage)
                else {
                    unreachable!("to_sparse returns sparse storage")
                };
                let shift = ia.len();
                let mut offsets = oa;
                offsets.extend(ob.iter().skip(1).map(|o| o + shift));
                let mut indices = ia;
                indices.extend(ib);
                let mut values = va;
                values.extend(vb);
                Ok(Self {
                    n_rows: self.n_rows + other.n_rows,
                    n_cols: self.n_cols,
                    storage: Storage::Sparse {
                        offsets,
                        indices,
                        values,
                    },
                })
            }
        }
    }

    /// Apply `f(column, value)` to every stored entry. Sparse outputs drop
    /// entries mapped to zero.
    pub fn map_entries(&self, f: impl Fn(usize, f64) -> f64) -> Self {
        match &self.storage {
            Storage::Dense(v) => {
                let n_cols = self.n_cols;
                let values = v
                    .iter()
                    .enumerate()
                    .map(|(p, &x)| f(p % n_cols, x))
                    .collect();
                Self {
                    n_rows: self.n_rows,
                    n_cols,
                    storage: Storage::Dense(values),
                }
            }
            Storage::Sparse { .. } => {
                let rows: Vec<Vec<(usize, f64)>> = self
                    .rows()
                    .map(|r| {
                        let mut e = Vec::new();
                        r.for_each(|j, v| e.push((j, f(j, v))));
                        e
                    })
                    .collect();
                Self::sparse(self.n_cols, rows).expect("columns unchanged")
            }
        }
    }

    /// Scale row `i` by `factors[i]`, preserving the storage kind.
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.n_rows {
            return Err(Error::LengthMismatch {
                expected: self.n_rows,
                actual: factors.len(),
            });
        }
        let mut out = self.clone();
        match &mut out.storage {
            Storage::Dense(v) => {
                for (i, chunk) in v.chunks_mut(self.n_cols.max(1)).enumerate() {
                    chunk.iter_mut().for_each(|x| *x *= factors[i]);
                }
            }
            Storage::Sparse {
                offsets, values, ..
            } => {
                for i in 0..self.n_rows {
                    values[offsets[i]..offsets[i + 1]]
                        .iter_mut()
                        .for_each(|x| *x *= factors[i]);
                }
            }
        }
        Ok(out)
    }
}

/// Features plus class labels in `0..n_classes`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledDataset {
    features: FeatureMatrix,
    labels: Vec<usize>,
    n_classes: usize,
}

impl LabeledDataset {
    pub fn new(features: FeatureMatrix, labels: Vec<usize>, n_classes: usize) -> Result<Self> {
        if labels.len() != features.n_rows() {
            return Err(Error::LengthMismatch {
                expected: features.n_rows(),
                actual: labels.len(),
            });
        }
        if n_classes == 0 {
            return Err(Error::invalid("n_classes must be at least 1"));
        }
        if let Some(&label) = labels.iter().find(|&&l| l >= n_classes) {
            return Err(Error::LabelOutOfRange { label, n_classes });
        }
        Ok(Self {
            features,
            labels,
            n_classes,
        })
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        class_counts(&self.labels, self.n_classes)
    }

    /// Classes with no rows. Allowed, but worth surfacing to callers.
    pub fn empty_classes(&self) -> Vec<usize> {
        self.class_counts()
            .iter()
            .enumerate()
            .filter(|(_, &n)| n == 0)
            .map(|(c, _)| c)
            .collect()
    }

    pub fn has_empty_classes(&self) -> bool {
        self.class_counts().contains(&0)
    }

    pub fn concat(&self, other: &Self) -> Result<Self> {
        if self.n_classes != other.n_classes {
            return Err(Error::ClassCountMismatch {
                left: self.n_classes,
                right: other.n_classes,
            });
        }
        let features = self.features.vstack(&other.features)?;
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Ok(Self {
            features,
            labels,
            n_classes: self.n_classes,
        })
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        let features = self.features.select_rows(indices)?;
        let labels = indices.iter().map(|&i| self.labels[i]).collect();
        Ok(Self {
            features,
            labels,
            n_classes: self.n_classes,
        })
    }

    pub fn with_features(&self, features: FeatureMatrix) -> Result<Self> {
        Self::new(features, self.labels.clone(), self.n_classes)
    }
}

/// Features without labels.
#[derive(Debug, Clone, PartialEq)]
pub struct UnlabeledDataset {
    features: FeatureMatrix,
}

impl UnlabeledDataset {
    pub fn new(features: FeatureMatrix) -> Self {
        Self { features }
    }

    pub fn features(&self) -> &FeatureMatrix {
        &self.features
    }

    pub fn into_features(self) -> FeatureMatrix {
        self.features
    }

    pub fn n_rows(&self) -> usize {
        self.features.n_rows()
    }

    pub fn n_cols(&self) -> usize {
        self.features.n_cols()
    }

    pub fn select_rows(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            features: self.features.select_rows(indices)?,
        })
    }

    /// Attach labels, e.g. pseudo-labels from a classifier.
    pub fn with_labels(&self, labels: Vec<usize>, n_classes: usize) -> Result<LabeledDataset> {
        LabeledDataset::new(self.features.clone(), labels, n_classes)
    }
}

pub fn class_counts(labels: &[usize], n_classes: usize) -> Vec<usize> {
    let mut counts = vec![0; n_classes];
    for &l in labels {
        counts[l] += 1;
    }
    counts
}
