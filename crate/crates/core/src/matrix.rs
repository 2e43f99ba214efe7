//! Labeled symmetric distance matrices and their CSV form.

use std::io::{Read, Write};

use crate::error::{Error, Result};

/// Symmetric, nonnegative, zero-diagonal matrix over labeled items.
#[derive(Clone, Debug, PartialEq)]
pub struct DistanceMatrix {
    labels: Vec<String>,
    /// Row-major `n * n`.
    d: Vec<f64>,
}

impl DistanceMatrix {
    /// Validate and wrap a row-major square matrix. Symmetry is checked
    /// exactly.
    pub fn new(labels: Vec<String>, d: Vec<f64>) -> Result<Self> {
        let n = labels.len();
        if d.len() != n * n {
            return Err(Error::Matrix(format!(
                "{} entries for {n} labels (need {})",
                d.len(),
                n * n
            )));
        }
        for i in 0..n {
            if d[i * n + i] != 0.0 {
                return Err(Error::Matrix(format!(
                    "nonzero diagonal at `{}`: {}",
                    labels[i],
                    d[i * n + i]
                )));
            }
            for j in 0..n {
                let x = d[i * n + j];
                if !x.is_finite() || x < 0.0 {
                    return Err(Error::Matrix(format!(
                        "entry ({}, {}) = {x} is not a finite nonnegative distance",
                        labels[i], labels[j]
                    )));
                }
                if x != d[j * n + i] {
                    return Err(Error::Matrix(format!(
                        "asymmetric at ({}, {}): {x} vs {}",
                        labels[i],
                        labels[j],
                        d[j * n + i]
                    )));
                }
            }
        }
        Ok(DistanceMatrix { labels, d })
    }

    /// Fill from the strict upper triangle listed row by row.
    pub fn from_upper(labels: Vec<String>, upper: &[f64]) -> Result<Self> {
        let n = labels.len();
        if upper.len() != n * n.saturating_sub(1) / 2 {
            return Err(Error::Matrix(format!(
                "{} upper-triangle entries for {n} labels",
                upper.len()
            )));
        }
        let mut d = vec![0.0; n * n];
        let mut k = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                d[i * n + j] = upper[k];
                d[j * n + i] = upper[k];
                k += 1;
            }
        }
        DistanceMatrix::new(labels, d)
    }

    /// Build from a distance function evaluated on each unordered pair.
    pub fn from_fn(labels: Vec<String>, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let n = labels.len();
        let mut upper = Vec::with_capacity(n * n.saturating_sub(1) / 2);
        for i in 0..n {
            for j in (i + 1)..n {
                upper.push(f(i, j));
            }
        }
        DistanceMatrix::from_upper(labels, &upper)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[i * self.labels.len() + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let n = self.labels.len();
        &self.d[i * n..(i + 1) * n]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.d
    }

    pub fn max(&self) -> f64 {
        self.d.iter().copied().fold(0.0, f64::max)
    }

    /// Apply `f` to every off-diagonal entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        let n = self.len();
        let d = (0..n * n)
            .map(|k| if k / n == k % n { 0.0 } else { f(self.d[k]) })
            .collect();
        DistanceMatrix::new(self.labels.clone(), d)
    }

    /// Restrict to the given items, in the given order.
    pub fn subset(&self, idx: &[usize]) -> Result<Self> {
        let labels = idx.iter().map(|&i| self.labels[i].clone()).collect();
        let d = idx
            .iter()
            .flat_map(|&i| idx.iter().map(move |&j| (i, j)))
            .map(|(i, j)| self.get(i, j))
            .collect();
        DistanceMatrix::new(labels, d)
    }

    /// Square CSV with an empty corner cell, a header row of labels and
    /// one labelled row per item.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(std::iter::once("").chain(self.labels.iter().map(String::as_str)))?;
        for (i, l) in self.labels.iter().enumerate() {
            out.write_record(std::iter::once(l.clone()).chain(self.row(i).iter().map(|x| x.to_string())))?;
        }
        out.flush()?;
        Ok(())
    }

    /// Read the format written by [`write_csv`](Self::write_csv). Lines
    /// starting with `#` are skipped. A leading row-label column is
    /// accepted when the data rows are one field wider than the header; a
    /// header with an empty first cell is read the same way.
    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .comment(Some(b'#'))
            .flexible(true)
            .trim(csv::Trim::All)
            .from_reader(r);
        let mut rows = rdr.records();
        let header = match rows.next() {
            Some(h) => h?,
            None => return Err(Error::Matrix("empty matrix file".into())),
        };
        let mut labels: Vec<String> = header.iter().map(str::to_string).collect();
        if labels.first().is_some_and(|l| l.is_empty()) {
            labels.remove(0);
        }
        let n = labels.len();
        let mut d = Vec::with_capacity(n * n);
        for (i, rec) in rows.enumerate() {
            let rec = rec?;
            let skip = match rec.len() {
                l if l == n => 0,
                l if l == n + 1 => 1,
                l => {
                    return Err(Error::Matrix(format!(
                        "row {} has {l} fields, expected {n}",
                        i + 1
                    )))
                }
            };
            for f in rec.iter().skip(skip) {
                let x: f64 = f
                    .parse()
                    .map_err(|_| Error::Matrix(format!("row {}: bad number `{f}`", i + 1)))?;
                d.push(x);
            }
        }
        if d.len() != n * n {
            return Err(Error::Matrix(format!(
                "{} data rows for {n} labels",
                d.len() / n.max(1)
            )));
        }
        DistanceMatrix::new(labels, d)
    }
}

/// Euclidean distances between rows of a point matrix.
pub fn euclidean(labels: Vec<String>, points: &[Vec<f64>]) -> Result<DistanceMatrix> {
    DistanceMatrix::from_fn(labels, |i, j| {
        points[i]
            .iter()
            .zip(&points[j])
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    })
}

pub(crate) fn numbered_labels(prefix: &str, n: usize) -> Vec<String> {
    (1..=n).map(|i| format!("{prefix}{i}")).collect()
}
