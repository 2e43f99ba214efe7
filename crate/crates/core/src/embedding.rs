//! Classical (Torgerson) multidimensional scaling.

use crate::error::{Error, Result};
use crate::matrix::DistanceMatrix;

const JACOBI_TOL: f64 = 1e-12;
const MAX_SWEEPS: usize = 100;

/// Eigen-decomposition of a symmetric matrix.
#[derive(Clone, Debug)]
pub struct SymmetricEigen {
    /// Descending.
    pub values: Vec<f64>,
    /// `vectors[c]` is the unit eigenvector for `values[c]`, with its first
    /// nonzero component positive.
    pub vectors: Vec<Vec<f64>>,
}

/// Cyclic Jacobi rotations on a row-major `n * n` symmetric matrix until
/// the off-diagonal Frobenius norm falls below `1e-12 * ||a||`.
pub fn jacobi_eigen(a: &[f64], n: usize) -> Result<SymmetricEigen> {
    assert_eq!(a.len(), n * n);
    let mut a = a.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let fro = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    let mut sweeps = 0;
    while off(&a) > JACOBI_TOL * fro {
        if sweeps == MAX_SWEEPS {
            return Err(Error::Numerical(format!(
                "Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps"
            )));
        }
        sweeps += 1;
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let (app, aqq) = (a[p * n + p], a[q * n + q]);
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k * n + p], a[k * n + q]);
                    a[k * n + p] = c * akp - s * akq;
                    a[k * n + q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p * n + k], a[q * n + k]);
                    a[p * n + k] = c * apk - s * aqk;
                    a[q * n + k] = s * apk + c * aqk;
                }
                a[p * n + q] = 0.0;
                a[q * n + p] = 0.0;
                for k in 0..n {
                    let (vkp, vkq) = (v[k * n + p], v[k * n + q]);
                    v[k * n + p] = c * vkp - s * vkq;
                    v[k * n + q] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]).then(i.cmp(&j)));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let vectors = order
        .iter()
        .map(|&c| {
            let mut col: Vec<f64> = (0..n).map(|k| v[k * n + c]).collect();
            if let Some(first) = col.iter().find(|x| x.abs() > 1e-12) {
                if *first < 0.0 {
                    col.iter_mut().for_each(|x| *x = -*x);
                }
            }
            col
        })
        .collect();
    Ok(SymmetricEigen { values, vectors })
}

/// `S = -1/2 H D^2 H` with `H = I - 11'/n`.
pub fn double_center(d: &DistanceMatrix) -> Vec<f64> {
    let n = d.len();
    let sq: Vec<f64> = d.as_slice().iter().map(|x| x * x).collect();
    let row_mean: Vec<f64> = (0..n)
        .map(|i| sq[i * n..(i + 1) * n].iter().sum::<f64>() / n as f64)
        .collect();
    let grand = row_mean.iter().sum::<f64>() / n as f64;
    let mut s = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            // Row and column means coincide by symmetry.
            s[i * n + j] = -0.5 * (sq[i * n + j] - row_mean[i] - row_mean[j] + grand);
        }
    }
    s
}

#[derive(Clone, Debug)]
pub struct EmbeddingResult {
    pub labels: Vec<String>,
    /// `B` rows of `k` coordinates.
    pub coordinates: Vec<Vec<f64>>,
    /// All `B` eigenvalues of the centered matrix, descending.
    pub eigenvalues: Vec<f64>,
    pub stress: f64,
    /// `sum |negative eigenvalues| / sum |eigenvalues|`.
    pub negative_mass: f64,
    /// Set when `k` exceeds the number of positive eigenvalues; the extra
    /// columns are zero.
    pub padded: bool,
}

impl EmbeddingResult {
    /// Share of eigenvalue `i` in the total of the positive eigenvalues.
    pub fn explained(&self, i: usize) -> f64 {
        let pos: f64 = self.eigenvalues.iter().filter(|&&x| x > 0.0).sum();
        if pos > 0.0 {
            self.eigenvalues[i].max(0.0) / pos
        } else {
            0.0
        }
    }

    /// Plot-ready CSV: `label,x1,..,xk`.
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let k = self.coordinates.first().map_or(0, Vec::len);
        let mut header = vec!["label".to_string()];
        header.extend((1..=k).map(|c| format!("x{c}")));
        out.write_record(&header)?;
        for (l, row) in self.labels.iter().zip(&self.coordinates) {
            let mut rec = vec![l.clone()];
            rec.extend(row.iter().map(|x| x.to_string()));
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }
}

pub fn classical_mds(d: &DistanceMatrix, k: usize) -> Result<EmbeddingResult> {
    let n = d.len();
    if k == 0 {
        return Err(Error::InvalidArgument("embedding dimension must be at least 1".into()));
    }
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "MDS needs at least 2 points, got {n}"
        )));
    }
    let s = double_center(d);
    let eig = jacobi_eigen(&s, n)?;
    // Eigenvalues indistinguishable from rounding are not dimensions.
    let scale = eig.values.iter().map(|x| x.abs()).fold(0.0, f64::max);
    let positive = eig
        .values
        .iter()
        .filter(|&&x| x > 1e-12 * scale && x > 0.0)
        .count();
    let padded = k > positive;
    if padded {
        log::warn!("requested {k} dimensions but only {positive} eigenvalues are positive");
    }
    let mut coordinates = vec![vec![0.0; k]; n];
    for c in 0..k.min(positive) {
        let f = eig.values[c].sqrt();
        for (row, x) in coordinates.iter_mut().zip(&eig.vectors[c]) {
            row[c] = x * f;
        }
    }
    let abs_total: f64 = eig.values.iter().map(|x| x.abs()).sum();
    let neg: f64 = eig.values.iter().filter(|&&x| x < 0.0).map(|x| -x).sum();
    let negative_mass = if abs_total > 0.0 { neg / abs_total } else { 0.0 };
    let stress = stress(d, &coordinates)?;
    Ok(EmbeddingResult {
        labels: d.labels().to_vec(),
        coordinates,
        eigenvalues: eig.values,
        stress,
        negative_mass,
        padded,
    })
}

/// `sum_{i<j} (d_ij - |x_i - x_j|)^2`.
pub fn stress(d: &DistanceMatrix, coords: &[Vec<f64>]) -> Result<f64> {
    let n = d.len();
    if coords.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{} coordinate rows for {n} points",
            coords.len()
        )));
    }
    let mut s = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            let e: f64 = coords[i]
                .iter()
                .zip(&coords[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let r = d.get(i, j) - e;
            s += r * r;
        }
    }
    Ok(s)
}

/// `1 - exp(-lambda d)` entrywise. A dissimilarity, not necessarily a metric.
pub fn kernel_transform(d: &DistanceMatrix, lambda: f64) -> Result<DistanceMatrix> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "kernel parameter must be positive, got {lambda}"
        )));
    }
    d.map(|x| -(-lambda * x).exp_m1())
}
