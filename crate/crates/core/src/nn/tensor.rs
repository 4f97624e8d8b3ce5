use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

/// Dense row-major f64 matrix.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Self::from_vec(rows.len(), cols, rows.concat())
    }

    pub fn scalar(v: f64) -> Self {
        Self { rows: 1, cols: 1, data: vec![v] }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn row_mut(&mut self, r: usize) -> &mut [f64] {
        &mut self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `self * other`.
    pub fn matmul(&self, other: &Mat) -> Result<Mat> {
        if self.cols != other.rows {
            return Err(Error::Dimension(format!(
                "matmul {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            let o = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (x, &b) in o.iter_mut().zip(other.row(k)) {
                    *x += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `self^T * other`.
    pub fn t_matmul(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.rows, other.rows);
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            let b = other.row(k);
            for (i, &a) in self.row(k).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let o = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (x, &bv) in o.iter_mut().zip(b) {
                    *x += a * bv;
                }
            }
        }
        out
    }

    /// `self * other^T`.
    pub fn matmul_t(&self, other: &Mat) -> Mat {
        debug_assert_eq!(self.cols, other.cols);
        let mut out = Mat::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let a = self.row(i);
            for j in 0..other.rows {
                out.data[i * other.rows + j] = a.iter().zip(other.row(j)).map(|(x, y)| x * y).sum();
            }
        }
        out
    }

    pub fn add_assign(&mut self, other: &Mat) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| f(v)).collect() }
    }

    pub fn sum(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }
}

/// Constant sparse matrix in coordinate form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMat {
    pub rows: usize,
    pub cols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

impl SparseMat {
    pub fn matmul(&self, x: &Mat) -> Result<Mat> {
        if self.cols != x.rows {
            return Err(Error::Dimension(format!(
                "sparse {}x{} by {}x{}",
                self.rows, self.cols, x.rows, x.cols
            )));
        }
        let mut out = Mat::zeros(self.rows, x.cols);
        for &(i, j, v) in &self.entries {
            let src = x.row(j);
            for (o, s) in out.row_mut(i).iter_mut().zip(src) {
                *o += v * s;
            }
        }
        Ok(out)
    }

    pub fn t_matmul(&self, g: &Mat) -> Mat {
        let mut out = Mat::zeros(self.cols, g.cols);
        for &(i, j, v) in &self.entries {
            let src = g.row(i);
            for (o, s) in out.row_mut(j).iter_mut().zip(src) {
                *o += v * s;
            }
        }
        out
    }

    pub fn to_dense(&self) -> Mat {
        let mut m = Mat::zeros(self.rows, self.cols);
        for &(i, j, v) in &self.entries {
            m.data[i * self.cols + j] += v;
        }
        m
    }
}

/// `D^{-1/2} (A + I) D^{-1/2}` for an undirected edge list on `n` nodes.
/// Duplicate edges and self loops in the input are ignored.
pub fn normalized_adjacency(n: usize, edges: &[(usize, usize)]) -> Result<SparseMat> {
    let mut adj: Vec<Vec<usize>> = (0..n).map(|i| vec![i]).collect();
    for &(a, b) in edges {
        if a >= n || b >= n {
            return Err(Error::Graph(format!("edge ({a}, {b}) outside {n} nodes")));
        }
        if a == b {
            continue;
        }
        adj[a].push(b);
        adj[b].push(a);
    }
    for l in adj.iter_mut() {
        l.sort_unstable();
        l.dedup();
    }
    let deg: Vec<f64> = adj.iter().map(|l| l.len() as f64).collect();
    let mut entries = Vec::new();
    for (i, l) in adj.iter().enumerate() {
        for &j in l {
            entries.push((i, j, 1.0 / (deg[i] * deg[j]).sqrt()));
        }
    }
    Ok(SparseMat { rows: n, cols: n, entries })
}

/// Same as `normalized_adjacency`, from a dense 0/1 symmetric matrix with zero diagonal.
pub fn normalized_adjacency_dense(a: &Mat) -> Result<SparseMat> {
    if a.rows != a.cols {
        return Err(Error::Graph("adjacency must be square".into()));
    }
    let mut edges = Vec::new();
    for i in 0..a.rows {
        if a.get(i, i) != 0.0 {
            return Err(Error::Graph(format!("self loop on node {i}")));
        }
        for j in 0..a.cols {
            let v = a.get(i, j);
            if v != a.get(j, i) || !(v == 0.0 || v == 1.0) {
                return Err(Error::Graph(format!("entry ({i}, {j}) breaks binary symmetry")));
            }
            if v == 1.0 && i < j {
                edges.push((i, j));
            }
        }
    }
    normalized_adjacency(a.rows, &edges)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_variants_agree() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]).unwrap();
        let b = Mat::from_rows(&[vec![1.0, 0.0], vec![0.5, 1.0], vec![-1.0, 2.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c.data, vec![-1.0, 8.0, 0.5, 17.0]);
        let at = Mat::from_rows(&[vec![1.0, 4.0], vec![2.0, 5.0], vec![3.0, 6.0]]).unwrap();
        assert_eq!(at.t_matmul(&b), c);
        let bt = Mat::from_rows(&[vec![1.0, 0.5, -1.0], vec![0.0, 1.0, 2.0]]).unwrap();
        assert_eq!(a.matmul_t(&bt), c);
        assert!(matches!(a.matmul(&a), Err(Error::Dimension(_))));
    }

    #[test]
    fn normalized_adjacency_of_a_path() {
        // 0 - 1 - 2: degrees with self loops are 2, 3, 2.
        let a = normalized_adjacency(3, &[(0, 1), (1, 2), (1, 0)]).unwrap().to_dense();
        let s6 = 1.0 / 6f64.sqrt();
        let want = [0.5, s6, 0.0, s6, 1.0 / 3.0, s6, 0.0, s6, 0.5];
        for (x, y) in a.data.iter().zip(want) {
            assert!((x - y).abs() < 1e-15);
        }
        // Symmetric with spectral radius 1 (eigenvector D^{1/2} 1).
        let v = Mat::from_vec(3, 1, vec![2f64.sqrt(), 3f64.sqrt(), 2f64.sqrt()]).unwrap();
        let av = a.matmul(&v).unwrap();
        for (x, y) in av.data.iter().zip(&v.data) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn dense_adjacency_examples() {
        let one = normalized_adjacency_dense(&Mat::zeros(1, 1)).unwrap().to_dense();
        assert_eq!(one.data, vec![1.0]);
        let pair = Mat::from_rows(&[vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let two = normalized_adjacency_dense(&pair).unwrap().to_dense();
        assert!(two.data.iter().all(|v| (v - 0.5).abs() < 1e-15));
        let asym = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        assert!(matches!(normalized_adjacency_dense(&asym), Err(Error::Graph(_))));
    }

    #[test]
    fn regular_rings_have_unit_row_sums() {
        for n in 3..12 {
            let edges: Vec<_> = (0..n).map(|i| (i, (i + 1) % n)).collect();
            let a = normalized_adjacency(n, &edges).unwrap().to_dense();
            for r in 0..n {
                assert!((a.row(r).iter().sum::<f64>() - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spectral_radius_at_most_one() {
        // Power iteration on a star plus a tail, an irregular graph.
        let a = normalized_adjacency(6, &[(0, 1), (0, 2), (0, 3), (3, 4), (4, 5)]).unwrap();
        let mut v = Mat::from_vec(6, 1, vec![1.0, -0.3, 0.7, 0.2, -1.0, 0.5]).unwrap();
        let mut lambda = 0.0;
        for _ in 0..500 {
            let w = a.matmul(&v).unwrap();
            lambda = w.data.iter().map(|x| x * x).sum::<f64>().sqrt();
            v = w.map(|x| x / lambda);
        }
        assert!(lambda <= 1.0 + 1e-9, "{lambda}");
    }

    #[test]
    fn isolated_node_maps_to_itself() {
        let a = normalized_adjacency(2, &[]).unwrap().to_dense();
        assert_eq!(a.data, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(matches!(normalized_adjacency(2, &[(0, 5)]), Err(Error::Graph(_))));
    }
}
