//! Sparse coefficient matrices and bilinear algorithms built from them.
//!
//! A bilinear algorithm of rank t is a triple (X, Y, Z) with X: t×|A|,
//! Y: t×|B| and Z: |C|×t. It computes the tensor
//! T[i,j,k] = Σ_l X[l,i]·Y[l,j]·Z[k,l].

use std::fmt;

use num_bigint::BigUint;

use crate::error::{Error, Result};
use crate::field_arith::{Field, Scalar};
use crate::kron_eval::{matvec_counted, OpCount};
use crate::tensor_core::{matmul_kron_bijection, MatMulShape, Rotation, Tensor};

/// Row-sparse matrix over one field. Rows keep their entries sorted by
/// column and never store zeros.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CountedMatrix {
    rows: usize,
    cols: usize,
    field: Field,
    data: Vec<Vec<(usize, Scalar)>>,
}

impl CountedMatrix {
    pub fn zeros(rows: usize, cols: usize, field: &Field) -> Self {
        CountedMatrix { rows, cols, field: field.clone(), data: vec![Vec::new(); rows] }
    }

    pub fn identity(n: usize, field: &Field) -> Self {
        let mut m = CountedMatrix::zeros(n, n, field);
        for (r, row) in m.data.iter_mut().enumerate() {
            row.push((r, field.one()));
        }
        m
    }

    /// Builds from (row, col, value) triples; repeated positions are summed.
    pub fn from_entries(
        rows: usize,
        cols: usize,
        field: &Field,
        entries: impl IntoIterator<Item = (usize, usize, Scalar)>,
    ) -> Result<Self> {
        let mut dense: Vec<std::collections::BTreeMap<usize, Scalar>> = vec![Default::default(); rows];
        for (r, c, v) in entries {
            if r >= rows || c >= cols {
                return Err(Error::DimMismatch(format!("entry ({r},{c}) outside {rows}x{cols}")));
            }
            if v.field() != *field {
                return Err(Error::DomainMismatch(v.field().to_string(), field.to_string()));
            }
            let slot = dense[r].entry(c).or_insert_with(|| field.zero());
            *slot = slot.checked_add(&v)?;
        }
        let data = dense.into_iter().map(|row| row.into_iter().filter(|(_, v)| !v.is_zero()).collect()).collect();
        Ok(CountedMatrix { rows, cols, field: field.clone(), data })
    }

    pub fn from_dense(field: &Field, rows: &[Vec<Scalar>]) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimMismatch("ragged dense matrix".into()));
        }
        CountedMatrix::from_entries(
            rows.len(),
            cols,
            field,
            rows.iter().enumerate().flat_map(|(r, row)| row.iter().enumerate().map(move |(c, v)| (r, c, v.clone()))),
        )
    }

    /// Small integer matrices, mainly for fixtures and tests.
    pub fn from_i64(field: &Field, rows: &[&[i64]]) -> Self {
        let dense: Vec<Vec<Scalar>> = rows.iter().map(|r| r.iter().map(|&v| field.from_i64(v)).collect()).collect();
        CountedMatrix::from_dense(field, &dense).expect("rectangular integer matrix")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    pub fn row(&self, r: usize) -> &[(usize, Scalar)] {
        &self.data[r]
    }

    pub fn get(&self, r: usize, c: usize) -> Scalar {
        match self.data[r].binary_search_by_key(&c, |(cc, _)| *cc) {
            Ok(pos) => self.data[r][pos].1.clone(),
            Err(_) => self.field.zero(),
        }
    }

    pub fn nnz(&self) -> usize {
        self.data.iter().map(Vec::len).sum()
    }

    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, &Scalar)> {
        self.data.iter().enumerate().flat_map(|(r, row)| row.iter().map(move |(c, v)| (r, *c, v)))
    }

    pub fn to_dense(&self) -> Vec<Vec<Scalar>> {
        (0..self.rows).map(|r| (0..self.cols).map(|c| self.get(r, c)).collect()).collect()
    }

    /// Cost of the row-by-row evaluation of `self · v`.
    pub fn naive_cost(&self) -> OpCount {
        let adds: usize = self.data.iter().map(|r| r.len().saturating_sub(1)).sum();
        let mults = self.data.iter().flatten().filter(|(_, v)| !v.is_free_coefficient()).count();
        OpCount::new(adds as u64, mults as u64, 0)
    }

    pub fn has_zero_row(&self) -> bool {
        self.data.iter().any(Vec::is_empty)
    }

    pub fn has_zero_col(&self) -> bool {
        let mut seen = vec![false; self.cols];
        for (_, c, _) in self.entries() {
            seen[c] = true;
        }
        seen.iter().any(|s| !s)
    }

    pub fn transpose(&self) -> CountedMatrix {
        let mut data = vec![Vec::new(); self.cols];
        for (r, c, v) in self.entries() {
            data[c].push((r, v.clone()));
        }
        CountedMatrix { rows: self.cols, cols: self.rows, field: self.field.clone(), data }
    }

    /// Kronecker product; row (r1, r2) ↦ r1·rows(other) + r2.
    pub fn kron(&self, other: &CountedMatrix) -> CountedMatrix {
        let mut data = Vec::with_capacity(self.rows * other.rows);
        for r1 in &self.data {
            for r2 in &other.data {
                let mut row = Vec::with_capacity(r1.len() * r2.len());
                for (c1, v1) in r1 {
                    for (c2, v2) in r2 {
                        row.push((c1 * other.cols + c2, v1 * v2));
                    }
                }
                data.push(row);
            }
        }
        CountedMatrix { rows: self.rows * other.rows, cols: self.cols * other.cols, field: self.field.clone(), data }
    }

    pub fn kron_power(&self, k: u32) -> CountedMatrix {
        let mut acc = CountedMatrix::identity(1, &self.field);
        for _ in 0..k {
            acc = acc.kron(self);
        }
        acc
    }

    /// Stacks matrices with equal column counts on top of each other.
    pub fn vstack(parts: &[&CountedMatrix]) -> Result<CountedMatrix> {
        let first = parts.first().ok_or_else(|| Error::DimMismatch("empty stack".into()))?;
        if parts.iter().any(|p| p.cols != first.cols) {
            return Err(Error::DimMismatch("vstack with differing column counts".into()));
        }
        let data = parts.iter().flat_map(|p| p.data.iter().cloned()).collect();
        Ok(CountedMatrix { rows: parts.iter().map(|p| p.rows).sum(), cols: first.cols, field: first.field.clone(), data })
    }

    /// Places matrices with equal row counts side by side.
    pub fn hstack(parts: &[&CountedMatrix]) -> Result<CountedMatrix> {
        let first = parts.first().ok_or_else(|| Error::DimMismatch("empty stack".into()))?;
        if parts.iter().any(|p| p.rows != first.rows) {
            return Err(Error::DimMismatch("hstack with differing row counts".into()));
        }
        let mut data = vec![Vec::new(); first.rows];
        let mut offset = 0;
        for p in parts {
            for (r, row) in p.data.iter().enumerate() {
                data[r].extend(row.iter().map(|(c, v)| (c + offset, v.clone())));
            }
            offset += p.cols;
        }
        Ok(CountedMatrix { rows: first.rows, cols: offset, field: first.field.clone(), data })
    }

    /// Moves column `c` to `map[c]` in a matrix with `new_cols` columns.
    pub fn map_cols(&self, map: &[usize], new_cols: usize) -> Result<CountedMatrix> {
        if map.len() != self.cols || map.iter().any(|&c| c >= new_cols) {
            return Err(Error::DimMismatch("column map does not fit".into()));
        }
        let data = self
            .data
            .iter()
            .map(|row| {
                let mut r: Vec<(usize, Scalar)> = row.iter().map(|(c, v)| (map[*c], v.clone())).collect();
                r.sort_by_key(|(c, _)| *c);
                r
            })
            .collect();
        Ok(CountedMatrix { rows: self.rows, cols: new_cols, field: self.field.clone(), data })
    }

    /// Moves row `r` to `map[r]` in a matrix with `new_rows` rows.
    pub fn map_rows(&self, map: &[usize], new_rows: usize) -> Result<CountedMatrix> {
        Ok(self.transpose().map_cols(map, new_rows)?.transpose())
    }

    /// Keeps the listed rows in the listed order.
    pub fn select_rows(&self, rows: &[usize]) -> CountedMatrix {
        let data = rows.iter().map(|&r| self.data[r].clone()).collect();
        CountedMatrix { rows: rows.len(), cols: self.cols, field: self.field.clone(), data }
    }

    /// Keeps the listed columns in the listed order.
    pub fn select_cols(&self, cols: &[usize]) -> CountedMatrix {
        self.transpose().select_rows(cols).transpose()
    }

    pub fn scale(&self, s: &Scalar) -> CountedMatrix {
        let data = self
            .data
            .iter()
            .map(|row| row.iter().map(|(c, v)| (*c, v * s)).filter(|(_, v)| !v.is_zero()).collect())
            .collect();
        CountedMatrix { rows: self.rows, cols: self.cols, field: self.field.clone(), data }
    }

    /// Uncounted `self · rhs` for a dense row-major rhs.
    pub fn mul_dense(&self, rhs: &[Vec<Scalar>]) -> Result<Vec<Vec<Scalar>>> {
        if rhs.len() != self.cols {
            return Err(Error::DimMismatch(format!("{} columns against {} rows", self.cols, rhs.len())));
        }
        let width = rhs.first().map(Vec::len).unwrap_or(0);
        Ok(self
            .data
            .iter()
            .map(|row| {
                let mut acc = vec![self.field.zero(); width];
                for (c, v) in row {
                    for (a, b) in acc.iter_mut().zip(&rhs[*c]) {
                        *a = &*a + &(v * b);
                    }
                }
                acc
            })
            .collect())
    }
}

impl fmt::Display for CountedMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for r in 0..self.rows {
            let cells: Vec<String> = (0..self.cols).map(|c| self.get(r, c).to_string()).collect();
            writeln!(f, "[{}]", cells.join(", "))?;
        }
        Ok(())
    }
}

/// Encoding matrices X, Y and decoding matrix Z of a bilinear algorithm.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BilinearAlgorithm {
    pub enc_x: CountedMatrix,
    pub enc_y: CountedMatrix,
    pub dec_z: CountedMatrix,
    /// Set when the algorithm computes the matmul tensor of this shape in
    /// the shared flattening convention.
    pub shape: Option<MatMulShape>,
}

impl BilinearAlgorithm {
    pub fn new(enc_x: CountedMatrix, enc_y: CountedMatrix, dec_z: CountedMatrix) -> Result<Self> {
        let t = enc_x.rows();
        if t == 0 {
            return Err(Error::DimMismatch("rank must be at least 1".into()));
        }
        if enc_y.rows() != t || dec_z.cols() != t {
            return Err(Error::DimMismatch(format!(
                "rank mismatch: enc_x {} rows, enc_y {} rows, dec_z {} cols",
                t,
                enc_y.rows(),
                dec_z.cols()
            )));
        }
        if enc_y.field() != enc_x.field() || dec_z.field() != enc_x.field() {
            return Err(Error::DomainMismatch(enc_x.field().to_string(), enc_y.field().to_string()));
        }
        Ok(BilinearAlgorithm { enc_x, enc_y, dec_z, shape: None })
    }

    pub fn with_shape(mut self, shape: MatMulShape) -> Result<Self> {
        if self.dims() != shape.dims() {
            return Err(Error::ShapeMismatch(format!("algorithm dims {:?} do not fit {shape}", self.dims())));
        }
        self.shape = Some(shape);
        Ok(self)
    }

    pub fn rank(&self) -> usize {
        self.enc_x.rows()
    }

    pub fn field(&self) -> &Field {
        self.enc_x.field()
    }

    /// Variable counts |A|, |B|, |C|.
    pub fn dims(&self) -> [usize; 3] {
        [self.enc_x.cols(), self.enc_y.cols(), self.dec_z.rows()]
    }

    /// Naive cost of the three linear stages plus the rank many products.
    pub fn cost(&self) -> OpCount {
        let mut c = self.enc_x.naive_cost() + self.enc_y.naive_cost() + self.dec_z.naive_cost();
        c.products = BigUint::from(self.rank());
        c
    }

    /// The tensor Σ_l X[l,·] ⊗ Y[l,·] ⊗ Z[·,l].
    pub fn computed_tensor(&self) -> Result<Tensor> {
        let zt = self.dec_z.transpose();
        let mut t = Tensor::zero(self.dims(), self.field());
        for l in 0..self.rank() {
            for (i, x) in self.enc_x.row(l) {
                for (j, y) in self.enc_y.row(l) {
                    let xy = x * y;
                    for (k, z) in zt.row(l) {
                        t.add_entry([*i, *j, *k], &xy * z)?;
                    }
                }
            }
        }
        Ok(t)
    }

    pub fn verify_computes(&self, target: &Tensor) -> Result<bool> {
        if self.dims() != target.dims() {
            return Err(Error::DimMismatch(format!("algorithm dims {:?} vs tensor dims {:?}", self.dims(), target.dims())));
        }
        Ok(self.computed_tensor()? == *target)
    }

    /// Encode, multiply pointwise, decode.
    pub fn evaluate(&self, x: &[Scalar], y: &[Scalar]) -> Result<(Vec<Scalar>, OpCount)> {
        let (ex, cx) = matvec_counted(&self.enc_x, x)?;
        let (ey, cy) = matvec_counted(&self.enc_y, y)?;
        let prods: Vec<Scalar> = ex.iter().zip(&ey).map(|(a, b)| a * b).collect();
        let (z, cz) = matvec_counted(&self.dec_z, &prods)?;
        let mut count = cx + cy + cz;
        count.products = BigUint::from(self.rank());
        Ok((z, count))
    }

    /// Same algorithm with the decoding matrix negated.
    pub fn negated(&self) -> BilinearAlgorithm {
        let minus = -self.field().one();
        BilinearAlgorithm { dec_z: self.dec_z.scale(&minus), shape: None, ..self.clone() }
    }

    /// Kronecker product of the encoding and decoding matrices. Computes
    /// kron(T1, T2) in Kronecker index order.
    pub fn tensor_product(&self, other: &BilinearAlgorithm) -> Result<BilinearAlgorithm> {
        if self.field() != other.field() {
            return Err(Error::DomainMismatch(self.field().to_string(), other.field().to_string()));
        }
        Ok(BilinearAlgorithm {
            enc_x: self.enc_x.kron(&other.enc_x),
            enc_y: self.enc_y.kron(&other.enc_y),
            dec_z: self.dec_z.kron(&other.dec_z),
            shape: None,
        })
    }

    /// Tensor product of two matmul algorithms, re-indexed so that the
    /// result computes the matmul tensor of the composed shape.
    pub fn tensor_product_matmul(&self, other: &BilinearAlgorithm) -> Result<BilinearAlgorithm> {
        let (s1, s2) = match (self.shape, other.shape) {
            (Some(a), Some(b)) => (a, b),
            _ => return Err(Error::ShapeUnknown),
        };
        let raw = self.tensor_product(other)?;
        let maps = matmul_kron_bijection(&s1, &s2);
        let shape = s1.compose(&s2);
        let [na, nb, nc] = shape.dims();
        Ok(BilinearAlgorithm {
            enc_x: raw.enc_x.map_cols(&maps[0], na)?,
            enc_y: raw.enc_y.map_cols(&maps[1], nb)?,
            dec_z: raw.dec_z.map_rows(&maps[2], nc)?,
            shape: Some(shape),
        })
    }

    /// k-fold matmul power computing ⟨n^k, m^k, d^k⟩.
    pub fn matmul_power(&self, k: u32) -> Result<BilinearAlgorithm> {
        let shape = self.shape.ok_or(Error::ShapeUnknown)?;
        let mut acc = naive_algorithm(MatMulShape::new(1, 1, 1), self.field());
        for _ in 0..k {
            acc = acc.tensor_product_matmul(self)?;
        }
        debug_assert_eq!(acc.shape, Some(shape.pow(k)));
        Ok(acc)
    }

    /// Relabels the algorithm to compute the rotated matmul tensor.
    pub fn rotate(&self, which: Rotation) -> Result<BilinearAlgorithm> {
        let shape = self.shape.ok_or(Error::ShapeUnknown)?;
        let maps = which.matmul_relabeling(&shape);
        let new_shape = which.shape(&shape);
        let new_dims = new_shape.dims();
        // t × |axis| factor for each old axis.
        let factors = [self.enc_x.clone(), self.enc_y.clone(), self.dec_z.transpose()];
        let src = which.source_axes();
        let pick = |a: usize| factors[src[a]].map_cols(&maps[a], new_dims[a]);
        Ok(BilinearAlgorithm {
            enc_x: pick(0)?,
            enc_y: pick(1)?,
            dec_z: pick(2)?.transpose(),
            shape: Some(new_shape),
        })
    }
}

/// Row-stacks the encoders and column-stacks the decoders: the result
/// computes Σ_j T_j when algorithm j computes T_j.
pub fn concat_algorithms(algs: &[&BilinearAlgorithm]) -> Result<BilinearAlgorithm> {
    let first = algs.first().ok_or_else(|| Error::DimMismatch("nothing to concatenate".into()))?;
    if algs.iter().any(|a| a.dims() != first.dims()) {
        return Err(Error::DimMismatch("concatenated algorithms must share variable dims".into()));
    }
    let xs: Vec<&CountedMatrix> = algs.iter().map(|a| &a.enc_x).collect();
    let ys: Vec<&CountedMatrix> = algs.iter().map(|a| &a.enc_y).collect();
    let zs: Vec<&CountedMatrix> = algs.iter().map(|a| &a.dec_z).collect();
    let mut out = BilinearAlgorithm::new(CountedMatrix::vstack(&xs)?, CountedMatrix::vstack(&ys)?, CountedMatrix::hstack(&zs)?)?;
    if algs.len() == 1 {
        out.shape = first.shape;
    }
    Ok(out)
}

/// One product per term a_{ij}·b_{jk}; rank n·m·d.
pub fn naive_algorithm(shape: MatMulShape, field: &Field) -> BilinearAlgorithm {
    let (n, m, d) = (shape.n, shape.m, shape.d);
    let [na, nb, nc] = shape.dims();
    let t = n * m * d;
    let one = field.one();
    let mut xs = Vec::with_capacity(t);
    let mut ys = Vec::with_capacity(t);
    let mut zs = Vec::with_capacity(t);
    let mut l = 0;
    for i in 0..n {
        for j in 0..m {
            for k in 0..d {
                xs.push((l, shape.a_index(i, j), one.clone()));
                ys.push((l, shape.b_index(j, k), one.clone()));
                zs.push((shape.c_index(i, k), l, one.clone()));
                l += 1;
            }
        }
    }
    BilinearAlgorithm {
        enc_x: CountedMatrix::from_entries(t, na, field, xs).expect("in range"),
        enc_y: CountedMatrix::from_entries(t, nb, field, ys).expect("in range"),
        dec_z: CountedMatrix::from_entries(nc, t, field, zs).expect("in range"),
        shape: Some(shape),
    }
}

/// Strassen's rank-7 algorithm for ⟨2,2,2⟩. Columns follow the row-major
/// order (11, 12, 21, 22) on every axis.
pub fn strassen(field: &Field) -> BilinearAlgorithm {
    let enc_x = CountedMatrix::from_i64(
        field,
        &[&[1, 0, 0, 1], &[0, 0, 1, 1], &[1, 0, 0, 0], &[0, 0, 0, 1], &[1, 1, 0, 0], &[-1, 0, 1, 0], &[0, 1, 0, -1]],
    );
    let enc_y = CountedMatrix::from_i64(
        field,
        &[&[1, 0, 0, 1], &[1, 0, 0, 0], &[0, 1, 0, -1], &[-1, 0, 1, 0], &[0, 0, 0, 1], &[1, 1, 0, 0], &[0, 0, 1, 1]],
    );
    let dec_rows = CountedMatrix::from_i64(
        field,
        &[&[1, 0, 0, 1], &[0, 0, 1, -1], &[0, 1, 0, 1], &[1, 0, 1, 0], &[-1, 1, 0, 0], &[0, 0, 0, 1], &[1, 0, 0, 0]],
    );
    BilinearAlgorithm { enc_x, enc_y, dec_z: dec_rows.transpose(), shape: Some(MatMulShape::new(2, 2, 2)) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Field {
        Field::Rational
    }

    /// Direct triple loop over the definition, independent of computed_tensor.
    fn brute_force_tensor(b: &BilinearAlgorithm) -> Tensor {
        let [na, nb, nc] = b.dims();
        let (x, y, z) = (b.enc_x.to_dense(), b.enc_y.to_dense(), b.dec_z.to_dense());
        let mut t = Tensor::zero([na, nb, nc], b.field());
        for i in 0..na {
            for j in 0..nb {
                for k in 0..nc {
                    let mut acc = b.field().zero();
                    for l in 0..b.rank() {
                        acc = &acc + &(&(&x[l][i] * &y[l][j]) * &z[k][l]);
                    }
                    t.add_entry([i, j, k], acc).unwrap();
                }
            }
        }
        t
    }

    #[test]
    fn strassen_computes_2x2() {
        let s = strassen(&q());
        assert_eq!(s.rank(), 7);
        assert_eq!(s.enc_x.nnz(), 12);
        assert!(s.verify_computes(&Tensor::matmul(MatMulShape::new(2, 2, 2), &q())).unwrap());
        assert_eq!(s.computed_tensor().unwrap(), brute_force_tensor(&s));
        assert_eq!(s.cost(), OpCount::new(18, 0, 7));
    }

    #[test]
    fn strassen_sign_flip_fails() {
        let mut s = strassen(&q());
        let mut entries: Vec<(usize, usize, Scalar)> = s.enc_x.entries().map(|(r, c, v)| (r, c, v.clone())).collect();
        entries[0].2 = -&entries[0].2;
        s.enc_x = CountedMatrix::from_entries(7, 4, &q(), entries).unwrap();
        assert!(!s.verify_computes(&Tensor::matmul(MatMulShape::new(2, 2, 2), &q())).unwrap());
    }

    #[test]
    fn naive_algorithms() {
        let one = naive_algorithm(MatMulShape::new(1, 1, 1), &q());
        assert_eq!(one.rank(), 1);
        assert_eq!(one.enc_x.to_dense(), vec![vec![q().one()]]);
        assert_eq!(naive_algorithm(MatMulShape::new(2, 2, 2), &q()).rank(), 8);
        let s = MatMulShape::new(2, 3, 4);
        let b = naive_algorithm(s, &q());
        assert_eq!(b.rank(), 24);
        assert!(b.verify_computes(&Tensor::matmul(s, &q())).unwrap());
        assert_eq!(brute_force_tensor(&b), Tensor::matmul(s, &q()));
    }

    #[test]
    fn verify_rejects_wrong_dims() {
        let s = strassen(&q());
        assert!(matches!(s.verify_computes(&Tensor::matmul(MatMulShape::new(1, 2, 2), &q())), Err(Error::DimMismatch(_))));
    }

    #[test]
    fn tensor_products() {
        let s = strassen(&q());
        let s2 = s.tensor_product_matmul(&s).unwrap();
        assert_eq!(s2.rank(), 49);
        assert!(s2.verify_computes(&Tensor::matmul(MatMulShape::new(4, 4, 4), &q())).unwrap());
        let raw = s.tensor_product(&s).unwrap();
        let t = Tensor::matmul(MatMulShape::new(2, 2, 2), &q());
        assert!(raw.verify_computes(&t.kron(&t).unwrap()).unwrap());

        let unit = naive_algorithm(MatMulShape::new(1, 1, 1), &q());
        let same = s.tensor_product(&unit).unwrap();
        assert_eq!((same.enc_x.clone(), same.enc_y.clone(), same.dec_z.clone()), (s.enc_x.clone(), s.enc_y.clone(), s.dec_z.clone()));

        let a = naive_algorithm(MatMulShape::new(2, 1, 1), &q());
        let b = naive_algorithm(MatMulShape::new(1, 3, 1), &q());
        let ab = a.tensor_product_matmul(&b).unwrap();
        assert!(ab.verify_computes(&Tensor::matmul(MatMulShape::new(2, 3, 1), &q())).unwrap());
    }

    #[test]
    fn powers() {
        let s = strassen(&q());
        let s3 = s.matmul_power(3).unwrap();
        assert_eq!(s3.rank(), 343);
        assert!(s3.verify_computes(&Tensor::matmul(MatMulShape::new(8, 8, 8), &q())).unwrap());
    }

    #[test]
    fn concat() {
        let s = strassen(&q());
        let solo = concat_algorithms(&[&s]).unwrap();
        assert_eq!(solo, s);
        let zero = concat_algorithms(&[&s, &s.negated()]).unwrap();
        assert_eq!(zero.rank(), 14);
        assert!(zero.computed_tensor().unwrap().is_zero());
        let n = naive_algorithm(MatMulShape::new(2, 2, 2), &q());
        let twice = concat_algorithms(&[&s, &n]).unwrap();
        let t = Tensor::matmul(MatMulShape::new(2, 2, 2), &q());
        assert!(twice.verify_computes(&t.add(&t).unwrap()).unwrap());
    }

    #[test]
    fn rotations() {
        let a = naive_algorithm(MatMulShape::new(2, 1, 1), &q());
        let sw = a.rotate(Rotation::Swap).unwrap();
        assert_eq!(sw.shape, Some(MatMulShape::new(1, 2, 1)));
        assert!(sw.verify_computes(&Tensor::matmul(MatMulShape::new(1, 2, 1), &q())).unwrap());

        let shape = MatMulShape::new(2, 3, 4);
        let b = naive_algorithm(shape, &q());
        let mut r = b.clone();
        for _ in 0..3 {
            r = r.rotate(Rotation::Cyclic).unwrap();
            assert!(r.verify_computes(&Tensor::matmul(r.shape.unwrap(), &q())).unwrap());
        }
        assert_eq!(r.shape, Some(shape));
        assert!(r.verify_computes(&Tensor::matmul(shape, &q())).unwrap());

        let s = strassen(&q());
        let ss = s.rotate(Rotation::Swap).unwrap();
        assert_eq!(ss.rank(), 7);
        let t = Tensor::matmul(MatMulShape::new(2, 2, 2), &q());
        assert!(ss.verify_computes(&t.rotate_matmul(&MatMulShape::new(2, 2, 2), Rotation::Swap).unwrap()).unwrap());
        assert!(s.rotate(Rotation::Cyclic).unwrap().verify_computes(&t).unwrap());
    }

    #[test]
    fn rotate_requires_shape() {
        let s = strassen(&q());
        let raw = s.tensor_product(&s).unwrap();
        assert_eq!(raw.rotate(Rotation::Cyclic), Err(Error::ShapeUnknown));
    }

    #[test]
    fn pipeline_matches_product() {
        let f = Field::prime(101).unwrap();
        let s = strassen(&f);
        let a: Vec<Scalar> = [3, 5, 7, 11].iter().map(|&v| f.from_i64(v)).collect();
        let b: Vec<Scalar> = [2, 4, 6, 8].iter().map(|&v| f.from_i64(v)).collect();
        let (c, count) = s.evaluate(&a, &b).unwrap();
        // c[i·2+k] = Σ_j a[i·2+j]·b[j·2+k]
        let expected: Vec<Scalar> = [(0, 0), (0, 1), (1, 0), (1, 1)]
            .iter()
            .map(|&(i, k)| &(&a[i * 2] * &b[k]) + &(&a[i * 2 + 1] * &b[2 + k]))
            .collect();
        assert_eq!(c, expected);
        assert_eq!(count, OpCount::new(18, 0, 7));
    }
}
