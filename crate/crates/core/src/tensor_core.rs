//! Sparse trilinear forms and their structural operations.
//!
//! Index conventions used by every module:
//! - ⟨n,m,d⟩ has axis A index `i·m+j`, axis B index `j·d+k`, and axis C index
//!   `i·d+k`. The C variable indexed by (i,k) is the coefficient of entry
//!   (i,k) of the n×d product, so decoding matrices list product entries in
//!   row-major order.
//! - Kronecker products flatten `(i1, i2) ↦ i1·|A2| + i2`, matching the
//!   matrix Kronecker product.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field_arith::{Field, Scalar};

/// Shape ⟨n,m,d⟩ of an n×m by m×d product.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatMulShape {
    pub n: usize,
    pub m: usize,
    pub d: usize,
}

impl MatMulShape {
    pub fn new(n: usize, m: usize, d: usize) -> Self {
        assert!(n >= 1 && m >= 1 && d >= 1, "matmul dimensions must be positive");
        MatMulShape { n, m, d }
    }

    /// Variable counts (|A|, |B|, |C|) = (nm, md, nd).
    pub fn dims(&self) -> [usize; 3] {
        [self.n * self.m, self.m * self.d, self.n * self.d]
    }

    pub fn a_index(&self, i: usize, j: usize) -> usize {
        i * self.m + j
    }

    pub fn b_index(&self, j: usize, k: usize) -> usize {
        j * self.d + k
    }

    pub fn c_index(&self, i: usize, k: usize) -> usize {
        i * self.d + k
    }

    /// Componentwise product of shapes.
    pub fn compose(&self, other: &MatMulShape) -> MatMulShape {
        MatMulShape::new(self.n * other.n, self.m * other.m, self.d * other.d)
    }

    pub fn pow(&self, k: u32) -> MatMulShape {
        MatMulShape::new(self.n.pow(k), self.m.pow(k), self.d.pow(k))
    }

    pub fn volume(&self) -> usize {
        self.n * self.m * self.d
    }
}

impl fmt::Display for MatMulShape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "<{},{},{}>", self.n, self.m, self.d)
    }
}

/// Axis relabelings of a trilinear form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rotation {
    /// New axes (A,B,C) are the old (C,A,B): ⟨n,m,d⟩ becomes ⟨d,n,m⟩.
    Cyclic,
    /// Axes B and C exchange roles: ⟨n,m,d⟩ becomes ⟨m,n,d⟩.
    Swap,
}

impl Rotation {
    /// For each new axis, the old axis it is taken from.
    pub fn source_axes(&self) -> [usize; 3] {
        match self {
            Rotation::Cyclic => [2, 0, 1],
            Rotation::Swap => [0, 2, 1],
        }
    }

    pub fn shape(&self, s: &MatMulShape) -> MatMulShape {
        match self {
            Rotation::Cyclic => MatMulShape::new(s.d, s.n, s.m),
            Rotation::Swap => MatMulShape::new(s.m, s.n, s.d),
        }
    }

    /// Index maps turning the axis-rotated matmul tensor of `s` into the
    /// literal matmul tensor of `self.shape(s)`. Entry `[new_axis][old]`
    /// is the new index of old index `old` on the source axis.
    pub fn matmul_relabeling(&self, s: &MatMulShape) -> [Vec<usize>; 3] {
        let t = self.shape(s);
        let (n, m, d) = (s.n, s.m, s.d);
        let mut maps = [vec![0; 0], vec![0; 0], vec![0; 0]];
        match self {
            Rotation::Cyclic => {
                // new A ← old C (i,k) = new (k,i); new B ← old A (i,j) = new (i,j);
                // new C ← old B (j,k) = new (k,j).
                maps[0] = vec![0; n * d];
                maps[1] = vec![0; n * m];
                maps[2] = vec![0; m * d];
                for i in 0..n {
                    for k in 0..d {
                        maps[0][s.c_index(i, k)] = t.a_index(k, i);
                    }
                    for j in 0..m {
                        maps[1][s.a_index(i, j)] = t.b_index(i, j);
                    }
                }
                for j in 0..m {
                    for k in 0..d {
                        maps[2][s.b_index(j, k)] = t.c_index(k, j);
                    }
                }
            }
            Rotation::Swap => {
                // new A ← old A transposed; new B ← old C; new C ← old B.
                maps[0] = vec![0; n * m];
                maps[1] = vec![0; n * d];
                maps[2] = vec![0; m * d];
                for i in 0..n {
                    for j in 0..m {
                        maps[0][s.a_index(i, j)] = t.a_index(j, i);
                    }
                    for k in 0..d {
                        maps[1][s.c_index(i, k)] = t.b_index(i, k);
                    }
                }
                for j in 0..m {
                    for k in 0..d {
                        maps[2][s.b_index(j, k)] = t.c_index(j, k);
                    }
                }
            }
        }
        maps
    }
}

/// Kronecker-order ↦ matmul-order index maps for the k-fold power of ⟨n,m,d⟩.
///
/// In Kronecker order the A index is Σ_l (i_l·m + j_l)·(nm)^{k−l}; the
/// matching matmul index is i·m^k + j with i = Σ_l i_l n^{k−l} and
/// j = Σ_l j_l m^{k−l}. Likewise for B and C.
pub fn matmul_power_bijection(s: &MatMulShape, k: u32) -> [Vec<usize>; 3] {
    let big = s.pow(k);
    let axis = |rows: usize, cols: usize, big_cols: usize| -> Vec<usize> {
        let size = (rows * cols).pow(k);
        let mut out = vec![0; size];
        for (idx, slot) in out.iter_mut().enumerate() {
            let (mut r, mut c) = (0usize, 0usize);
            let mut rest = idx;
            let mut digits = Vec::with_capacity(k as usize);
            for _ in 0..k {
                digits.push(rest % (rows * cols));
                rest /= rows * cols;
            }
            for &dgt in digits.iter().rev() {
                r = r * rows + dgt / cols;
                c = c * cols + dgt % cols;
            }
            *slot = r * big_cols + c;
        }
        out
    };
    [axis(s.n, s.m, big.m), axis(s.m, s.d, big.d), axis(s.n, s.d, big.d)]
}

/// Index maps from kron(⟨s1⟩, ⟨s2⟩) to ⟨s1∘s2⟩.
pub fn matmul_kron_bijection(s1: &MatMulShape, s2: &MatMulShape) -> [Vec<usize>; 3] {
    let axis = |r1: usize, c1: usize, r2: usize, c2: usize| -> Vec<usize> {
        let mut out = vec![0; r1 * c1 * r2 * c2];
        for a1 in 0..r1 * c1 {
            for a2 in 0..r2 * c2 {
                let r = (a1 / c1) * r2 + a2 / c2;
                let c = (a1 % c1) * c2 + a2 % c2;
                out[a1 * r2 * c2 + a2] = r * (c1 * c2) + c;
            }
        }
        out
    };
    [axis(s1.n, s1.m, s2.n, s2.m), axis(s1.m, s1.d, s2.m, s2.d), axis(s1.n, s1.d, s2.n, s2.d)]
}

/// Per-variable labels (for example CW type vectors), one list per axis.
pub type Labels = [Vec<Vec<u8>>; 3];

/// Which variables survive a zero-out, one mask per axis.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Witness {
    pub keep: [Vec<bool>; 3],
}

impl Witness {
    pub fn keep_all(dims: [usize; 3]) -> Self {
        Witness { keep: dims.map(|n| vec![true; n]) }
    }

    pub fn keep_none(dims: [usize; 3]) -> Self {
        Witness { keep: dims.map(|n| vec![false; n]) }
    }

    pub fn from_fn(dims: [usize; 3], f: impl Fn(usize, usize) -> bool) -> Self {
        let mut keep = Witness::keep_none(dims).keep;
        for (axis, mask) in keep.iter_mut().enumerate() {
            for (i, slot) in mask.iter_mut().enumerate() {
                *slot = f(axis, i);
            }
        }
        Witness { keep }
    }

    /// Keeps exactly the listed indices on each axis.
    pub fn from_sets(dims: [usize; 3], sets: [&[usize]; 3]) -> Self {
        let mut w = Witness::keep_none(dims);
        for axis in 0..3 {
            for &i in sets[axis] {
                w.keep[axis][i] = true;
            }
        }
        w
    }

    pub fn dims(&self) -> [usize; 3] {
        [self.keep[0].len(), self.keep[1].len(), self.keep[2].len()]
    }
}

/// A sparse trilinear form Σ T[i,j,k]·a_i·b_j·c_k.
#[derive(Clone, Debug)]
pub struct Tensor {
    dims: [usize; 3],
    field: Field,
    entries: BTreeMap<[usize; 3], Scalar>,
    labels: Option<Box<Labels>>,
}

impl PartialEq for Tensor {
    /// Coefficient equality; labels are metadata and do not take part.
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims && self.field == other.field && self.entries == other.entries
    }
}

impl Eq for Tensor {}

impl Tensor {
    pub fn zero(dims: [usize; 3], field: &Field) -> Self {
        Tensor { dims, field: field.clone(), entries: BTreeMap::new(), labels: None }
    }

    /// Builds a tensor, summing repeated positions and dropping zeros.
    pub fn from_entries(
        dims: [usize; 3],
        field: &Field,
        entries: impl IntoIterator<Item = ([usize; 3], Scalar)>,
    ) -> Result<Self> {
        let mut t = Tensor::zero(dims, field);
        for (idx, c) in entries {
            t.add_entry(idx, c)?;
        }
        Ok(t)
    }

    /// Adds `c` to the coefficient at `idx`.
    pub fn add_entry(&mut self, idx: [usize; 3], c: Scalar) -> Result<()> {
        if (0..3).any(|a| idx[a] >= self.dims[a]) {
            return Err(Error::DimMismatch(format!("index {idx:?} outside dims {:?}", self.dims)));
        }
        if c.field() != self.field {
            return Err(Error::DomainMismatch(c.field().to_string(), self.field.to_string()));
        }
        match self.entries.get_mut(&idx) {
            Some(v) => {
                *v = &*v + &c;
                if v.is_zero() {
                    self.entries.remove(&idx);
                }
            }
            None if !c.is_zero() => {
                self.entries.insert(idx, c);
            }
            None => {}
        }
        Ok(())
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn field(&self) -> &Field {
        &self.field
    }

    /// |T|, the number of output (C) variables.
    pub fn output_size(&self) -> usize {
        self.dims[2]
    }

    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_zero(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> Scalar {
        self.entries.get(&[i, j, k]).cloned().unwrap_or_else(|| self.field.zero())
    }

    /// Entries in lexicographic index order.
    pub fn entries(&self) -> impl Iterator<Item = (&[usize; 3], &Scalar)> {
        self.entries.iter()
    }

    pub fn labels(&self) -> Option<&Labels> {
        self.labels.as_deref()
    }

    pub fn with_labels(mut self, labels: Labels) -> Result<Self> {
        for axis in 0..3 {
            if labels[axis].len() != self.dims[axis] {
                return Err(Error::DimMismatch(format!(
                    "axis {axis} has {} labels for {} variables",
                    labels[axis].len(),
                    self.dims[axis]
                )));
            }
        }
        self.labels = Some(Box::new(labels));
        Ok(self)
    }

    pub fn without_labels(mut self) -> Self {
        self.labels = None;
        self
    }

    /// ⟨n,m,d⟩ = Σ a_{ij} b_{jk} c_{ik} with all coefficients 1.
    pub fn matmul(shape: MatMulShape, field: &Field) -> Self {
        let mut t = Tensor::zero(shape.dims(), field);
        for i in 0..shape.n {
            for j in 0..shape.m {
                for k in 0..shape.d {
                    t.entries.insert([shape.a_index(i, j), shape.b_index(j, k), shape.c_index(i, k)], field.one());
                }
            }
        }
        t
    }

    fn check_field(&self, other: &Tensor) -> Result<()> {
        if self.field != other.field {
            Err(Error::DomainMismatch(self.field.to_string(), other.field.to_string()))
        } else {
            Ok(())
        }
    }

    /// Kronecker product; labels are concatenated when both sides carry them.
    pub fn kron(&self, other: &Tensor) -> Result<Tensor> {
        self.check_field(other)?;
        let dims = [0, 1, 2].map(|a| self.dims[a] * other.dims[a]);
        let mut t = Tensor::zero(dims, &self.field);
        for (x, c1) in &self.entries {
            for (y, c2) in &other.entries {
                let idx = [0, 1, 2].map(|a| x[a] * other.dims[a] + y[a]);
                t.entries.insert(idx, c1 * c2);
            }
        }
        if let (Some(l1), Some(l2)) = (&self.labels, &other.labels) {
            let labels = [0, 1, 2].map(|a| {
                let mut out = Vec::with_capacity(dims[a]);
                for u in &l1[a] {
                    for v in &l2[a] {
                        let mut w = u.clone();
                        w.extend_from_slice(v);
                        out.push(w);
                    }
                }
                out
            });
            t.labels = Some(Box::new(labels));
        }
        Ok(t)
    }

    /// k-fold Kronecker power (k ≥ 1).
    pub fn kron_power(&self, k: u32) -> Result<Tensor> {
        assert!(k >= 1, "power must be at least 1");
        let mut acc = self.clone();
        for _ in 1..k {
            acc = acc.kron(self)?;
        }
        Ok(acc)
    }

    /// Block-diagonal direct sum; the second summand's indices are offset.
    pub fn direct_sum(&self, other: &Tensor) -> Result<Tensor> {
        self.check_field(other)?;
        let dims = [0, 1, 2].map(|a| self.dims[a] + other.dims[a]);
        let mut t = Tensor::zero(dims, &self.field);
        t.entries = self.entries.clone();
        for (y, c) in &other.entries {
            t.entries.insert([0, 1, 2].map(|a| y[a] + self.dims[a]), c.clone());
        }
        if let (Some(l1), Some(l2)) = (&self.labels, &other.labels) {
            let labels = [0, 1, 2].map(|a| l1[a].iter().chain(&l2[a]).cloned().collect());
            t.labels = Some(Box::new(labels));
        }
        Ok(t)
    }

    /// H⊙T, the direct sum of H copies (H ≥ 1).
    pub fn copies(&self, h: usize) -> Result<Tensor> {
        assert!(h >= 1, "need at least one copy");
        let mut acc = self.clone();
        for _ in 1..h {
            acc = acc.direct_sum(self)?;
        }
        Ok(acc)
    }

    /// Entrywise sum.
    pub fn add(&self, other: &Tensor) -> Result<Tensor> {
        self.check_field(other)?;
        if self.dims != other.dims {
            return Err(Error::DimMismatch(format!("{:?} vs {:?}", self.dims, other.dims)));
        }
        let mut t = self.clone();
        for (idx, c) in &other.entries {
            t.add_entry(*idx, c.clone())?;
        }
        Ok(t)
    }

    pub fn scale(&self, s: &Scalar) -> Tensor {
        let mut t = Tensor::zero(self.dims, &self.field);
        t.labels = self.labels.clone();
        for (idx, c) in &self.entries {
            let v = c * s;
            if !v.is_zero() {
                t.entries.insert(*idx, v);
            }
        }
        t
    }

    /// Sets every variable outside the witness to zero. Dims are unchanged.
    pub fn zero_out(&self, w: &Witness) -> Result<Tensor> {
        if w.dims() != self.dims {
            return Err(Error::DimMismatch(format!("witness {:?} vs tensor {:?}", w.dims(), self.dims)));
        }
        let mut t = Tensor::zero(self.dims, &self.field);
        t.labels = self.labels.clone();
        for (idx, c) in &self.entries {
            if (0..3).all(|a| w.keep[a][idx[a]]) {
                t.entries.insert(*idx, c.clone());
            }
        }
        Ok(t)
    }

    /// Zero-out followed by compaction: surviving variables are renumbered
    /// in increasing order. Returns the tensor and, per axis, the old index
    /// of every new index.
    pub fn zero_out_compact(&self, w: &Witness) -> Result<(Tensor, [Vec<usize>; 3])> {
        let zeroed = self.zero_out(w)?;
        let kept: [Vec<usize>; 3] =
            [0, 1, 2].map(|a| (0..self.dims[a]).filter(|&i| w.keep[a][i]).collect::<Vec<_>>());
        let mut new_index = [0, 1, 2].map(|a| vec![usize::MAX; self.dims[a]]);
        for a in 0..3 {
            for (new, &old) in kept[a].iter().enumerate() {
                new_index[a][old] = new;
            }
        }
        let dims = [kept[0].len(), kept[1].len(), kept[2].len()];
        let mut t = Tensor::zero(dims, &self.field);
        for (idx, c) in &zeroed.entries {
            t.entries.insert([0, 1, 2].map(|a| new_index[a][idx[a]]), c.clone());
        }
        if let Some(l) = &self.labels {
            let labels = [0, 1, 2].map(|a| kept[a].iter().map(|&i| l[a][i].clone()).collect());
            t.labels = Some(Box::new(labels));
        }
        Ok((t, kept))
    }

    /// Applies index maps `maps[axis][old] = new` into a tensor of `dims`.
    pub fn relabel(&self, maps: &[Vec<usize>; 3], dims: [usize; 3]) -> Result<Tensor> {
        for a in 0..3 {
            if maps[a].len() != self.dims[a] {
                return Err(Error::DimMismatch(format!("axis {a} map has length {}", maps[a].len())));
            }
        }
        let mut t = Tensor::zero(dims, &self.field);
        for (idx, c) in &self.entries {
            t.add_entry([0, 1, 2].map(|a| maps[a][idx[a]]), c.clone())?;
        }
        Ok(t)
    }

    /// Pure axis relabeling; see [`Rotation`].
    pub fn rotate(&self, which: Rotation) -> Tensor {
        let src = which.source_axes();
        let dims = src.map(|a| self.dims[a]);
        let mut t = Tensor::zero(dims, &self.field);
        for (idx, c) in &self.entries {
            t.entries.insert(src.map(|a| idx[a]), c.clone());
        }
        if let Some(l) = &self.labels {
            t.labels = Some(Box::new(src.map(|a| l[a].clone())));
        }
        t
    }

    /// Rotates a matmul tensor of shape `s` and relabels it into the literal
    /// matmul tensor of the rotated shape.
    pub fn rotate_matmul(&self, s: &MatMulShape, which: Rotation) -> Result<Tensor> {
        if self.dims != s.dims() {
            return Err(Error::ShapeMismatch(format!("tensor dims {:?} do not fit {s}", self.dims)));
        }
        let rotated = self.rotate(which);
        rotated.relabel(&which.matmul_relabeling(s), which.shape(s).dims())
    }
}

/// Exact coefficient equality.
pub fn tensor_equal(t1: &Tensor, t2: &Tensor) -> bool {
    t1 == t2
}

/// True iff zeroing `t` by `witness` yields exactly `sub`.
pub fn is_zero_out_of(sub: &Tensor, t: &Tensor, witness: &Witness) -> bool {
    sub.dims() == t.dims() && witness.dims() == t.dims() && t.zero_out(witness).map(|z| &z == sub).unwrap_or(false)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Field {
        Field::Rational
    }

    #[test]
    fn matmul_small_shapes() {
        let t = Tensor::matmul(MatMulShape::new(1, 1, 1), &q());
        assert_eq!(t.entries().map(|(i, _)| *i).collect::<Vec<_>>(), vec![[0, 0, 0]]);
        assert_eq!(Tensor::matmul(MatMulShape::new(2, 2, 2), &q()).nnz(), 8);
    }

    #[test]
    fn matmul_213_matches_triple_loop() {
        let s = MatMulShape::new(2, 1, 3);
        let t = Tensor::matmul(s, &q());
        assert_eq!(t.nnz(), 6);
        let mut expected = Vec::new();
        for i in 0..2 {
            for j in 0..1 {
                for k in 0..3 {
                    expected.push([i + j, j * 3 + k, i * 3 + k]);
                }
            }
        }
        expected.sort();
        assert_eq!(t.entries().map(|(i, _)| *i).collect::<Vec<_>>(), expected);
        assert!(t.entries().all(|(_, c)| c.is_one()));
    }

    #[test]
    fn kron_with_unit_is_identity() {
        let t = Tensor::matmul(MatMulShape::new(2, 3, 1), &q());
        let unit = Tensor::matmul(MatMulShape::new(1, 1, 1), &q());
        assert_eq!(t.kron(&unit).unwrap(), t);
    }

    #[test]
    fn direct_sum_examples() {
        let unit = Tensor::matmul(MatMulShape::new(1, 1, 1), &q());
        let s = unit.direct_sum(&unit).unwrap();
        assert_eq!(s.dims(), [2, 2, 2]);
        assert_eq!(s.entries().map(|(i, _)| *i).collect::<Vec<_>>(), vec![[0, 0, 0], [1, 1, 1]]);
        let t = Tensor::matmul(MatMulShape::new(2, 2, 2), &q());
        assert_eq!(t.copies(1).unwrap(), t);
        assert_eq!(t.copies(3).unwrap().nnz(), 24);
    }

    #[test]
    fn zero_out_single_variable() {
        // x0 y0 z0 + x0 y0 z1 with z1 set to zero.
        let f = q();
        let t = Tensor::from_entries([1, 1, 2], &f, [([0, 0, 0], f.one()), ([0, 0, 1], f.one())]).unwrap();
        let w = Witness::from_fn([1, 1, 2], |axis, i| !(axis == 2 && i == 1));
        let sub = Tensor::from_entries([1, 1, 2], &f, [([0, 0, 0], f.one())]).unwrap();
        assert_eq!(t.zero_out(&w).unwrap(), sub);
        assert!(is_zero_out_of(&sub, &t, &w));
        assert!(!is_zero_out_of(&sub, &t, &Witness::keep_all([1, 1, 2])));
        assert!(t.zero_out(&Witness::keep_none([1, 1, 2])).unwrap().is_zero());
        let (compact, kept) = t.zero_out_compact(&w).unwrap();
        assert_eq!(compact.dims(), [1, 1, 1]);
        assert_eq!(kept[2], vec![0]);
    }

    #[test]
    fn rotations() {
        let s = MatMulShape::new(2, 3, 4);
        let t = Tensor::matmul(s, &q());
        let r = t.rotate_matmul(&s, Rotation::Cyclic).unwrap();
        assert_eq!(r, Tensor::matmul(MatMulShape::new(4, 2, 3), &q()));
        let sw = t.rotate_matmul(&s, Rotation::Swap).unwrap();
        assert_eq!(sw, Tensor::matmul(MatMulShape::new(3, 2, 4), &q()));
        let back = t.rotate(Rotation::Cyclic).rotate(Rotation::Cyclic).rotate(Rotation::Cyclic);
        assert_eq!(back, t);
        let mut cur = (t.clone(), s);
        for _ in 0..3 {
            let next = cur.0.rotate_matmul(&cur.1, Rotation::Cyclic).unwrap();
            cur = (next, Rotation::Cyclic.shape(&cur.1));
        }
        assert_eq!(cur.0, t);
    }

    #[test]
    fn kron_of_matmul_is_matmul_after_bijection() {
        let f = q();
        for s1 in [MatMulShape::new(2, 1, 3), MatMulShape::new(2, 2, 2)] {
            for s2 in [MatMulShape::new(1, 3, 2), MatMulShape::new(3, 1, 1)] {
                let k = Tensor::matmul(s1, &f).kron(&Tensor::matmul(s2, &f)).unwrap();
                let big = s1.compose(&s2);
                let relabeled = k.relabel(&matmul_kron_bijection(&s1, &s2), big.dims()).unwrap();
                assert_eq!(relabeled, Tensor::matmul(big, &f));
            }
        }
    }

    #[test]
    fn power_bijection() {
        let f = q();
        let s = MatMulShape::new(2, 3, 1);
        let p = Tensor::matmul(s, &f).kron_power(3).unwrap();
        let relabeled = p.relabel(&matmul_power_bijection(&s, 3), s.pow(3).dims()).unwrap();
        assert_eq!(relabeled, Tensor::matmul(s.pow(3), &f));
    }
}
