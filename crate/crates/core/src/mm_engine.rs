//! Exact, instrumented matrix-multiplication engines.
//!
//! Every engine returns the product together with an [`OpCount`]. The
//! `bounds` functions evaluate the matching cost formulas so callers can
//! compare measured and predicted counts.

use std::fmt;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::bilinear::{concat_algorithms, BilinearAlgorithm, CountedMatrix};
use crate::error::{Error, Result};
use crate::field_arith::{Field, Scalar};
use crate::kron_eval::{apply_plan, flatten_rectangular, kron_plan, kron_power_bound, matvec_counted, stage_as_rectangular, OpCount, PlanOrder, Stage};
use crate::tensor_core::{matmul_power_bijection, MatMulShape, Tensor, Witness};

/// Dense row-major matrix.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    field: Field,
    data: Vec<Scalar>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize, field: &Field) -> Self {
        Matrix { rows, cols, field: field.clone(), data: vec![field.zero(); rows * cols] }
    }

    pub fn from_rows(field: &Field, rows: Vec<Vec<Scalar>>) -> Result<Self> {
        let cols = rows.first().map(Vec::len).unwrap_or(0);
        if rows.iter().any(|r| r.len() != cols) {
            return Err(Error::DimMismatch("ragged matrix".into()));
        }
        let n = rows.len();
        let data: Vec<Scalar> = rows.into_iter().flatten().collect();
        if let Some(bad) = data.iter().find(|s| s.field() != *field) {
            return Err(Error::DomainMismatch(bad.field().to_string(), field.to_string()));
        }
        Ok(Matrix { rows: n, cols, field: field.clone(), data })
    }

    pub fn from_i64(field: &Field, rows: &[&[i64]]) -> Self {
        let rows = rows.iter().map(|r| r.iter().map(|&v| field.from_i64(v)).collect()).collect();
        Matrix::from_rows(field, rows).expect("rectangular integer matrix")
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, field: &Field, rng: &mut R) -> Self {
        Matrix { rows, cols, field: field.clone(), data: (0..rows * cols).map(|_| field.random(rng)).collect() }
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

    pub fn get(&self, r: usize, c: usize) -> &Scalar {
        &self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Scalar) {
        self.data[r * self.cols + c] = v;
    }

    /// Row-major entries; entry (i, j) sits at i·cols + j.
    pub fn data(&self) -> &[Scalar] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<Scalar>> {
        self.data.chunks(self.cols.max(1)).take(self.rows).map(<[Scalar]>::to_vec).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Scalar::is_zero)
    }

    pub fn block(&self, r0: usize, c0: usize, h: usize, w: usize) -> Matrix {
        let mut data = Vec::with_capacity(h * w);
        for r in r0..r0 + h {
            data.extend_from_slice(&self.data[r * self.cols + c0..r * self.cols + c0 + w]);
        }
        Matrix { rows: h, cols: w, field: self.field.clone(), data }
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Matrix) {
        for r in 0..b.rows {
            let dst = (r0 + r) * self.cols + c0;
            self.data[dst..dst + b.cols].clone_from_slice(&b.data[r * b.cols..(r + 1) * b.cols]);
        }
    }

    /// Zero-extends to at least the given size.
    pub fn padded(&self, rows: usize, cols: usize) -> Matrix {
        let mut out = Matrix::zeros(rows.max(self.rows), cols.max(self.cols), &self.field);
        out.set_block(0, 0, self);
        out
    }

    pub fn cropped(&self, rows: usize, cols: usize) -> Matrix {
        self.block(0, 0, rows, cols)
    }
}

impl fmt::Display for Matrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for row in self.to_rows() {
            let cells: Vec<String> = row.iter().map(Scalar::to_string).collect();
            writeln!(f, "{}", cells.join(","))?;
        }
        Ok(())
    }
}

/// Left and right operands of one product.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MatrixPair {
    pub lhs: Matrix,
    pub rhs: Matrix,
}

impl MatrixPair {
    pub fn new(lhs: Matrix, rhs: Matrix) -> Result<Self> {
        if lhs.cols != rhs.rows {
            return Err(Error::DimMismatch(format!("{}x{} times {}x{}", lhs.rows, lhs.cols, rhs.rows, rhs.cols)));
        }
        if lhs.field != rhs.field {
            return Err(Error::DomainMismatch(lhs.field.to_string(), rhs.field.to_string()));
        }
        Ok(MatrixPair { lhs, rhs })
    }

    pub fn random<R: Rng + ?Sized>(shape: MatMulShape, field: &Field, rng: &mut R) -> Self {
        MatrixPair { lhs: Matrix::random(shape.n, shape.m, field, rng), rhs: Matrix::random(shape.m, shape.d, field, rng) }
    }

    pub fn shape(&self) -> MatMulShape {
        MatMulShape::new(self.lhs.rows, self.lhs.cols, self.rhs.cols)
    }

    pub fn field(&self) -> &Field {
        &self.lhs.field
    }
}

/// One row of a per-level cost breakdown.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceRow {
    pub level: usize,
    pub phase: String,
    pub subproblems: usize,
    pub count: OpCount,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MultiplyResult {
    pub product: Matrix,
    pub count: OpCount,
    pub trace: Vec<TraceRow>,
}

/// Products of several independent pairs computed together.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BatchResult {
    pub products: Vec<Matrix>,
    pub count: OpCount,
    pub trace: Vec<TraceRow>,
}

/// Schoolbook product: n·m·d products and n·d·(m−1) additions.
pub fn multiply_naive(p: &MatrixPair) -> MultiplyResult {
    let (n, m, d) = (p.lhs.rows, p.lhs.cols, p.rhs.cols);
    let mut c = Matrix::zeros(n, d, p.field());
    for i in 0..n {
        for k in 0..d {
            let mut acc: Option<Scalar> = None;
            for j in 0..m {
                let t = p.lhs.get(i, j) * p.rhs.get(j, k);
                acc = Some(match acc {
                    None => t,
                    Some(a) => a + t,
                });
            }
            if let Some(v) = acc {
                c.set(i, k, v);
            }
        }
    }
    let count = OpCount::new((n * d * m.saturating_sub(1)) as u64, 0, (n * m * d) as u64);
    MultiplyResult { product: c, count, trace: Vec::new() }
}

fn check_power_shape(p: &MatrixPair, base: &MatMulShape, k: u32) -> Result<()> {
    let want = base.pow(k);
    if p.shape() != want {
        return Err(Error::ShapeMismatch(format!("pair has shape {} but {base}^{k} = {want}", p.shape())));
    }
    Ok(())
}

fn scalar_leaf(p: &MatrixPair) -> MultiplyResult {
    let mut product = Matrix::zeros(1, 1, p.field());
    product.set(0, 0, p.lhs.get(0, 0) * p.rhs.get(0, 0));
    MultiplyResult { product, count: OpCount::new(0, 0, 1), trace: Vec::new() }
}

fn plan_trace(level_base: usize, phase: &str, stages: &[Stage]) -> Vec<TraceRow> {
    stages
        .iter()
        .enumerate()
        .map(|(i, s)| TraceRow { level: level_base + i + 1, phase: phase.to_string(), subproblems: s.left * s.right, count: s.cost() })
        .collect()
}

/// Applies X^{⊗k}, Y^{⊗k} and Z^{⊗k} as Kronecker plans around the
/// pointwise products.
pub fn multiply_recursive(alg: &BilinearAlgorithm, p: &MatrixPair, k: u32, order: PlanOrder) -> Result<MultiplyResult> {
    let shape = alg.shape.ok_or(Error::ShapeUnknown)?;
    check_power_shape(p, &shape, k)?;
    if k == 0 {
        return Ok(scalar_leaf(p));
    }
    let maps = matmul_power_bijection(&shape, k);
    let a: Vec<Scalar> = maps[0].iter().map(|&i| p.lhs.data[i].clone()).collect();
    let b: Vec<Scalar> = maps[1].iter().map(|&i| p.rhs.data[i].clone()).collect();
    let (px, py, pz) = (kron_plan(&alg.enc_x, k, order), kron_plan(&alg.enc_y, k, order), kron_plan(&alg.dec_z, k, order));
    let (ea, ca) = apply_plan(&px, &a)?;
    let (eb, cb) = apply_plan(&py, &b)?;
    let prods: Vec<Scalar> = ea.iter().zip(&eb).map(|(x, y)| x * y).collect();
    let (z, cz) = apply_plan(&pz, &prods)?;
    let big = shape.pow(k);
    let mut c = Matrix::zeros(big.n, big.d, p.field());
    for (idx, v) in z.into_iter().enumerate() {
        c.data[maps[2][idx]] = v;
    }
    let mut count = ca + cb + cz;
    count.products = BigUint::from(prods.len());
    let mut trace = plan_trace(0, "enc_x", &px.stages);
    trace.extend(plan_trace(0, "enc_y", &py.stages));
    trace.push(TraceRow { level: k as usize, phase: "products".into(), subproblems: prods.len(), count: OpCount::new(0, 0, prods.len() as u64) });
    trace.extend(plan_trace(0, "dec_z", &pz.stages));
    Ok(MultiplyResult { product: c, count, trace })
}

/// Sub-problems produced by cutting a product into a grid of base-sized blocks.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BlockSplit {
    pub base: MatMulShape,
    /// Number of blocks along the n, m and d axes.
    pub grid: [usize; 3],
    /// Pieces in (row block, column block, inner block) order.
    pub pieces: Vec<MatrixPair>,
}

/// Splits `p` into base-shaped sub-products.
pub fn block_extend(p: &MatrixPair, base: MatMulShape) -> Result<BlockSplit> {
    let s = p.shape();
    if base.n == 0 || base.m == 0 || base.d == 0 || s.n % base.n != 0 || s.m % base.m != 0 || s.d % base.d != 0 {
        return Err(Error::NotDivisible(format!("{s} into blocks of {base}")));
    }
    let grid = [s.n / base.n, s.m / base.m, s.d / base.d];
    let mut pieces = Vec::with_capacity(grid.iter().product());
    for bi in 0..grid[0] {
        for bk in 0..grid[2] {
            for bj in 0..grid[1] {
                pieces.push(MatrixPair {
                    lhs: p.lhs.block(bi * base.n, bj * base.m, base.n, base.m),
                    rhs: p.rhs.block(bj * base.m, bk * base.d, base.m, base.d),
                });
            }
        }
    }
    Ok(BlockSplit { base, grid, pieces })
}

/// Reassembles the products of a [`BlockSplit`]; summing over the inner
/// blocks costs (m′−1)·n·d additions per output block.
pub fn block_combine(split: &BlockSplit, products: &[Matrix]) -> Result<(Matrix, OpCount)> {
    let [gn, gm, gd] = split.grid;
    if products.len() != gn * gm * gd {
        return Err(Error::DimMismatch(format!("{} products for {} pieces", products.len(), gn * gm * gd)));
    }
    let field = products.first().map(|m| m.field.clone()).unwrap_or(Field::Rational);
    let (bn, bd) = (split.base.n, split.base.d);
    let mut c = Matrix::zeros(gn * bn, gd * bd, &field);
    let mut count = OpCount::zero();
    for bi in 0..gn {
        for bk in 0..gd {
            let first = (bi * gd + bk) * gm;
            let terms: Vec<(Scalar, &Matrix)> = products[first..first + gm].iter().map(|m| (field.one(), m)).collect();
            let (sum, cnt) = linear_combination(&terms, bn, bd, &field);
            count += cnt;
            c.set_block(bi * bn, bk * bd, &sum);
        }
    }
    Ok((c, count))
}

/// Σ coeff·block with the naive cost: one addition per entry per extra
/// term, one multiplication per entry for coefficients outside {0, ±1}.
fn linear_combination(terms: &[(Scalar, &Matrix)], rows: usize, cols: usize, field: &Field) -> (Matrix, OpCount) {
    let size = (rows * cols) as u64;
    let mut out = Matrix::zeros(rows, cols, field);
    let mut mults = 0u64;
    for (idx, (coeff, m)) in terms.iter().enumerate() {
        if !coeff.is_free_coefficient() {
            mults += size;
        }
        for (o, v) in out.data.iter_mut().zip(&m.data) {
            let term = if coeff.is_one() {
                v.clone()
            } else if coeff.is_minus_one() {
                -v
            } else {
                coeff * v
            };
            *o = if idx == 0 { term } else { &*o + &term };
        }
    }
    let adds = terms.len().saturating_sub(1) as u64 * size;
    (out, OpCount::new(adds, mults, 0))
}

/// Supplies the rectangular products `M · V` used by [`multiply_via_rect`].
pub trait RectBackend {
    fn name(&self) -> &'static str;
    fn multiply(&self, m: &CountedMatrix, rhs: &Matrix) -> Result<(Matrix, OpCount)>;
}

/// Row-wise evaluation of the sparse matrix, column by column.
#[derive(Clone, Copy, Debug, Default)]
pub struct NaiveBackend;

impl RectBackend for NaiveBackend {
    fn name(&self) -> &'static str {
        "naive"
    }

    fn multiply(&self, m: &CountedMatrix, rhs: &Matrix) -> Result<(Matrix, OpCount)> {
        if rhs.rows != m.cols() {
            return Err(Error::DimMismatch(format!("{} columns against {} rows", m.cols(), rhs.rows)));
        }
        let mut out = Matrix::zeros(m.rows(), rhs.cols, &rhs.field);
        let mut count = OpCount::zero();
        for c in 0..rhs.cols {
            let col: Vec<Scalar> = (0..rhs.rows).map(|r| rhs.get(r, c).clone()).collect();
            let (y, cnt) = matvec_counted(m, &col)?;
            count += cnt;
            for (r, v) in y.into_iter().enumerate() {
                out.set(r, c, v);
            }
        }
        Ok((out, count))
    }
}

/// Treats `M` as a dense matrix, pads every dimension to a multiple of
/// a^levels, and multiplies the blocks with [`multiply_recursive`].
#[derive(Clone, Debug)]
pub struct TiledBackend {
    pub alg: BilinearAlgorithm,
    pub levels: u32,
}

impl TiledBackend {
    pub fn new(alg: BilinearAlgorithm, levels: u32) -> Result<Self> {
        match alg.shape {
            Some(s) if s.n == s.m && s.m == s.d => Ok(TiledBackend { alg, levels }),
            Some(_) => Err(Error::ShapeMismatch("tiled backend needs a square base algorithm".into())),
            None => Err(Error::ShapeUnknown),
        }
    }
}

impl RectBackend for TiledBackend {
    fn name(&self) -> &'static str {
        "tiled"
    }

    fn multiply(&self, m: &CountedMatrix, rhs: &Matrix) -> Result<(Matrix, OpCount)> {
        let base = self.alg.shape.ok_or(Error::ShapeUnknown)?.pow(self.levels);
        let b = base.n;
        let up = |x: usize| x.div_ceil(b) * b;
        let lhs = Matrix::from_rows(&rhs.field, m.to_dense())?;
        let pair = MatrixPair::new(lhs.padded(up(m.rows()), up(m.cols())), rhs.padded(up(rhs.rows), up(rhs.cols)))?;
        let split = block_extend(&pair, base)?;
        let mut count = OpCount::zero();
        let mut products = Vec::with_capacity(split.pieces.len());
        for piece in &split.pieces {
            let r = multiply_recursive(&self.alg, piece, self.levels, PlanOrder::Reversed)?;
            count += r.count;
            products.push(r.product);
        }
        let (c, cnt) = block_combine(&split, &products)?;
        count += cnt;
        // Every product has an entry of M as one factor.
        count.multiplications += std::mem::take(&mut count.products);
        Ok((c.cropped(m.rows(), rhs.cols), count))
    }
}

/// Runs each stage of a forward Kronecker plan as one rectangular product.
fn rect_apply(m: &CountedMatrix, k: u32, v: &[Scalar], backend: &dyn RectBackend, phase: &str, trace: &mut Vec<TraceRow>) -> Result<(Vec<Scalar>, OpCount)> {
    let plan = kron_plan(m, k, PlanOrder::Forward);
    let mut cur = v.to_vec();
    let mut count = OpCount::zero();
    for (i, stage) in plan.stages.iter().enumerate() {
        let rect = stage_as_rectangular(stage, &cur)?;
        let rhs = Matrix::from_rows(m.field(), rect.rhs)?;
        let (prod, cnt) = backend.multiply(m, &rhs)?;
        trace.push(TraceRow { level: i + 1, phase: phase.to_string(), subproblems: rhs.cols, count: cnt.clone() });
        count += cnt;
        cur = flatten_rectangular(&prod.to_rows(), rect.left, rect.right);
    }
    Ok((cur, count))
}

/// Square products through the rectangular reduction: encoding stage i is
/// a (t, n², t^{i−1}·n^{2(k−i)}) product and decoding stage i is a
/// (n², t, n^{2(i−1)}·t^{k−i}) product, each handed to `backend`.
pub fn multiply_via_rect(alg: &BilinearAlgorithm, p: &MatrixPair, k: u32, backend: &dyn RectBackend) -> Result<MultiplyResult> {
    let shape = alg.shape.ok_or(Error::ShapeUnknown)?;
    if shape.n != shape.m || shape.m != shape.d {
        return Err(Error::ShapeMismatch(format!("rectangular reduction needs a square base, got {shape}")));
    }
    check_power_shape(p, &shape, k)?;
    if k == 0 {
        return Ok(scalar_leaf(p));
    }
    let maps = matmul_power_bijection(&shape, k);
    let a: Vec<Scalar> = maps[0].iter().map(|&i| p.lhs.data[i].clone()).collect();
    let b: Vec<Scalar> = maps[1].iter().map(|&i| p.rhs.data[i].clone()).collect();
    let mut trace = Vec::new();
    let (ea, ca) = rect_apply(&alg.enc_x, k, &a, backend, "enc_x", &mut trace)?;
    let (eb, cb) = rect_apply(&alg.enc_y, k, &b, backend, "enc_y", &mut trace)?;
    let prods: Vec<Scalar> = ea.iter().zip(&eb).map(|(x, y)| x * y).collect();
    trace.push(TraceRow { level: k as usize, phase: "products".into(), subproblems: prods.len(), count: OpCount::new(0, 0, prods.len() as u64) });
    let (z, cz) = rect_apply(&alg.dec_z, k, &prods, backend, "dec_z", &mut trace)?;
    let big = shape.pow(k);
    let mut c = Matrix::zeros(big.n, big.d, p.field());
    for (idx, v) in z.into_iter().enumerate() {
        c.data[maps[2][idx]] = v;
    }
    let mut count = ca + cb + cz;
    count.products = BigUint::from(prods.len());
    Ok(MultiplyResult { product: c, count, trace })
}

/// Where each of H copies of ⟨n,m,d⟩ sits inside a larger tensor:
/// `copies[h][axis][local]` is the global index of a local variable.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CopyEmbedding {
    pub base: MatMulShape,
    pub copies: Vec<[Vec<usize>; 3]>,
}

impl CopyEmbedding {
    pub fn identity(base: MatMulShape) -> Self {
        CopyEmbedding { base, copies: vec![base.dims().map(|n| (0..n).collect())] }
    }

    /// Copy h occupies the h-th block of every axis.
    pub fn direct_sum(base: MatMulShape, h: usize) -> Self {
        let dims = base.dims();
        CopyEmbedding { base, copies: (0..h).map(|c| dims.map(|n| (c * n..(c + 1) * n).collect())).collect() }
    }

    pub fn h(&self) -> usize {
        self.copies.len()
    }

    pub fn witness(&self, dims: [usize; 3]) -> Witness {
        let mut keep = dims.map(|n| vec![false; n]);
        for copy in &self.copies {
            for axis in 0..3 {
                for &g in &copy[axis] {
                    if g < dims[axis] {
                        keep[axis][g] = true;
                    }
                }
            }
        }
        Witness { keep }
    }

    /// For each axis, global index ↦ (copy, local index).
    fn inverse(&self, dims: [usize; 3]) -> Result<[Vec<Option<(usize, usize)>>; 3]> {
        let mut inv = dims.map(|n| vec![None; n]);
        for (h, copy) in self.copies.iter().enumerate() {
            for axis in 0..3 {
                if copy[axis].len() != self.base.dims()[axis] {
                    return Err(Error::WitnessInvalid(format!("copy {h} axis {axis} has {} variables", copy[axis].len())));
                }
                for (local, &g) in copy[axis].iter().enumerate() {
                    let slot = inv[axis].get_mut(g).ok_or_else(|| Error::WitnessInvalid(format!("index {g} outside axis {axis}")))?;
                    if slot.is_some() {
                        return Err(Error::WitnessInvalid(format!("index {g} on axis {axis} used twice")));
                    }
                    *slot = Some((h, local));
                }
            }
        }
        Ok(inv)
    }

    /// Checks that zeroing `t` outside the embedded variables leaves exactly
    /// the H embedded copies of the base matmul tensor.
    pub fn validate(&self, t: &Tensor) -> Result<()> {
        self.inverse(t.dims())?;
        let mut expected = Tensor::zero(t.dims(), t.field());
        let unit = Tensor::matmul(self.base, t.field());
        for copy in &self.copies {
            for (idx, c) in unit.entries() {
                expected.add_entry([0, 1, 2].map(|a| copy[a][idx[a]]), c.clone())?;
            }
        }
        let kept = t.zero_out(&self.witness(t.dims()))?;
        if kept != expected {
            return Err(Error::WitnessInvalid("zero-out does not equal the embedded copies".into()));
        }
        Ok(())
    }
}

/// Bilinear algorithm for a tensor T = Σ_j T_j together with an embedding
/// of H matmul copies into T.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SumAlgorithm {
    pub parts: Vec<BilinearAlgorithm>,
    pub combined: BilinearAlgorithm,
    pub embedding: CopyEmbedding,
}

impl SumAlgorithm {
    /// Concatenates the parts and checks the embedding against the tensor
    /// they compute.
    pub fn new(parts: Vec<BilinearAlgorithm>, embedding: CopyEmbedding) -> Result<Self> {
        let refs: Vec<&BilinearAlgorithm> = parts.iter().collect();
        let combined = concat_algorithms(&refs)?;
        embedding.validate(&combined.computed_tensor()?)?;
        Ok(SumAlgorithm { parts, combined, embedding })
    }

    /// A single algorithm used for one copy.
    pub fn single(alg: &BilinearAlgorithm) -> Result<Self> {
        let base = alg.shape.ok_or(Error::ShapeUnknown)?;
        SumAlgorithm::new(vec![alg.clone()], CopyEmbedding::identity(base))
    }

    /// H block-diagonal copies of `alg`, one part per copy.
    pub fn direct_sum(alg: &BilinearAlgorithm, h: usize) -> Result<Self> {
        let base = alg.shape.ok_or(Error::ShapeUnknown)?;
        let dims = base.dims();
        let parts = (0..h)
            .map(|c| {
                let shift = |axis: usize| -> Vec<usize> { (0..dims[axis]).map(|i| c * dims[axis] + i).collect() };
                Ok(BilinearAlgorithm {
                    enc_x: alg.enc_x.map_cols(&shift(0), h * dims[0])?,
                    enc_y: alg.enc_y.map_cols(&shift(1), h * dims[1])?,
                    dec_z: alg.dec_z.map_rows(&shift(2), h * dims[2])?,
                    shape: None,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        SumAlgorithm::new(parts, CopyEmbedding::direct_sum(base, h))
    }

    pub fn rank(&self) -> usize {
        self.combined.rank()
    }

    pub fn h(&self) -> usize {
        self.embedding.h()
    }

    /// Number of concatenated parts ℓ.
    pub fn ell(&self) -> usize {
        self.parts.len()
    }

    pub fn base(&self) -> MatMulShape {
        self.embedding.base
    }
}

struct Level<'a> {
    alg: &'a BilinearAlgorithm,
    emb: &'a CopyEmbedding,
    inv: [Vec<Option<(usize, usize)>>; 3],
}

impl<'a> Level<'a> {
    fn new(alg: &'a BilinearAlgorithm, emb: &'a CopyEmbedding) -> Result<Self> {
        Ok(Level { alg, emb, inv: emb.inverse(alg.dims())? })
    }
}

/// Breadth-first recursion: each level groups its problems into batches of
/// H, encodes every batch into `rank` child problems, solves all children
/// at the next level, and decodes.
fn solve_levels(problems: Vec<MatrixPair>, levels: &[Level], depth: usize, count: &mut OpCount, trace: &mut Vec<TraceRow>) -> Result<Vec<Matrix>> {
    let Some(level) = levels.first() else {
        let mut out = Vec::with_capacity(problems.len());
        let mut leaf = OpCount::zero();
        for p in &problems {
            let r = multiply_naive(p);
            leaf += r.count;
            out.push(r.product);
        }
        trace.push(TraceRow { level: depth, phase: "products".into(), subproblems: problems.len(), count: leaf.clone() });
        *count += leaf;
        return Ok(out);
    };
    let base = level.emb.base;
    let h = level.emb.h();
    let t = level.alg.rank();
    let field = level.alg.field().clone();
    let Some(first) = problems.first() else { return Ok(Vec::new()) };
    let s = first.shape();
    if s.n % base.n != 0 || s.m % base.m != 0 || s.d % base.d != 0 {
        return Err(Error::NotDivisible(format!("{s} by {base}")));
    }
    let (bn, bm, bd) = (s.n / base.n, s.m / base.m, s.d / base.d);
    let mut enc = OpCount::zero();
    let mut children = Vec::new();
    let batches: Vec<&[MatrixPair]> = problems.chunks(h).collect();
    for batch in &batches {
        let blocks_a: Vec<Vec<Matrix>> = batch
            .iter()
            .map(|p| (0..base.n * base.m).map(|a| p.lhs.block((a / base.m) * bn, (a % base.m) * bm, bn, bm)).collect())
            .collect();
        let blocks_b: Vec<Vec<Matrix>> = batch
            .iter()
            .map(|p| (0..base.m * base.d).map(|b| p.rhs.block((b / base.d) * bm, (b % base.d) * bd, bm, bd)).collect())
            .collect();
        for l in 0..t {
            let ta = gather(level.alg.enc_x.row(l), &level.inv[0], &blocks_a);
            let tb = gather(level.alg.enc_y.row(l), &level.inv[1], &blocks_b);
            let (ca, xa) = if ta.is_empty() { (Matrix::zeros(bn, bm, &field), OpCount::zero()) } else { linear_combination(&ta, bn, bm, &field) };
            let (cb, xb) = if tb.is_empty() { (Matrix::zeros(bm, bd, &field), OpCount::zero()) } else { linear_combination(&tb, bm, bd, &field) };
            enc += xa + xb;
            children.push(MatrixPair { lhs: ca, rhs: cb });
        }
    }
    trace.push(TraceRow { level: depth + 1, phase: "encode".into(), subproblems: problems.len(), count: enc.clone() });
    *count += enc;
    let child_products = solve_levels(children, &levels[1..], depth + 1, count, trace)?;
    let mut dec = OpCount::zero();
    let mut out = Vec::with_capacity(problems.len());
    for (bi, batch) in batches.iter().enumerate() {
        let kids = &child_products[bi * t..(bi + 1) * t];
        for hh in 0..batch.len() {
            let mut c = Matrix::zeros(s.n, s.d, &field);
            for (local, &g) in level.emb.copies[hh][2].iter().enumerate() {
                let terms: Vec<(Scalar, &Matrix)> = level.alg.dec_z.row(g).iter().map(|(l, coeff)| (coeff.clone(), &kids[*l])).collect();
                if terms.is_empty() {
                    continue;
                }
                let (blk, cnt) = linear_combination(&terms, bn, bd, &field);
                dec += cnt;
                c.set_block((local / base.d) * bn, (local % base.d) * bd, &blk);
            }
            out.push(c);
        }
    }
    trace.push(TraceRow { level: depth + 1, phase: "decode".into(), subproblems: problems.len(), count: dec.clone() });
    *count += dec;
    Ok(out)
}

/// Terms of one encoder row whose variables belong to copies present in
/// the batch.
fn gather<'b>(row: &[(usize, Scalar)], inv: &[Option<(usize, usize)>], blocks: &'b [Vec<Matrix>]) -> Vec<(Scalar, &'b Matrix)> {
    row.iter()
        .filter_map(|(g, c)| match inv[*g] {
            Some((h, local)) if h < blocks.len() => Some((c.clone(), &blocks[h][local])),
            _ => None,
        })
        .collect()
}

/// Multiplies up to H pairs of shape base^k together, using the sum
/// algorithm at every level. A partial batch leaves the missing copies as
/// zero inputs, which are skipped during encoding and never decoded.
pub fn multiply_simultaneous(sum: &SumAlgorithm, pairs: &[MatrixPair], k: u32) -> Result<BatchResult> {
    let base = sum.base();
    if pairs.is_empty() || pairs.len() > sum.h() {
        return Err(Error::ShapeMismatch(format!("{} pairs for {} copies", pairs.len(), sum.h())));
    }
    for p in pairs {
        check_power_shape(p, &base, k)?;
    }
    let levels: Vec<Level> = (0..k).map(|_| Level::new(&sum.combined, &sum.embedding)).collect::<Result<_>>()?;
    let mut count = OpCount::zero();
    let mut trace = Vec::new();
    let products = solve_levels(pairs.to_vec(), &levels, 0, &mut count, &mut trace)?;
    Ok(BatchResult { products, count, trace })
}

/// Smallest L with r^L ≥ H.
pub fn bootstrap_levels(r: usize, h: usize) -> u32 {
    let mut l = 0;
    let mut reach = 1usize;
    while reach < h {
        reach = reach.saturating_mul(r.max(2));
        l += 1;
    }
    l
}

/// ⌈log_r H⌉ levels of `small`, then the sum algorithm on batches of H.
pub fn the_algorithm(small: &BilinearAlgorithm, sum: &SumAlgorithm, p: &MatrixPair, k: u32) -> Result<MultiplyResult> {
    let base = small.shape.ok_or(Error::ShapeUnknown)?;
    if base != sum.base() {
        return Err(Error::ShapeMismatch(format!("bootstrap algorithm is {base}, sum algorithm embeds {}", sum.base())));
    }
    let l = bootstrap_levels(small.rank(), sum.h());
    if l > k {
        return Err(Error::KTooSmall { k, needed: l });
    }
    if sum.h() == 1 {
        return multiply_recursive(small, p, k, PlanOrder::Reversed);
    }
    check_power_shape(p, &base, k)?;
    let single = CopyEmbedding::identity(base);
    let mut levels = Vec::with_capacity(k as usize);
    for depth in 0..k {
        levels.push(if depth < l { Level::new(small, &single)? } else { Level::new(&sum.combined, &sum.embedding)? });
    }
    let mut count = OpCount::zero();
    let mut trace = Vec::new();
    let mut products = solve_levels(vec![p.clone()], &levels, 0, &mut count, &mut trace)?;
    Ok(MultiplyResult { product: products.remove(0), count, trace })
}

/// Pads a pair with zeros to the smallest base^k that contains it.
pub fn pad_to_power(p: &MatrixPair, base: MatMulShape) -> Result<(MatrixPair, u32)> {
    let s = p.shape();
    let fits = |b: usize, x: usize| b > 1 || x <= 1;
    if !(fits(base.n, s.n) && fits(base.m, s.m) && fits(base.d, s.d)) {
        return Err(Error::ShapeMismatch(format!("{s} cannot be padded to a power of {base}")));
    }
    let mut k = 0;
    while base.n.pow(k) < s.n || base.m.pow(k) < s.m || base.d.pow(k) < s.d {
        k += 1;
    }
    let big = base.pow(k);
    Ok((MatrixPair { lhs: p.lhs.padded(big.n, big.m), rhs: p.rhs.padded(big.m, big.d) }, k))
}

/// ⌈r/H⌉^s·H.
pub fn schonhage_rank_bound(h: u64, r: u64, s: u32) -> BigUint {
    assert!(h >= 1 && r >= 1 && s >= 1, "parameters must be positive");
    num_traits::pow(BigUint::from(r.div_ceil(h)), s as usize) * BigUint::from(h)
}

/// Cost formulas matching the engines.
pub mod bounds {
    use super::*;

    fn big(x: usize) -> BigUint {
        BigUint::from(x)
    }

    fn rat(x: &BigUint) -> BigRational {
        BigRational::from_integer(BigInt::from(x.clone()))
    }

    fn pow(x: usize, e: u32) -> BigUint {
        num_traits::pow(big(x), e as usize)
    }

    /// Linear-part cost of the three matrices of `alg`.
    pub fn linear_costs(alg: &BilinearAlgorithm) -> [BigUint; 3] {
        [alg.enc_x.naive_cost().linear(), alg.enc_y.naive_cost().linear(), alg.dec_z.naive_cost().linear()]
    }

    /// Σ_i T(M_i)·(R^k − |axis_i|^k)/(R − |axis_i|) + R^k.
    pub fn recursive(alg: &BilinearAlgorithm, k: u32) -> BigUint {
        let t = alg.rank();
        let [ax, ay, az] = alg.dims();
        let [tx, ty, tz] = linear_costs(alg);
        kron_power_bound(&tx, t, ax, k) + kron_power_bound(&ty, t, ay, k) + kron_power_bound(&tz, az, t, k) + pow(t, k)
    }

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct RectBounds {
        /// t ≥ 2n².
        pub hypothesis: bool,
        /// t^k + 4t^{k−1}/n^{2(k−1)}·T(t,n²,W) + 2t^{k−1}/n^{2(k−1)}·T(n²,t,W).
        pub stated: BigRational,
        /// t^k + Σ_i (T_x + T_y + T_z) at stage width t^{i−1}n^{2(k−i)}.
        /// Equals t^k + (Σ_i t^{i−1}n^{2(k−i)})/W·(T_x + T_y + T_z) when
        /// the backend cost is linear in the width.
        pub geometric: BigRational,
    }

    /// Bounds for [`multiply_via_rect`] with T(·) measured from `backend`
    /// at width W = n^{2(k−1)}.
    pub fn rect(alg: &BilinearAlgorithm, k: u32, backend: &dyn RectBackend) -> Result<RectBounds> {
        let shape = alg.shape.ok_or(Error::ShapeUnknown)?;
        let (t, n2) = (alg.rank(), shape.n * shape.n);
        let w = n2.pow(k - 1);
        let f = alg.field();
        let probe = |m: &CountedMatrix, width: usize| -> Result<BigUint> { Ok(backend.multiply(m, &Matrix::zeros(m.cols(), width, f))?.1.linear()) };
        let (tx, ty, tz) = (probe(&alg.enc_x, w)?, probe(&alg.enc_y, w)?, probe(&alg.dec_z, w)?);
        let tk = rat(&pow(t, k));
        let ratio = BigRational::new(BigInt::from(pow(t, k - 1)), BigInt::from(pow(n2, k - 1)));
        let t_enc = rat(&tx.clone().max(ty.clone()));
        let stated = &tk + &ratio * BigRational::from_integer(4.into()) * &t_enc + &ratio * BigRational::from_integer(2.into()) * rat(&tz);
        let mut stages = BigUint::zero();
        for i in 1..=k {
            let width = t.pow(i - 1) * n2.pow(k - i);
            stages += probe(&alg.enc_x, width)? + probe(&alg.enc_y, width)? + probe(&alg.dec_z, width)?;
        }
        let geometric = tk + rat(&stages);
        Ok(RectBounds { hypothesis: t >= 2 * n2, stated, geometric })
    }

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct SimultaneousBounds {
        /// t/H ≥ 2·max(nm, md, nd).
        pub hypothesis: bool,
        /// (t/H)^k·H + (t/H)^{k−1}·(Σ_j T_j + (ℓ−1)|C|).
        pub stated: BigRational,
        /// Level-by-level sum with batch counts rounded up and full-matrix costs.
        pub geometric: BigUint,
    }

    fn level_sum(costs: &[BigUint; 3], areas: [usize; 3], batches: &[BigUint], remaining: &[u32]) -> BigUint {
        batches
            .iter()
            .zip(remaining)
            .map(|(b, &rest)| b * (&costs[0] * pow(areas[0], rest) + &costs[1] * pow(areas[1], rest) + &costs[2] * pow(areas[2], rest)))
            .sum()
    }

    fn batch_counts(first: BigUint, t: usize, h: usize, levels: u32) -> Vec<BigUint> {
        let mut out = Vec::with_capacity(levels as usize);
        let mut b = first;
        for _ in 0..levels {
            out.push(b.clone());
            b = (b * big(t) + big(h) - 1u32) / big(h);
        }
        out
    }

    fn parts_cost(sum: &SumAlgorithm) -> BigUint {
        sum.parts.iter().map(|p| linear_costs(p).into_iter().sum::<BigUint>()).sum()
    }

    fn hypothesis(sum: &SumAlgorithm) -> bool {
        let s = sum.base();
        let area = (s.n * s.m).max(s.m * s.d).max(s.n * s.d);
        sum.rank() >= 2 * area * sum.h()
    }

    pub fn simultaneous(sum: &SumAlgorithm, k: u32) -> SimultaneousBounds {
        let (t, h, ell) = (sum.rank(), sum.h(), sum.ell());
        let s = sum.base();
        let c = sum.combined.dims()[2];
        let x = BigRational::new(BigInt::from(t), BigInt::from(h));
        let hr = BigRational::from_integer(BigInt::from(h));
        let extra = rat(&(parts_cost(sum) + big((ell - 1) * c)));
        let stated = num_traits::pow(x.clone(), k as usize) * hr + num_traits::pow(x, k as usize - 1) * extra;
        let batches = batch_counts(BigUint::one(), t, h, k);
        let remaining: Vec<u32> = (1..=k).map(|p| k - p).collect();
        let areas = [s.n * s.m, s.m * s.d, s.n * s.d];
        let last = batches.last().cloned().unwrap_or_else(BigUint::zero);
        let geometric = level_sum(&linear_costs(&sum.combined), areas, &batches, &remaining) + last * big(t);
        SimultaneousBounds { hypothesis: hypothesis(sum), stated, geometric }
    }

    #[derive(Clone, Debug, PartialEq, Eq)]
    pub struct AlgorithmBounds {
        pub levels: u32,
        pub batches: BigUint,
        pub hypothesis: bool,
        /// r·L·(|A|+|B|+|C|), the bootstrap term.
        pub bootstrap_stated: BigUint,
        /// Measured-model cost of the bootstrap levels.
        pub bootstrap_geometric: BigUint,
        /// Bootstrap term plus ⌈r^L/H⌉ times the simultaneous bound at k−L,
        /// with the (ℓ−1)|C| term inside the sum over parts.
        pub stated: BigRational,
        pub geometric: BigUint,
    }

    pub fn the_algorithm(small: &BilinearAlgorithm, sum: &SumAlgorithm, k: u32) -> Result<AlgorithmBounds> {
        let r = small.rank();
        let (t, h, ell) = (sum.rank(), sum.h(), sum.ell());
        let l = bootstrap_levels(r, h);
        if l > k {
            return Err(Error::KTooSmall { k, needed: l });
        }
        let s = sum.base();
        let areas = [s.n * s.m, s.m * s.d, s.n * s.d];
        let full: BigUint = areas.iter().map(|&a| pow(a, k)).sum();
        let bootstrap_stated = big(r) * big(l as usize) * full;
        let boot_batches: Vec<BigUint> = (0..l).map(|p| pow(r, p)).collect();
        let boot_remaining: Vec<u32> = (1..=l).map(|p| k - p).collect();
        let bootstrap_geometric = level_sum(&linear_costs(small), areas, &boot_batches, &boot_remaining);
        let first = (pow(r, l) + big(h) - 1u32) / big(h);
        let rest = k - l;
        let batches = batch_counts(first.clone(), t, h, rest);
        let remaining: Vec<u32> = (l + 1..=k).map(|p| k - p).collect();
        let leaves = match batches.last() {
            Some(b) => b * big(t),
            None => pow(r, l),
        };
        let geometric = &bootstrap_geometric + level_sum(&linear_costs(&sum.combined), areas, &batches, &remaining) + leaves;
        let x = BigRational::new(BigInt::from(t), BigInt::from(h));
        let c = sum.combined.dims()[2];
        let per_part: BigUint = sum.parts.iter().map(|p| linear_costs(p).into_iter().sum::<BigUint>() + big((ell - 1) * c)).sum();
        let sim = if rest == 0 {
            BigRational::from_integer(BigInt::from(h))
        } else {
            num_traits::pow(x.clone(), rest as usize) * BigRational::from_integer(BigInt::from(h))
                + num_traits::pow(x, rest as usize - 1) * rat(&per_part)
        };
        let stated = rat(&bootstrap_stated) + rat(&first) * sim;
        Ok(AlgorithmBounds { levels: l, batches: first, hypothesis: hypothesis(sum), bootstrap_stated, bootstrap_geometric, stated, geometric })
    }
}
