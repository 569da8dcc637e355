//! Coppersmith–Winograd tensors, their border decomposition, border-to-rank
//! interpolation, and the laser zero-out that carves disjoint matmul blocks
//! out of a tensor power.
//!
//! Variable i of CW_q has type 0 (i = 0), 1 (1 ≤ i ≤ q) or 2 (i = q+1).
//! Powers use Kronecker indexing with coordinate 0 most significant.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bilinear::{BilinearAlgorithm, CountedMatrix};
use crate::error::{Error, Result};
use crate::field_arith::{Field, LaurentPoly, Scalar};
use crate::mm_engine::CopyEmbedding;
use crate::tensor_core::{MatMulShape, Tensor};

fn cw_type(q: usize, i: usize) -> u8 {
    match i {
        0 => 0,
        i if i <= q => 1,
        _ => 2,
    }
}

/// CW_q on (q+2)³ variables with 3q+3 unit entries, labelled by type.
pub fn cw_tensor(q: usize, field: &Field) -> Tensor {
    assert!(q >= 1, "q must be positive");
    let n = q + 2;
    let one = field.one();
    let mut entries = Vec::with_capacity(3 * q + 3);
    for i in 1..=q {
        entries.push(([0, i, i], one.clone()));
        entries.push(([i, 0, i], one.clone()));
        entries.push(([i, i, 0], one.clone()));
    }
    entries.push(([0, 0, q + 1], one.clone()));
    entries.push(([0, q + 1, 0], one.clone()));
    entries.push(([q + 1, 0, 0], one));
    let t = Tensor::from_entries([n, n, n], field, entries).expect("indices in range");
    let labels: Vec<Vec<u8>> = (0..n).map(|i| vec![cw_type(q, i)]).collect();
    t.with_labels([labels.clone(), labels.clone(), labels]).expect("label lengths match")
}

/// One rank-one term u ⊗ v ⊗ w with Laurent-polynomial entries.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BorderTerm {
    pub u: Vec<LaurentPoly>,
    pub v: Vec<LaurentPoly>,
    pub w: Vec<LaurentPoly>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BorderDecomposition {
    pub q: usize,
    pub field: Field,
    pub terms: Vec<BorderTerm>,
}

/// The q+2 term border decomposition of CW_q. Scalar prefactors are folded
/// into the first vector of each term.
pub fn cw_border_decomp(q: usize, field: &Field) -> BorderDecomposition {
    assert!(q >= 1, "q must be positive");
    let n = q + 2;
    let zero = || LaurentPoly::zero(field);
    let mono = |c: i64, e: i64| LaurentPoly::monomial(field.from_i64(c), e);
    let mut terms = Vec::with_capacity(q + 2);
    for i in 1..=q {
        let base = |scale: i64| {
            let mut v = vec![zero(); n];
            v[0] = mono(1, scale);
            v[i] = mono(1, scale + 1);
            v
        };
        terms.push(BorderTerm { u: base(-2), v: base(0), w: base(0) });
    }
    let spread = |lead: LaurentPoly, rest: LaurentPoly| {
        let mut v = vec![zero(); n];
        v[0] = lead;
        for slot in v.iter_mut().take(q + 1).skip(1) {
            *slot = rest.clone();
        }
        v
    };
    terms.push(BorderTerm { u: spread(mono(-1, -3), mono(-1, -1)), v: spread(mono(1, 0), mono(1, 2)), w: spread(mono(1, 0), mono(1, 2)) });
    let tail = |lead: LaurentPoly, last: LaurentPoly| {
        let mut v = vec![zero(); n];
        v[0] = lead;
        v[q + 1] = last;
        v
    };
    let prefactor = &mono(1, -3) + &mono(-(q as i64), -2);
    let u_last = &mono(1, 0) + &mono(-(q as i64), 1);
    terms.push(BorderTerm { u: tail(prefactor, u_last), v: tail(mono(1, 0), mono(1, 3)), w: tail(mono(1, 0), mono(1, 3)) });
    BorderDecomposition { q, field: field.clone(), terms }
}

impl BorderDecomposition {
    pub fn rank(&self) -> usize {
        self.terms.len()
    }

    pub fn dims(&self) -> [usize; 3] {
        self.terms.first().map(|t| [t.u.len(), t.v.len(), t.w.len()]).unwrap_or([0, 0, 0])
    }

    /// Σ u⊗v⊗w as a sparse map from index triples to Laurent polynomials.
    pub fn expand(&self) -> Result<BTreeMap<[usize; 3], LaurentPoly>> {
        let mut out: BTreeMap<[usize; 3], LaurentPoly> = BTreeMap::new();
        for t in &self.terms {
            for (i, u) in t.u.iter().enumerate().filter(|(_, p)| !p.is_zero()) {
                for (j, v) in t.v.iter().enumerate().filter(|(_, p)| !p.is_zero()) {
                    let uv = u.checked_mul(v)?;
                    for (k, w) in t.w.iter().enumerate().filter(|(_, p)| !p.is_zero()) {
                        let term = uv.checked_mul(w)?;
                        let slot = out.entry([i, j, k]).or_insert_with(|| LaurentPoly::zero(&self.field));
                        *slot = slot.checked_add(&term)?;
                    }
                }
            }
        }
        out.retain(|_, p| !p.is_zero());
        Ok(out)
    }

    /// Largest λ exponent in the expansion: the interpolation must cancel
    /// degrees 1..=degree_d·k for the k-th power.
    pub fn degree_d(&self) -> Result<usize> {
        let e = self.expand()?;
        Ok(e.values().filter_map(LaurentPoly::max_degree).max().unwrap_or(0).max(0) as usize)
    }

    /// Coefficient tensor of λ^e in the expansion.
    pub fn coefficient(&self, e: i64) -> Result<Tensor> {
        let mut t = Tensor::zero(self.dims(), &self.field);
        for (idx, p) in self.expand()? {
            let c = p.coeff(e);
            if !c.is_zero() {
                t.add_entry(idx, c)?;
            }
        }
        Ok(t)
    }
}

/// True iff the expansion has no negative λ powers and its λ⁰ part is `t`.
pub fn verify_border(decomp: &BorderDecomposition, t: &Tensor) -> Result<bool> {
    if decomp.dims() != t.dims() {
        return Err(Error::DimMismatch(format!("decomposition dims {:?} vs tensor dims {:?}", decomp.dims(), t.dims())));
    }
    let expansion = decomp.expand()?;
    if expansion.values().any(|p| p.min_degree().is_some_and(|d| d < 0)) {
        return Ok(false);
    }
    Ok(decomp.coefficient(0)? == t.clone().without_labels())
}

/// The rank-(q+2) algorithm obtained by evaluating every entry at λ0.
pub fn specialize(decomp: &BorderDecomposition, lambda: &Scalar) -> Result<BilinearAlgorithm> {
    if lambda.is_zero() {
        return Err(Error::ZeroPoint);
    }
    let [na, nb, nc] = decomp.dims();
    let r = decomp.rank();
    let eval_rows = |pick: &dyn Fn(&BorderTerm) -> &Vec<LaurentPoly>| -> Result<Vec<(usize, usize, Scalar)>> {
        let mut out = Vec::new();
        for (l, t) in decomp.terms.iter().enumerate() {
            for (i, p) in pick(t).iter().enumerate() {
                if !p.is_zero() {
                    out.push((l, i, p.eval(lambda)?));
                }
            }
        }
        Ok(out)
    };
    let f = &decomp.field;
    let enc_x = CountedMatrix::from_entries(r, na, f, eval_rows(&|t| &t.u)?)?;
    let enc_y = CountedMatrix::from_entries(r, nb, f, eval_rows(&|t| &t.v)?)?;
    let dec_z = CountedMatrix::from_entries(r, nc, f, eval_rows(&|t| &t.w)?)?.transpose();
    BilinearAlgorithm::new(enc_x, enc_y, dec_z)
}

/// Weights w with Σ_i w_i·λ_i^0 = 1 and Σ_i w_i·λ_i^e = 0 for 1 ≤ e < len.
/// At least `kill_degrees + 1` points are required.
pub fn interpolation_weights(points: &[Scalar], kill_degrees: usize) -> Result<Vec<Scalar>> {
    let n = points.len();
    if n < kill_degrees + 1 {
        return Err(Error::PreconditionViolated(format!("{n} points cannot cancel {kill_degrees} degrees")));
    }
    let field = points[0].field();
    if points.iter().any(Scalar::is_zero) {
        return Err(Error::ZeroPoint);
    }
    // Row e: λ_i^e; augmented column: [e == 0].
    let mut rows: Vec<Vec<Scalar>> = (0..n)
        .map(|e| {
            let mut row: Vec<Scalar> = points.iter().map(|p| p.pow(e as u128)).collect();
            row.push(if e == 0 { field.one() } else { field.zero() });
            row
        })
        .collect();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !rows[r][col].is_zero()).ok_or(Error::SingularSystem)?;
        rows.swap(col, pivot);
        let inv = rows[col][col].inv()?;
        for x in rows[col].iter_mut() {
            *x = &*x * &inv;
        }
        for r in 0..n {
            if r != col && !rows[r][col].is_zero() {
                let factor = rows[r][col].clone();
                let pivot_row = rows[col].clone();
                for (x, p) in rows[r].iter_mut().zip(&pivot_row) {
                    *x = &*x - &(&factor * p);
                }
            }
        }
    }
    Ok(rows.into_iter().map(|mut r| r.pop().expect("augmented")).collect())
}

/// Weighted specialised powers whose weighted sum is CW_q^{⊗k}.
#[derive(Clone, Debug)]
pub struct Interpolation {
    pub field: Field,
    pub points: Vec<Scalar>,
    pub weights: Vec<Scalar>,
    /// Specialisation at each point, raised to the k-th Kronecker power.
    pub algorithms: Vec<BilinearAlgorithm>,
    pub k: u32,
    pub degree_d: usize,
}

impl Interpolation {
    pub fn ell(&self) -> usize {
        self.algorithms.len()
    }

    /// Each algorithm with its decoder scaled by its weight; concatenated
    /// they compute CW_q^{⊗k}.
    pub fn weighted_parts(&self) -> Vec<BilinearAlgorithm> {
        self.algorithms
            .iter()
            .zip(&self.weights)
            .map(|(a, w)| BilinearAlgorithm { dec_z: a.dec_z.scale(w), shape: None, ..a.clone() })
            .collect()
    }
}

fn first_nonzero_elements(field: &Field, count: usize) -> Result<Vec<Scalar>> {
    let mut out = Vec::with_capacity(count);
    let mut idx = 1u128;
    while out.len() < count {
        if field.order().is_some_and(|o| idx >= o) {
            return Err(Error::NoSuitableRoot(format!("{field} has fewer than {count} nonzero elements")));
        }
        let e = field.element(idx);
        if !e.is_zero() {
            out.push(e);
        }
        idx += 1;
    }
    Ok(out)
}

/// Smallest field containing `field` with at least `count` nonzero
/// elements; rationals and large prime fields are returned unchanged.
pub fn interpolation_field(field: &Field, count: usize) -> Result<Field> {
    match field {
        Field::Rational => Ok(Field::Rational),
        Field::Prime(p) => {
            let mut degree = 1usize;
            while (*p as u128).pow(degree as u32) - 1 < count as u128 {
                degree += 1;
            }
            if degree == 1 {
                Ok(field.clone())
            } else {
                Field::extension(*p, degree)
            }
        }
        Field::Extension(e) => {
            if e.order() - 1 >= count as u128 {
                Ok(field.clone())
            } else {
                Field::extension(e.p(), e.degree() * ((count as f64).log(e.order() as f64).ceil() as usize + 1))
            }
        }
    }
}

/// Specialises the decomposition at d·k+1 points and solves for weights
/// so that Σ w_i·A(λ_i)^{⊗k} = CW_q^{⊗k}. Over a finite field with too few
/// points, an extension is built first.
pub fn rank_terms_from_border(q: usize, k: u32, field: &Field) -> Result<Interpolation> {
    let d = cw_border_decomp(q, &Field::Rational).degree_d()?;
    let count = d * k as usize + 1;
    let target = interpolation_field(field, count)?;
    let decomp = cw_border_decomp(q, &target);
    let points = match target {
        Field::Rational => (1..=count as i64).map(|i| target.from_i64(i)).collect(),
        _ => first_nonzero_elements(&target, count)?,
    };
    let weights = interpolation_weights(&points, count - 1)?;
    let algorithms = points
        .iter()
        .map(|p| {
            let a = specialize(&decomp, p)?;
            let mut acc = a.clone();
            for _ in 1..k {
                acc = acc.tensor_product(&a)?;
            }
            Ok(acc)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Interpolation { field: target, points, weights, algorithms, k, degree_d: d })
}

/// AP-free residues modulo M.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SalemSpencerSet {
    pub modulus: u64,
    pub elements: Vec<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SalemSpencerMethod {
    Exhaustive,
    Behrend,
}

pub const EXHAUSTIVE_LIMIT: u64 = 30;

impl SalemSpencerSet {
    pub fn contains(&self, x: u64) -> bool {
        self.elements.binary_search(&x).is_ok()
    }

    /// No x, y, z with x + y ≡ 2z (mod M) other than x = y = z.
    pub fn is_valid(&self) -> bool {
        is_ap_free(self.modulus, &self.elements)
    }
}

fn is_ap_free(m: u64, elems: &[u64]) -> bool {
    let set: HashSet<u64> = elems.iter().copied().collect();
    for (ix, &x) in elems.iter().enumerate() {
        for &y in &elems[ix..] {
            let s = (x + y) % m;
            let candidates: Vec<u64> = if m % 2 == 1 {
                vec![s * m.div_ceil(2) % m]
            } else if s % 2 == 0 {
                vec![s / 2, s / 2 + m / 2]
            } else {
                vec![]
            };
            for z in candidates {
                if set.contains(&z) && !(x == y && y == z) {
                    return false;
                }
            }
        }
    }
    true
}

pub fn salem_spencer(m: u64, method: SalemSpencerMethod) -> Result<SalemSpencerSet> {
    if m == 0 {
        return Err(Error::PreconditionViolated("modulus must be positive".into()));
    }
    let elements = match method {
        SalemSpencerMethod::Exhaustive => {
            if m > EXHAUSTIVE_LIMIT {
                return Err(Error::TooLargeForExhaustive { modulus: m, limit: EXHAUSTIVE_LIMIT });
            }
            let mut best = Vec::new();
            let mut cur = Vec::new();
            max_ap_free(m, 0, &mut cur, &mut best);
            best
        }
        SalemSpencerMethod::Behrend => behrend(m),
    };
    Ok(SalemSpencerSet { modulus: m, elements })
}

fn max_ap_free(m: u64, next: u64, cur: &mut Vec<u64>, best: &mut Vec<u64>) {
    if cur.len() > best.len() {
        *best = cur.clone();
    }
    for x in next..m {
        if cur.len() as u64 + (m - x) <= best.len() as u64 {
            return;
        }
        cur.push(x);
        if is_ap_free(m, cur) {
            max_ap_free(m, x + 1, cur, best);
        }
        cur.pop();
    }
}

/// Digit vectors of fixed squared norm with digits below base/2, read as
/// integers ≤ ⌊(M−1)/2⌋. Integer AP-freeness carries over modulo M because
/// every sum stays below M.
fn behrend(m: u64) -> Vec<u64> {
    let limit = (m - 1) / 2;
    let mut best: Vec<u64> = vec![0];
    for dim in 1..=8u32 {
        let base = ((limit + 1) as f64).powf(1.0 / dim as f64).ceil() as u64 + 1;
        let base = base.max(2);
        let half = base.div_ceil(2);
        let mut classes: HashMap<u64, Vec<u64>> = HashMap::new();
        let total = half.checked_pow(dim).unwrap_or(u64::MAX);
        if total > 50_000_000 {
            continue;
        }
        for idx in 0..total {
            let (mut v, mut r, mut norm, mut place) = (0u64, idx, 0u64, 1u64);
            for _ in 0..dim {
                let dgt = r % half;
                r /= half;
                v += dgt * place;
                norm += dgt * dgt;
                place = place.saturating_mul(base);
            }
            if v <= limit {
                classes.entry(norm).or_default().push(v);
            }
        }
        if let Some(c) = classes.into_values().max_by_key(Vec::len) {
            if c.len() > best.len() {
                best = c;
            }
        }
    }
    best.sort_unstable();
    best
}

/// Exponent counts of the six coordinate patterns of a CW power.
///
/// Pattern types (x, y, z) and their counts: (1,0,1) → aN, (1,1,0) → bN,
/// (0,1,1) → cN, (0,0,2) → L₁, (0,2,0) → L₂, (2,0,0) → L₃.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TypeDistribution {
    pub a: BigRational,
    pub b: BigRational,
    pub c: BigRational,
    pub n: u64,
    pub an: u64,
    pub bn: u64,
    pub cn: u64,
    pub l1: u64,
    pub l2: u64,
    pub l3: u64,
    pub p: u64,
    pub q: u64,
}

impl TypeDistribution {
    /// Integer pattern counts with N = 1.
    pub fn from_counts(q: u64, an: u64, bn: u64, cn: u64, l1: u64, l2: u64, l3: u64) -> Self {
        let r = |x: u64| BigRational::from_integer(BigInt::from(x));
        TypeDistribution { a: r(an), b: r(bn), c: r(cn), n: 1, an, bn, cn, l1, l2, l3, p: an + bn + cn + l1 + l2 + l3, q }
    }

    /// Parses "q:aN,bN,cN,L1,L2,L3".
    pub fn parse(s: &str) -> Result<Self> {
        let (q, rest) = s.split_once(':').ok_or_else(|| Error::Parse(format!("expected q:aN,bN,cN,L1,L2,L3, got {s:?}")))?;
        let q: u64 = q.trim().parse().map_err(|_| Error::Parse(format!("bad q in {s:?}")))?;
        let v: Vec<u64> = rest.split(',').map(|x| x.trim().parse::<u64>()).collect::<std::result::Result<_, _>>().map_err(|_| Error::Parse(format!("bad counts in {s:?}")))?;
        if v.len() != 6 {
            return Err(Error::Parse(format!("expected six counts, got {}", v.len())));
        }
        Ok(TypeDistribution::from_counts(q, v[0], v[1], v[2], v[3], v[4], v[5]))
    }

    /// Per-coordinate patterns in fixed order with their counts.
    pub fn patterns(&self) -> [([u8; 3], u64); 6] {
        [([1, 0, 1], self.an), ([1, 1, 0], self.bn), ([0, 1, 1], self.cn), ([0, 0, 2], self.l1), ([0, 2, 0], self.l2), ([2, 0, 0], self.l3)]
    }

    /// Required (#0, #1, #2) counts of the type vector on each axis.
    pub fn marginals(&self) -> [[u64; 3]; 3] {
        let mut m = [[0u64; 3]; 3];
        for (pat, cnt) in self.patterns() {
            for axis in 0..3 {
                m[axis][pat[axis] as usize] += cnt;
            }
        }
        m
    }

    pub fn shape(&self) -> MatMulShape {
        let q = self.q as usize;
        MatMulShape::new(q.pow(self.an as u32), q.pow(self.bn as u32), q.pow(self.cn as u32))
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "a": self.a.to_string(), "b": self.b.to_string(), "c": self.c.to_string(),
            "N": self.n, "aN": self.an, "bN": self.bn, "cN": self.cn,
            "L1": self.l1, "L2": self.l2, "L3": self.l3, "P": self.p, "q": self.q,
        })
    }
}

pub fn multinomial(parts: &[u64]) -> BigUint {
    let mut acc = BigUint::one();
    let mut total = 0u64;
    for &p in parts {
        for i in 1..=p {
            total += 1;
            acc = acc * BigUint::from(total) / BigUint::from(i);
        }
    }
    acc
}

/// Block count and per-block sharing counts of a laser zero-out.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaserCounts {
    pub blocks: BigUint,
    /// Triples sharing one X block.
    pub share_x: BigUint,
    pub share_y: BigUint,
    pub share_z: BigUint,
}

/// Closed-form multinomial counts.
pub fn laser_counts(d: &TypeDistribution) -> LaserCounts {
    LaserCounts {
        blocks: multinomial(&[d.l1, d.l2, d.l3, d.an, d.bn, d.cn]),
        share_x: multinomial(&[d.an, d.bn]) * multinomial(&[d.cn, d.l1, d.l2]),
        share_y: multinomial(&[d.bn, d.cn]) * multinomial(&[d.an, d.l1, d.l3]),
        share_z: multinomial(&[d.an, d.cn]) * multinomial(&[d.bn, d.l2, d.l3]),
    }
}

/// Visits every triple (I, J, K) of type vectors whose marginals match
/// the distribution and whose coordinates satisfy I_j + J_j + K_j = 2.
pub fn enumerate_blocks(d: &TypeDistribution, mut visit: impl FnMut(&[u8], &[u8], &[u8])) {
    let p = d.p as usize;
    let mut remaining = d.marginals();
    let mut cur = [vec![0u8; p], vec![0u8; p], vec![0u8; p]];
    fn rec(pos: usize, p: usize, rem: &mut [[u64; 3]; 3], cur: &mut [Vec<u8>; 3], visit: &mut dyn FnMut(&[u8], &[u8], &[u8])) {
        if pos == p {
            visit(&cur[0], &cur[1], &cur[2]);
            return;
        }
        for x in 0..3u8 {
            if rem[0][x as usize] == 0 {
                continue;
            }
            for y in 0..3u8.saturating_sub(x) {
                let z = 2 - x - y;
                if rem[1][y as usize] == 0 || rem[2][z as usize] == 0 {
                    continue;
                }
                rem[0][x as usize] -= 1;
                rem[1][y as usize] -= 1;
                rem[2][z as usize] -= 1;
                cur[0][pos] = x;
                cur[1][pos] = y;
                cur[2][pos] = z;
                rec(pos + 1, p, rem, cur, visit);
                rem[0][x as usize] += 1;
                rem[1][y as usize] += 1;
                rem[2][z as usize] += 1;
            }
        }
    }
    rec(0, p, &mut remaining, &mut cur, &mut visit);
}

fn encode_type(v: &[u8]) -> u64 {
    v.iter().fold(0u64, |acc, &x| acc * 3 + x as u64)
}

/// Counts measured by enumeration: the block total and the distinct
/// sharing counts observed on each axis.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EnumeratedCounts {
    pub blocks: u64,
    pub share: [Vec<u64>; 3],
}

pub fn enumerate_counts(d: &TypeDistribution) -> EnumeratedCounts {
    let mut tallies: [HashMap<u64, u64>; 3] = Default::default();
    let mut blocks = 0u64;
    enumerate_blocks(d, |i, j, k| {
        blocks += 1;
        for (axis, v) in [i, j, k].into_iter().enumerate() {
            *tallies[axis].entry(encode_type(v)).or_insert(0) += 1;
        }
    });
    let share = tallies.map(|t| {
        let mut vals: Vec<u64> = t.into_values().collect::<HashSet<_>>().into_iter().collect();
        vals.sort_unstable();
        vals
    });
    EnumeratedCounts { blocks, share }
}

/// Entry limit for materialising zero-outs.
pub const MATERIALISE_LIMIT: u128 = 2_000_000;

struct BlockIndexer {
    q: usize,
    p: usize,
}

impl BlockIndexer {
    /// Global indices of the three axes for one block, in local matmul order.
    fn maps(&self, types: [&[u8]; 3]) -> [Vec<usize>; 3] {
        let (q, p) = (self.q, self.p);
        let coords = |pat: [u8; 3]| -> Vec<usize> { (0..p).filter(|&j| [types[0][j], types[1][j], types[2][j]] == pat).collect() };
        let (ci, cj, ck) = (coords([1, 0, 1]), coords([1, 1, 0]), coords([0, 1, 1]));
        let (n, m, d) = (q.pow(ci.len() as u32), q.pow(cj.len() as u32), q.pow(ck.len() as u32));
        // Base index: type-0 coordinates contribute 0, type-2 contribute q+1.
        let base = |axis: usize| -> Vec<usize> { types[axis].iter().map(|&t| if t == 2 { q + 1 } else { 0 }).collect() };
        let place = |digits: &mut Vec<usize>, coords: &[usize], mut value: usize| {
            for &c in coords.iter().rev() {
                digits[c] = value % q + 1;
                value /= q;
            }
        };
        let flatten = |digits: &[usize]| digits.iter().fold(0usize, |acc, &x| acc * (q + 2) + x);
        let mut x = vec![0; n * m];
        let mut y = vec![0; m * d];
        let mut z = vec![0; n * d];
        for i in 0..n {
            for jj in 0..m {
                let mut g = base(0);
                place(&mut g, &ci, i);
                place(&mut g, &cj, jj);
                x[i * m + jj] = flatten(&g);
            }
            for k in 0..d {
                let mut g = base(2);
                place(&mut g, &ci, i);
                place(&mut g, &ck, k);
                z[i * d + k] = flatten(&g);
            }
        }
        for jj in 0..m {
            for k in 0..d {
                let mut g = base(1);
                place(&mut g, &cj, jj);
                place(&mut g, &ck, k);
                y[jj * d + k] = flatten(&g);
            }
        }
        [x, y, z]
    }
}

/// CW_q^{⊗P} with every variable whose type vector misses the marginals
/// zeroed, materialised entry by entry.
pub fn laser_zero_out(d: &TypeDistribution, field: &Field) -> Result<Tensor> {
    let q = d.q as usize;
    let counts = laser_counts(d);
    let per_block = BigUint::from(q).pow((d.an + d.bn + d.cn) as u32);
    let total = (&counts.blocks * per_block).to_u128().unwrap_or(u128::MAX);
    let dim = (q as u128 + 2).checked_pow(d.p as u32).unwrap_or(u128::MAX);
    if total > MATERIALISE_LIMIT || dim > MATERIALISE_LIMIT {
        return Err(Error::TooLarge(format!("{total} entries on axes of size {dim}")));
    }
    let dim = dim as usize;
    let mut t = Tensor::zero([dim; 3], field);
    let idx = BlockIndexer { q, p: d.p as usize };
    let mut err = None;
    enumerate_blocks(d, |i, j, k| {
        let maps = idx.maps([i, j, k]);
        let shape = block_shape(q, [i, j, k]);
        for (e, c) in Tensor::matmul(shape, field).entries() {
            if let Err(x) = t.add_entry([maps[0][e[0]], maps[1][e[1]], maps[2][e[2]]], c.clone()) {
                err = Some(x);
            }
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(t),
    }
}

fn block_shape(q: usize, types: [&[u8]; 3]) -> MatMulShape {
    let count = |pat: [u8; 3]| (0..types[0].len()).filter(|&j| [types[0][j], types[1][j], types[2][j]] == pat).count() as u32;
    MatMulShape::new(q.pow(count([1, 0, 1])), q.pow(count([1, 1, 0])), q.pow(count([0, 1, 1])))
}

/// One retained block and where its variables live in CW_q^{⊗P}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaserBlock {
    pub types: [Vec<u8>; 3],
    pub shape: MatMulShape,
    /// Global indices of the block variables in local matmul order.
    pub x: Vec<usize>,
    pub y: Vec<usize>,
    pub z: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LaserOutput {
    pub modulus: u64,
    pub weights: Vec<u64>,
    pub blocks: Vec<LaserBlock>,
    pub pruning_log: Vec<String>,
}

impl LaserOutput {
    pub fn h(&self) -> usize {
        self.blocks.len()
    }

    /// The retained blocks as copy embeddings (all blocks share one shape).
    pub fn embedding(&self) -> Result<CopyEmbedding> {
        let base = self.blocks.first().map(|b| b.shape).ok_or_else(|| Error::WitnessInvalid("no retained blocks".into()))?;
        Ok(CopyEmbedding { base, copies: self.blocks.iter().map(|b| [b.x.clone(), b.y.clone(), b.z.clone()]).collect() })
    }
}

fn hash_values(w: &[u64], m: u64, i: &[u8], j: &[u8], k: &[u8]) -> [u64; 3] {
    let inv2 = m.div_ceil(2);
    let (mut hx, mut hy, mut hz) = (w[0] % m, w[0] % m, (2 * w[0]) % m);
    for (pos, wj) in w[1..].iter().enumerate() {
        hx = (hx + wj * i[pos] as u64) % m;
        hy = (hy + wj * j[pos] as u64) % m;
        hz = (hz + wj * (2 - k[pos] as u64)) % m;
    }
    [hx, hy, hz * inv2 % m]
}

/// Hashes blocks into Z_M, keeps those landing in the AP-free set, and
/// greedily prunes the surviving triples until no two share a block.
pub fn laser_hash_degenerate(d: &TypeDistribution, set: &SalemSpencerSet, weights: Option<Vec<u64>>, seed: u64) -> Result<LaserOutput> {
    let m = set.modulus;
    if m % 2 == 0 {
        return Err(Error::EvenModulus(m));
    }
    let p = d.p as usize;
    let weights: Vec<u64> = match weights {
        Some(w) if w.len() == p + 1 => w.into_iter().map(|x| x % m).collect(),
        Some(w) => return Err(Error::DimMismatch(format!("{} weights for P = {p}", w.len()))),
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            (0..=p).map(|_| rng.gen_range(0..m)).collect()
        }
    };
    let mut survivors: Vec<(u64, [Vec<u8>; 3])> = Vec::new();
    let mut log = Vec::new();
    let mut total = 0usize;
    enumerate_blocks(d, |i, j, k| {
        total += 1;
        let h = hash_values(&weights, m, i, j, k);
        if h.iter().all(|&x| set.contains(x)) {
            survivors.push((h[0], [i.to_vec(), j.to_vec(), k.to_vec()]));
        }
    });
    log.push(format!("{total} blocks, {} survive hashing", survivors.len()));
    survivors.sort();
    let mut dead: [HashSet<u64>; 3] = Default::default();
    let codes: Vec<[u64; 3]> = survivors.iter().map(|(_, t)| [encode_type(&t[0]), encode_type(&t[1]), encode_type(&t[2])]).collect();
    let mut by_block: [HashMap<u64, Vec<usize>>; 3] = Default::default();
    for (idx, c) in codes.iter().enumerate() {
        for axis in 0..3 {
            by_block[axis].entry(c[axis]).or_default().push(idx);
        }
    }
    let alive = |c: &[u64; 3], dead: &[HashSet<u64>; 3]| (0..3).all(|a| !dead[a].contains(&c[a]));
    let mut retained = Vec::new();
    for (idx, c) in codes.iter().enumerate() {
        if !alive(c, &dead) {
            continue;
        }
        retained.push(idx);
        for axis in 0..3 {
            for &other in &by_block[axis][&c[axis]] {
                if other == idx || !alive(&codes[other], &dead) {
                    continue;
                }
                let oc = codes[other];
                let kill = (0..3).find(|&a| oc[a] != c[a]).expect("distinct triples differ on some axis");
                dead[kill].insert(oc[kill]);
                log.push(format!("zero axis-{kill} block {} of triple {other}", oc[kill]));
            }
        }
    }
    log.push(format!("retained {} blocks", retained.len()));
    let indexer = BlockIndexer { q: d.q as usize, p };
    let blocks = retained
        .into_iter()
        .map(|idx| {
            let t = &survivors[idx].1;
            let [x, y, z] = indexer.maps([&t[0], &t[1], &t[2]]);
            LaserBlock { types: t.clone(), shape: block_shape(d.q as usize, [&t[0], &t[1], &t[2]]), x, y, z }
        })
        .collect();
    Ok(LaserOutput { modulus: m, weights, blocks, pruning_log: log })
}

/// Checks every retained block against the matmul tensor and the direct
/// sum of blocks against the zero-out of CW_q^{⊗P}.
pub fn verify_laser_output(d: &TypeDistribution, out: &LaserOutput, field: &Field) -> Result<bool> {
    let q = d.q as usize;
    let dim = (q as u128 + 2).pow(d.p as u32);
    if dim.pow(3) > 64 * MATERIALISE_LIMIT {
        return Err(Error::TooLarge(format!("axes of size {dim}")));
    }
    let power = cw_tensor(q, field).without_labels().kron_power(d.p as u32)?;
    for b in &out.blocks {
        let single = CopyEmbedding { base: b.shape, copies: vec![[b.x.clone(), b.y.clone(), b.z.clone()]] };
        if single.validate(&power).is_err() {
            return Ok(false);
        }
    }
    if out.blocks.is_empty() {
        return Ok(true);
    }
    if out.blocks.iter().any(|b| b.shape != out.blocks[0].shape) {
        return Ok(false);
    }
    Ok(out.embedding()?.validate(&power).is_ok())
}

/// q^{qα}·(P choose qα, α, α) ≥ (q+2)^P / P², compared exactly.
pub fn pchoose_check(p: u64, q: u64, alpha: u64) -> Result<bool> {
    if p != (q + 2) * alpha {
        return Err(Error::PreconditionViolated(format!("P = {p} is not (q+2)·α = {}", (q + 2) * alpha)));
    }
    let lhs = BigUint::from(q).pow((q * alpha) as u32) * multinomial(&[q * alpha, alpha, alpha]) * BigUint::from(p * p);
    Ok(lhs >= BigUint::from(q + 2).pow(p as u32))
}

/// Distribution for a = 1, b = 1+δ, c = k with q = ⌊(b+c)(1−δ/2)⌋,
/// α = P/(q_exact+2), L₁ = L₃ = ⌊δα/4⌋, N = (1−δ/2)α, pattern counts
/// floored, and L₂ = P minus everything else.
pub fn josh_flight_params(delta: &BigRational, k: u64, p: u64) -> Result<TypeDistribution> {
    let zero = BigRational::zero();
    let one = BigRational::one();
    if *delta <= zero || *delta >= one {
        return Err(Error::PreconditionViolated(format!("δ = {delta} outside (0, 1)")));
    }
    if *delta >= BigRational::new(1.into(), 2.into()) {
        log::warn!("δ = {delta} is outside (0, 1/2); the dominance argument assumes δ < 1/2");
    }
    let r = |x: u64| BigRational::from_integer(BigInt::from(x));
    let half_delta = delta / r(2);
    let (a, b, c) = (one.clone(), &one + delta, r(k));
    let q_exact = (&b + &c) * (&one - &half_delta);
    let alpha = r(p) / (&q_exact + r(2));
    let n_real = (&one - &half_delta) * &alpha;
    let floor = |x: BigRational| -> u64 { x.floor().to_integer().to_u64().unwrap_or(0) };
    let (an, bn, cn) = (floor(&a * &n_real), floor(&b * &n_real), floor(&c * &n_real));
    let l13 = floor(delta * &alpha / r(4));
    let q = floor(q_exact.clone());
    let used = an + bn + cn + 2 * l13;
    if an == 0 || bn == 0 || cn == 0 || l13 == 0 || q == 0 || used >= p {
        return Err(Error::InfeasibleRounding(format!("P = {p} gives aN={an}, bN={bn}, cN={cn}, L1=L3={l13}, q={q}")));
    }
    Ok(TypeDistribution { a, b, c, n: floor(n_real), an, bn, cn, l1: l13, l2: p - used, l3: l13, p, q })
}

/// (a+b+c)N + L₁ + L₂ + L₃ and (q+2)α before rounding, as exact rationals.
pub fn josh_flight_identity(delta: &BigRational, k: u64, p: u64) -> (BigRational, BigRational) {
    let one = BigRational::one();
    let r = |x: u64| BigRational::from_integer(BigInt::from(x));
    let q = (&one + delta + r(k)) * (&one - delta / r(2));
    let alpha = r(p) / (&q + r(2));
    let n = (&one - delta / r(2)) * &alpha;
    let l13 = delta * &alpha / r(4);
    let lhs = (r(2) + delta + r(k)) * n + &l13 + &alpha + &l13;
    (lhs, (q + r(2)) * alpha)
}

/// (Q_a, Q_b, Q_c): the Y, Z and X sharing counts.
pub fn dominance(d: &TypeDistribution) -> (BigUint, BigUint, BigUint) {
    let c = laser_counts(d);
    (c.share_y, c.share_z, c.share_x)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn q() -> Field {
        Field::Rational
    }

    #[test]
    fn cw_entries() {
        assert_eq!(cw_tensor(1, &q()).nnz(), 6);
        assert_eq!(cw_tensor(2, &q()).nnz(), 9);
        assert!(cw_tensor(3, &q()).entries().all(|(_, c)| c.is_one()));
    }

    /// Expands the product of the three sums term by term without the
    /// decomposition's own expansion routine.
    fn brute_expand(decomp: &BorderDecomposition, lambda: &Scalar) -> Tensor {
        let n = decomp.dims()[0];
        let mut t = Tensor::zero([n, n, n], &decomp.field);
        for term in &decomp.terms {
            for i in 0..n {
                for j in 0..n {
                    for k in 0..n {
                        let c = &(&term.u[i].eval(lambda).unwrap() * &term.v[j].eval(lambda).unwrap()) * &term.w[k].eval(lambda).unwrap();
                        t.add_entry([i, j, k], c).unwrap();
                    }
                }
            }
        }
        t
    }

    #[test]
    fn border_identity() {
        for qq in 1..=4 {
            let d = cw_border_decomp(qq, &q());
            assert_eq!(d.rank(), qq + 2);
            assert!(verify_border(&d, &cw_tensor(qq, &q())).unwrap());
            assert_eq!(d.degree_d().unwrap(), 7);
        }
        let mut d = cw_border_decomp(1, &q());
        d.terms.pop();
        assert!(!verify_border(&d, &cw_tensor(1, &q())).unwrap());
    }

    #[test]
    fn last_prefactor() {
        let d = cw_border_decomp(1, &q());
        let u0 = &d.terms[2].u[0];
        assert_eq!(u0.coeff(-3), q().one());
        assert_eq!(u0.coeff(-2), q().from_i64(-1));
    }

    #[test]
    fn specialisation() {
        let d = cw_border_decomp(2, &q());
        for lam in [Scalar::rational(1, 1), Scalar::rational(-2, 3)] {
            let a = specialize(&d, &lam).unwrap();
            assert_eq!(a.rank(), 4);
            assert_eq!(a.computed_tensor().unwrap(), brute_expand(&d, &lam));
        }
        let one = specialize(&d, &Scalar::rational(1, 1)).unwrap().computed_tensor().unwrap();
        let two = specialize(&d, &Scalar::rational(2, 1)).unwrap().computed_tensor().unwrap();
        let mut diff = Tensor::zero(one.dims(), &q());
        for e in 1..=7 {
            let coeff = d.coefficient(e).unwrap();
            diff = diff.add(&coeff.scale(&q().from_i64(2i64.pow(e as u32) - 1))).unwrap();
        }
        assert_eq!(two.add(&one.scale(&q().from_i64(-1))).unwrap(), diff);
        assert_eq!(specialize(&d, &q().zero()).unwrap_err(), Error::ZeroPoint);
    }

    #[test]
    fn weights() {
        let pts = [q().from_i64(1), q().from_i64(2)];
        assert_eq!(interpolation_weights(&pts, 1).unwrap(), vec![q().from_i64(2), q().from_i64(-1)]);
        assert_eq!(interpolation_weights(&pts[..1], 0).unwrap(), vec![q().one()]);
        assert_eq!(interpolation_weights(&[pts[0].clone(), pts[0].clone()], 1).unwrap_err(), Error::SingularSystem);
        let f = Field::prime(101).unwrap();
        let roots = crate::field_arith::roots_of_unity(5, &f).unwrap();
        let w = interpolation_weights(&roots, 4).unwrap();
        let fifth = f.from_i64(5).inv().unwrap();
        assert!(w.iter().all(|x| *x == fifth));
    }

    fn check_interpolation(qq: usize, k: u32, field: &Field) -> Interpolation {
        let res = rank_terms_from_border(qq, k, field).unwrap();
        assert_eq!(res.ell(), res.degree_d * k as usize + 1);
        let mut sum = Tensor::zero(cw_tensor(qq, &res.field).dims().map(|n| n.pow(k)), &res.field);
        for (w, p) in res.weights.iter().zip(&res.points) {
            let a = specialize(&cw_border_decomp(qq, &res.field), p).unwrap();
            sum = sum.add(&a.computed_tensor().unwrap().kron_power(k).unwrap().scale(w)).unwrap();
        }
        assert_eq!(sum, cw_tensor(qq, &res.field).without_labels().kron_power(k).unwrap());
        res
    }

    #[test]
    fn interpolation_over_rationals() {
        check_interpolation(1, 1, &q());
        check_interpolation(1, 2, &q());
    }

    #[test]
    fn interpolation_over_extension() {
        let res = check_interpolation(1, 1, &Field::prime(5).unwrap());
        assert!(matches!(res.field, Field::Extension(_)));
        assert_eq!(res.field.order(), Some(25));
    }

    #[test]
    fn salem_spencer_sets() {
        assert_eq!(salem_spencer(1, SalemSpencerMethod::Exhaustive).unwrap().elements, vec![0]);
        let s5 = salem_spencer(5, SalemSpencerMethod::Exhaustive).unwrap();
        assert!(s5.is_valid());
        // Brute force over all subsets of Z_5.
        let best = (0u32..32).filter(|mask| is_ap_free(5, &(0..5).filter(|i| mask >> i & 1 == 1).collect::<Vec<u64>>())).map(u32::count_ones).max().unwrap();
        assert_eq!(s5.elements.len() as u32, best);
        for m in [7, 101, 1001, 9999] {
            assert!(salem_spencer(m, SalemSpencerMethod::Behrend).unwrap().is_valid());
        }
        assert!(!SalemSpencerSet { modulus: 7, elements: vec![0, 1, 2] }.is_valid());
        assert!(matches!(salem_spencer(31, SalemSpencerMethod::Exhaustive), Err(Error::TooLargeForExhaustive { .. })));
    }

    #[test]
    fn laser_counts_match_enumeration() {
        let d = TypeDistribution::from_counts(1, 1, 1, 2, 1, 0, 1);
        let c = laser_counts(&d);
        let e = enumerate_counts(&d);
        assert_eq!(BigUint::from(e.blocks), c.blocks);
        assert_eq!(e.share[0], vec![c.share_x.to_u64().unwrap()]);
        assert_eq!(e.share[1], vec![c.share_y.to_u64().unwrap()]);
        assert_eq!(e.share[2], vec![c.share_z.to_u64().unwrap()]);
    }

    #[test]
    fn zero_out_matches_tensor_power() {
        let d = TypeDistribution::from_counts(1, 1, 1, 1, 0, 0, 0);
        let direct = laser_zero_out(&d, &q()).unwrap();
        let power = cw_tensor(1, &q()).kron_power(3).unwrap();
        let labels = power.labels().unwrap();
        let marg = d.marginals();
        let ok = |axis: usize, l: &Vec<u8>| (0..3).all(|t| l.iter().filter(|&&x| x == t as u8).count() as u64 == marg[axis][t]);
        let w = crate::tensor_core::Witness { keep: [0, 1, 2].map(|a| labels[a].iter().map(|l| ok(a, l)).collect()) };
        assert_eq!(direct, power.zero_out(&w).unwrap().without_labels());
        assert_eq!(BigUint::from(direct.nnz()), laser_counts(&d).blocks);

        let d2 = TypeDistribution::from_counts(2, 1, 0, 1, 1, 0, 0);
        let direct = laser_zero_out(&d2, &q()).unwrap();
        // Six blocks of shape <2,1,2>, four entries each.
        assert_eq!(direct.nnz(), 6 * 4);
    }

    #[test]
    fn tiny_laser_instance() {
        let d = TypeDistribution::from_counts(1, 1, 1, 1, 0, 0, 0);
        let m = 2 * laser_counts(&d).share_y.to_u64().unwrap() + 1;
        let set = salem_spencer(m, SalemSpencerMethod::Exhaustive).unwrap();
        for seed in 0..5 {
            let out = laser_hash_degenerate(&d, &set, None, seed).unwrap();
            assert!(verify_laser_output(&d, &out, &q()).unwrap());
        }
        let zero = laser_hash_degenerate(&d, &SalemSpencerSet { modulus: 5, elements: vec![0] }, Some(vec![0; 4]), 0).unwrap();
        assert!(verify_laser_output(&d, &zero, &q()).unwrap());
        assert_eq!(laser_hash_degenerate(&d, &SalemSpencerSet { modulus: 4, elements: vec![0] }, None, 0).unwrap_err(), Error::EvenModulus(4));
    }

    #[test]
    fn pchoose() {
        assert!(pchoose_check(3, 1, 1).unwrap());
        assert!(pchoose_check(8, 2, 2).unwrap());
        for qq in 1..=6 {
            for a in 1..=4 {
                assert!(pchoose_check((qq + 2) * a, qq, a).unwrap());
            }
        }
        assert!(matches!(pchoose_check(7, 1, 2), Err(Error::PreconditionViolated(_))));
    }

    #[test]
    fn josh_flight() {
        let delta = BigRational::new(1.into(), 4.into());
        let (lhs, rhs) = josh_flight_identity(&delta, 10, 1000);
        assert_eq!(lhs, rhs);
        assert_eq!(rhs, BigRational::from_integer(1000.into()));
        assert!(matches!(josh_flight_params(&delta, 10, 20), Err(Error::InfeasibleRounding(_))));
        let p = (20..2000).find(|&p| josh_flight_params(&delta, 10, p).is_ok()).unwrap();
        let d = josh_flight_params(&delta, 10, p).unwrap();
        assert_eq!(d.an + d.bn + d.cn + d.l1 + d.l2 + d.l3, d.p);
    }

    #[test]
    fn dominance_fails_at_sample_point() {
        let delta = BigRational::new(1.into(), 4.into());
        let p = (20..2000).find(|&p| josh_flight_params(&delta, 10, p).is_ok()).unwrap();
        for p in [p, 1000, 5000] {
            let (qa, qb, qc) = dominance(&josh_flight_params(&delta, 10, p).unwrap());
            assert!(qa < qb && qb < qc, "P = {p}");
        }
    }
}
