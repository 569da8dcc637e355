//! Sparse factorisation of F₂ matrices: dependency search, row peeling
//! X = X₁·X₂, and the straight-line-program counting bound.

use std::collections::{HashMap, HashSet};
use std::fmt;

use num_bigint::BigUint;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row bitset over F₂.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVec {
    len: usize,
    words: Vec<u64>,
}

impl BitVec {
    pub fn zeros(len: usize) -> Self {
        BitVec { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn get(&self, i: usize) -> bool {
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn set(&mut self, i: usize, b: bool) {
        let mask = 1u64 << (i % 64);
        if b {
            self.words[i / 64] |= mask;
        } else {
            self.words[i / 64] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitVec) {
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.len).filter(|&i| self.get(i))
    }
}

impl fmt::Display for BitVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for i in 0..self.len {
            f.write_str(if self.get(i) { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Dense F₂ matrix stored as row bitsets.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BitMatrix {
    rows: Vec<BitVec>,
    cols: usize,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix { rows: vec![BitVec::zeros(cols); rows], cols }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, true);
        }
        m
    }

    pub fn from_rows(rows: Vec<BitVec>, cols: usize) -> Result<Self> {
        if let Some(r) = rows.iter().find(|r| r.len() != cols) {
            return Err(Error::DimMismatch(format!("row of length {} in a matrix with {cols} columns", r.len())));
        }
        Ok(BitMatrix { rows, cols })
    }

    pub fn random<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let rows = (0..rows).map(|_| BitVec::from_bits(&(0..cols).map(|_| rng.gen::<bool>()).collect::<Vec<_>>())).collect();
        BitMatrix { rows, cols }
    }

    /// Parses lines of 0/1 characters; blank lines and `#` comments are skipped.
    pub fn parse_text(s: &str) -> Result<Self> {
        let mut rows = Vec::new();
        for (line_no, line) in s.lines().enumerate() {
            let line: String = line.split('#').next().unwrap_or("").chars().filter(|c| !c.is_whitespace() && *c != ',').collect();
            if line.is_empty() {
                continue;
            }
            let bits = line
                .chars()
                .map(|c| match c {
                    '0' => Ok(false),
                    '1' => Ok(true),
                    _ => Err(Error::Parse(format!("line {}: unexpected character {c:?}", line_no + 1))),
                })
                .collect::<Result<Vec<_>>>()?;
            if let Some(first) = rows.first().map(BitVec::len) {
                if first != bits.len() {
                    return Err(Error::Parse(format!("line {}: expected {first} columns, got {}", line_no + 1, bits.len())));
                }
            }
            rows.push(BitVec::from_bits(&bits));
        }
        let cols = rows.first().map(BitVec::len).ok_or_else(|| Error::Parse("empty matrix".into()))?;
        Ok(BitMatrix { rows, cols })
    }

    pub fn to_text(&self) -> String {
        self.rows.iter().map(|r| format!("{r}\n")).collect()
    }

    pub fn rows(&self) -> usize {
        self.rows.len()
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &BitVec {
        &self.rows[i]
    }

    pub fn row_vectors(&self) -> &[BitVec] {
        &self.rows
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.rows[i].get(j)
    }

    pub fn set(&mut self, i: usize, j: usize, b: bool) {
        self.rows[i].set(j, b)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(BitVec::count_ones).sum()
    }

    /// Additions needed to apply the matrix naively: Σ max(nnz(row) − 1, 0).
    pub fn naive_additions(&self) -> usize {
        self.rows.iter().map(|r| r.count_ones().saturating_sub(1)).sum()
    }

    pub fn mul(&self, other: &BitMatrix) -> Result<BitMatrix> {
        if self.cols != other.rows() {
            return Err(Error::DimMismatch(format!("{}×{} times {}×{}", self.rows(), self.cols, other.rows(), other.cols)));
        }
        let rows = self
            .rows
            .iter()
            .map(|r| {
                let mut acc = BitVec::zeros(other.cols);
                for j in r.ones() {
                    acc.xor_assign(&other.rows[j]);
                }
                acc
            })
            .collect();
        Ok(BitMatrix { rows, cols: other.cols })
    }

    fn delete_col(&mut self, c: usize) {
        for r in self.rows.iter_mut() {
            let bits: Vec<bool> = (0..self.cols).filter(|&j| j != c).map(|j| r.get(j)).collect();
            *r = BitVec::from_bits(&bits);
        }
        self.cols -= 1;
    }
}

/// JSON form: {"rows": t, "cols": n, "data": ["0101", …]}.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BitMatrixJson {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<String>,
}

impl From<&BitMatrix> for BitMatrixJson {
    fn from(m: &BitMatrix) -> Self {
        BitMatrixJson { rows: m.rows(), cols: m.cols(), data: m.rows.iter().map(|r| r.to_string()).collect() }
    }
}

impl TryFrom<BitMatrixJson> for BitMatrix {
    type Error = Error;

    fn try_from(j: BitMatrixJson) -> Result<Self> {
        if j.data.len() != j.rows {
            return Err(Error::Schema { path: "data".into(), message: format!("{} rows listed, {} declared", j.data.len(), j.rows) });
        }
        let rows = j
            .data
            .iter()
            .enumerate()
            .map(|(i, s)| {
                if s.len() != j.cols || !s.chars().all(|c| c == '0' || c == '1') {
                    return Err(Error::Schema { path: format!("data[{i}]"), message: format!("expected {} characters of 0/1", j.cols) });
                }
                Ok(BitVec::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>()))
            })
            .collect::<Result<Vec<_>>>()?;
        BitMatrix::from_rows(rows, j.cols)
    }
}

/// Budget of subsets enumerated by the bounded search on each half.
pub const SUBSET_BUDGET: u64 = 2_000_000;

fn binom_sum(n: usize, k: usize) -> u64 {
    let mut total = 0u64;
    let mut c = 1u64;
    for i in 0..=k.min(n) {
        total = total.saturating_add(c);
        c = c.saturating_mul((n - i) as u64) / (i as u64 + 1);
    }
    total
}

/// A nonempty set of row indices whose rows XOR to zero, or an empty
/// vector when none is found.
///
/// Without a bound, Gaussian elimination finds a dependency whenever the
/// rows are dependent. With a bound, subsets of size ≤ bound are searched
/// meet-in-the-middle when that fits `SUBSET_BUDGET`; otherwise the
/// elimination result is returned if it is small enough.
pub fn find_dependency(rows: &[BitVec], size_bound: Option<usize>) -> Vec<usize> {
    match size_bound {
        None => gaussian_dependency(rows),
        Some(b) => {
            if b == 0 {
                return Vec::new();
            }
            if binom_sum(rows.len(), b.div_ceil(2)) <= SUBSET_BUDGET {
                bounded_dependency(rows, b)
            } else {
                let d = gaussian_dependency(rows);
                if d.len() <= b { d } else { Vec::new() }
            }
        }
    }
}

fn gaussian_dependency(rows: &[BitVec]) -> Vec<usize> {
    let n = rows.len();
    // Each reduced row carries the set of original rows it combines.
    let mut basis: Vec<(usize, BitVec, BitVec)> = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let mut v = r.clone();
        let mut combo = BitVec::zeros(n);
        combo.set(i, true);
        for (pivot, bv, bc) in &basis {
            if v.get(*pivot) {
                v.xor_assign(bv);
                combo.xor_assign(bc);
            }
        }
        let first = v.ones().next();
        match first {
            Some(p) => basis.push((p, v, combo)),
            None => return combo.ones().collect(),
        }
    }
    Vec::new()
}

fn for_each_subset(n: usize, max: usize, mut f: impl FnMut(&[usize]) -> bool) {
    let mut cur = Vec::new();
    fn rec(start: usize, n: usize, max: usize, cur: &mut Vec<usize>, f: &mut dyn FnMut(&[usize]) -> bool) -> bool {
        if !cur.is_empty() && f(cur) {
            return true;
        }
        if cur.len() == max {
            return false;
        }
        for i in start..n {
            cur.push(i);
            if rec(i + 1, n, max, cur, f) {
                return true;
            }
            cur.pop();
        }
        false
    }
    rec(0, n, max, &mut cur, &mut f);
}

fn bounded_dependency(rows: &[BitVec], bound: usize) -> Vec<usize> {
    let n = rows.len();
    let xor_of = |s: &[usize]| {
        let mut acc = BitVec::zeros(rows[0].len());
        for &i in s {
            acc.xor_assign(&rows[i]);
        }
        acc
    };
    // Up to two stored subsets per XOR value so a query never only meets itself.
    let mut table: HashMap<BitVec, Vec<Vec<usize>>> = HashMap::new();
    let mut found = Vec::new();
    for_each_subset(n, bound.div_ceil(2), |s| {
        let v = xor_of(s);
        if v.is_zero() {
            found = s.to_vec();
            return true;
        }
        let slot = table.entry(v).or_default();
        if slot.len() < 2 {
            slot.push(s.to_vec());
        }
        false
    });
    if !found.is_empty() {
        return found;
    }
    for_each_subset(n, bound / 2, |s| {
        if let Some(stored) = table.get(&xor_of(s)) {
            if let Some(other) = stored.iter().find(|o| o.as_slice() != s) {
                let a: HashSet<usize> = s.iter().copied().collect();
                let b: HashSet<usize> = other.iter().copied().collect();
                let mut d: Vec<usize> = a.symmetric_difference(&b).copied().collect();
                d.sort_unstable();
                found = d;
                return true;
            }
        }
        false
    });
    found
}

/// Default size bound ⌈2·cols/log₂ cols⌉ (at least 2).
pub fn default_size_bound(cols: usize) -> usize {
    if cols < 2 {
        return 2;
    }
    ((2.0 * cols as f64) / (cols as f64).log2()).ceil().max(2.0) as usize
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FactorReport {
    pub t: usize,
    pub r: usize,
    pub peels: usize,
    pub size_bound: usize,
    pub nnz_x1: usize,
    /// Naive additions of X₁ divided by t − r; absent when no row was peeled.
    pub ratio: Option<f64>,
}

/// X = X₁·X₂ with X₁ = I initially; every peel removes one row of X₂ that
/// is the XOR of at most `size_bound − 1` other rows and rewrites X₁.
pub fn sparse_factor(x: &BitMatrix, size_bound: Option<usize>) -> (BitMatrix, BitMatrix, FactorReport) {
    let t = x.rows();
    let bound = size_bound.unwrap_or_else(|| default_size_bound(x.cols()));
    let mut u = BitMatrix::identity(t);
    let mut phi = x.clone();
    let mut peels = 0;
    loop {
        let dep = find_dependency(phi.row_vectors(), Some(bound));
        if dep.is_empty() {
            break;
        }
        let j = dep[dep.len() - 1];
        let mut others = BitVec::zeros(phi.rows());
        for &i in &dep[..dep.len() - 1] {
            others.set(i, true);
        }
        for r in u.rows.iter_mut() {
            if r.get(j) {
                r.xor_assign(&others);
                r.set(j, false);
            }
        }
        u.delete_col(j);
        phi.rows.remove(j);
        peels += 1;
    }
    let r = phi.rows();
    let ratio = (t > r).then(|| u.naive_additions() as f64 / (t - r) as f64);
    let report = FactorReport { t, r, peels, size_bound: bound, nnz_x1: u.nnz(), ratio };
    (u, phi, report)
}

/// (r+c)^t · Π_{i=1}^{c} C(r+i−1, 2).
pub fn count_bound(t: u32, r: u64, c: u64) -> BigUint {
    let mut acc = BigUint::from(r + c).pow(t);
    for i in 1..=c {
        let m = r + i - 1;
        acc *= BigUint::from(m * m.saturating_sub(1) / 2);
    }
    acc
}

/// Distinct t×r matrices output by straight-line programs of exactly c
/// additions over r inputs, by exhaustive enumeration.
pub fn enumerate_slp_matrices(t: usize, r: usize, c: usize) -> usize {
    fn rec(values: &mut Vec<u64>, steps: usize, t: usize, out: &mut HashSet<Vec<u64>>) {
        if steps == 0 {
            let n = values.len();
            let mut pick = vec![0usize; t];
            loop {
                out.insert(pick.iter().map(|&i| values[i]).collect());
                let mut pos = 0;
                while pos < t {
                    pick[pos] += 1;
                    if pick[pos] < n {
                        break;
                    }
                    pick[pos] = 0;
                    pos += 1;
                }
                if pos == t {
                    return;
                }
            }
        }
        let n = values.len();
        for a in 0..n {
            for b in a + 1..n {
                values.push(values[a] ^ values[b]);
                rec(values, steps - 1, t, out);
                values.pop();
            }
        }
    }
    let mut values: Vec<u64> = (0..r).map(|i| 1u64 << i).collect();
    let mut out = HashSet::new();
    rec(&mut values, c, t, &mut out);
    out.len()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn bv(s: &str) -> BitVec {
        BitVec::from_bits(&s.chars().map(|c| c == '1').collect::<Vec<_>>())
    }

    #[test]
    fn dependencies() {
        assert_eq!(find_dependency(&[bv("101"), bv("101")], None), vec![0, 1]);
        assert_eq!(find_dependency(&[bv("101"), bv("101")], Some(2)), vec![0, 1]);
        assert!(find_dependency(&[bv("100"), bv("010"), bv("001")], None).is_empty());
        assert!(find_dependency(&[bv("100"), bv("010"), bv("001")], Some(3)).is_empty());
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let m = BitMatrix::random(17, 4, &mut rng);
            let d = find_dependency(m.row_vectors(), None);
            assert!(!d.is_empty());
            let mut acc = BitVec::zeros(4);
            d.iter().for_each(|&i| acc.xor_assign(m.row(i)));
            assert!(acc.is_zero());
        }
    }

    #[test]
    fn bounded_search_respects_bound() {
        let rows = [bv("1000"), bv("0100"), bv("0010"), bv("0001"), bv("1111")];
        assert!(find_dependency(&rows, Some(4)).is_empty());
        assert_eq!(find_dependency(&rows, Some(5)), vec![0, 1, 2, 3, 4]);
    }

    #[test]
    fn duplicate_row_peel() {
        let x = BitMatrix::parse_text("110\n011\n110\n").unwrap();
        let (u, phi, rep) = sparse_factor(&x, Some(2));
        assert_eq!(rep.r, 2);
        assert_eq!(u.mul(&phi).unwrap(), x);
        assert_eq!(u.nnz(), 3);
    }

    #[test]
    fn factorisations_are_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = BitMatrix::random(40, 9, &mut rng);
        let (u, phi, _) = sparse_factor(&x, None);
        assert_eq!(u.mul(&phi).unwrap(), x);
        let x = BitMatrix::random(20, 4, &mut rng);
        let (u, phi, rep) = sparse_factor(&x, None);
        assert_eq!(u.mul(&phi).unwrap(), x);
        assert!(rep.peels >= 4);
    }

    #[test]
    fn counting_bound() {
        assert_eq!(count_bound(3, 2, 0), BigUint::from(8u32));
        assert_eq!(count_bound(2, 3, 1), BigUint::from(48u32));
        for t in 1..=2 {
            for r in 1..=3 {
                for c in 0..=2 {
                    assert!(BigUint::from(enumerate_slp_matrices(t, r as usize, c)) <= count_bound(t as u32, r, c as u64));
                }
            }
        }
    }

    #[test]
    fn text_and_json() {
        let x = BitMatrix::parse_text("# comment\n1 0 1\n0,1,1\n").unwrap();
        assert_eq!(x.to_text(), "101\n011\n");
        let j = BitMatrixJson::from(&x);
        assert_eq!(BitMatrix::try_from(j).unwrap(), x);
        assert!(BitMatrix::parse_text("10\n1\n").is_err());
    }
}
