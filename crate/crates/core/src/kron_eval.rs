//! Counted evaluation of matrices and their Kronecker powers.
//!
//! The cost model is the naive row-wise one: a row with `r` nonzeros costs
//! `r − 1` additions, and every coefficient outside {0, 1, −1} costs one
//! multiplication.

use std::fmt;
use std::ops::{Add, AddAssign};
use std::sync::Arc;

use num_bigint::BigUint;
use num_traits::{ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::{SerializeStruct, Serializer};
use serde::{Deserialize, Serialize};

use crate::bilinear::CountedMatrix;
use crate::error::{Error, Result};
use crate::field_arith::Scalar;

/// Additions, constant multiplications, and elementwise (bilinear) products.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash)]
pub struct OpCount {
    pub additions: BigUint,
    pub multiplications: BigUint,
    pub products: BigUint,
}

impl OpCount {
    pub fn new(additions: u64, multiplications: u64, products: u64) -> Self {
        OpCount { additions: additions.into(), multiplications: multiplications.into(), products: products.into() }
    }

    pub fn zero() -> Self {
        OpCount::default()
    }

    pub fn total(&self) -> BigUint {
        &self.additions + &self.multiplications + &self.products
    }

    /// Additions plus constant multiplications: the cost T(M) of a linear map.
    pub fn linear(&self) -> BigUint {
        &self.additions + &self.multiplications
    }

    pub fn scaled(&self, factor: &BigUint) -> OpCount {
        OpCount {
            additions: &self.additions * factor,
            multiplications: &self.multiplications * factor,
            products: &self.products * factor,
        }
    }
}

impl Add for OpCount {
    type Output = OpCount;
    fn add(mut self, rhs: OpCount) -> OpCount {
        self += rhs;
        self
    }
}

impl AddAssign for OpCount {
    fn add_assign(&mut self, rhs: OpCount) {
        self.additions += rhs.additions;
        self.multiplications += rhs.multiplications;
        self.products += rhs.products;
    }
}

impl<'a> AddAssign<&'a OpCount> for OpCount {
    fn add_assign(&mut self, rhs: &'a OpCount) {
        self.additions += &rhs.additions;
        self.multiplications += &rhs.multiplications;
        self.products += &rhs.products;
    }
}

impl std::iter::Sum for OpCount {
    fn sum<I: Iterator<Item = OpCount>>(iter: I) -> OpCount {
        iter.fold(OpCount::zero(), |a, b| a + b)
    }
}

impl fmt::Display for OpCount {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} adds, {} mults, {} prods", self.additions, self.multiplications, self.products)
    }
}

fn big_to_json(v: &BigUint) -> serde_json::Value {
    match v.to_u64() {
        Some(x) => serde_json::Value::from(x),
        None => serde_json::Value::from(v.to_string()),
    }
}

impl Serialize for OpCount {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("OpCount", 3)?;
        st.serialize_field("adds", &big_to_json(&self.additions))?;
        st.serialize_field("mults", &big_to_json(&self.multiplications))?;
        st.serialize_field("prods", &big_to_json(&self.products))?;
        st.end()
    }
}

impl<'de> Deserialize<'de> for OpCount {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(deny_unknown_fields)]
        struct Raw {
            adds: serde_json::Value,
            mults: serde_json::Value,
            prods: serde_json::Value,
        }
        fn big<E: de::Error>(v: &serde_json::Value) -> std::result::Result<BigUint, E> {
            match v {
                serde_json::Value::Number(n) => {
                    n.as_u64().map(BigUint::from).ok_or_else(|| E::custom("count must be a nonnegative integer"))
                }
                serde_json::Value::String(s) => s.parse().map_err(|_| E::custom("bad big integer")),
                _ => Err(E::custom("count must be a number or string")),
            }
        }
        let raw = Raw::deserialize(d)?;
        Ok(OpCount { additions: big(&raw.adds)?, multiplications: big(&raw.mults)?, products: big(&raw.prods)? })
    }
}

/// M·v together with its naive cost.
pub fn matvec_counted(m: &CountedMatrix, v: &[Scalar]) -> Result<(Vec<Scalar>, OpCount)> {
    if v.len() != m.cols() {
        return Err(Error::DimMismatch(format!("vector of length {} for {} columns", v.len(), m.cols())));
    }
    let out = (0..m.rows())
        .map(|r| {
            let mut acc: Option<Scalar> = None;
            for (c, coeff) in m.row(r) {
                let term = if coeff.is_one() {
                    v[*c].clone()
                } else if coeff.is_minus_one() {
                    -&v[*c]
                } else {
                    coeff * &v[*c]
                };
                acc = Some(match acc {
                    None => term,
                    Some(a) => a + term,
                });
            }
            acc.unwrap_or_else(|| m.field().zero())
        })
        .collect();
    Ok((out, m.naive_cost()))
}

/// One `I_left ⊗ M ⊗ I_right` stage.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Stage {
    pub left: usize,
    pub matrix: Arc<CountedMatrix>,
    pub right: usize,
}

impl Stage {
    pub fn input_len(&self) -> usize {
        self.left * self.matrix.cols() * self.right
    }

    pub fn output_len(&self) -> usize {
        self.left * self.matrix.rows() * self.right
    }

    /// Naive cost: `left·right` applications of the core matrix.
    pub fn cost(&self) -> OpCount {
        self.matrix.naive_cost().scaled(&BigUint::from(self.left * self.right))
    }
}

/// Order in which the k positions of M^{⊗k} are transformed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum PlanOrder {
    /// Position 1 first: stage p is `I_{s^{p−1}} ⊗ M ⊗ I_{t^{k−p}}`.
    #[default]
    Forward,
    /// Position k first: stage p is `I_{t^{p−1}} ⊗ M ⊗ I_{s^{k−p}}`, applied for p = k..1.
    Reversed,
}

/// A factorisation of M^{⊗k} into identity-padded stages, applied in order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct EvalPlan {
    pub stages: Vec<Stage>,
    pub power: u32,
}

impl EvalPlan {
    pub fn input_len(&self) -> usize {
        self.stages.first().map(|s| s.input_len()).unwrap_or(0)
    }

    pub fn output_len(&self) -> usize {
        self.stages.last().map(|s| s.output_len()).unwrap_or(0)
    }

    /// Predicted cost, the sum of the stage costs.
    pub fn predicted_cost(&self) -> OpCount {
        self.stages.iter().map(Stage::cost).sum()
    }
}

/// Stages computing M^{⊗k} (k ≥ 1) for an s×t matrix M.
pub fn kron_plan(m: &CountedMatrix, k: u32, order: PlanOrder) -> EvalPlan {
    assert!(k >= 1, "power must be at least 1");
    let m = Arc::new(m.clone());
    let (s, t) = (m.rows(), m.cols());
    let stages = match order {
        PlanOrder::Forward => (1..=k)
            .map(|p| Stage { left: s.pow(p - 1), matrix: m.clone(), right: t.pow(k - p) })
            .collect(),
        PlanOrder::Reversed => (1..=k)
            .rev()
            .map(|p| Stage { left: t.pow(p - 1), matrix: m.clone(), right: s.pow(k - p) })
            .collect(),
    };
    EvalPlan { stages, power: k }
}

/// Applies one stage.
pub fn apply_stage(stage: &Stage, v: &[Scalar]) -> Result<(Vec<Scalar>, OpCount)> {
    if v.len() != stage.input_len() {
        return Err(Error::DimMismatch(format!("stage expects {} inputs, got {}", stage.input_len(), v.len())));
    }
    let (rows, cols, right) = (stage.matrix.rows(), stage.matrix.cols(), stage.right);
    let mut out = Vec::with_capacity(stage.output_len());
    let mut count = OpCount::zero();
    let mut slice = vec![stage.matrix.field().zero(); cols];
    let mut result = vec![Vec::new(); right];
    for l in 0..stage.left {
        for (r, res) in result.iter_mut().enumerate() {
            for (c, slot) in slice.iter_mut().enumerate() {
                *slot = v[l * cols * right + c * right + r].clone();
            }
            let (y, cnt) = matvec_counted(&stage.matrix, &slice)?;
            *res = y;
            count += cnt;
        }
        for row in 0..rows {
            for res in result.iter() {
                out.push(res[row].clone());
            }
        }
    }
    Ok((out, count))
}

/// Applies every stage of the plan in order.
pub fn apply_plan(plan: &EvalPlan, v: &[Scalar]) -> Result<(Vec<Scalar>, OpCount)> {
    let mut cur = v.to_vec();
    let mut count = OpCount::zero();
    for stage in &plan.stages {
        let (next, c) = apply_stage(stage, &cur)?;
        cur = next;
        count += c;
    }
    Ok((cur, count))
}

/// The Kronecker-power bound T(M)·(s^k − t^k)/(s − t), or T(M)·k·t^{k−1}
/// when s = t, with T(M) the linear cost of M.
pub fn kron_power_bound(cost: &BigUint, s: usize, t: usize, k: u32) -> BigUint {
    let (s, t) = (BigUint::from(s), BigUint::from(t));
    let geometric = if s == t {
        BigUint::from(k) * num_traits::pow(t, k as usize - 1)
    } else {
        let (hi, lo) = if s > t { (s, t) } else { (t, s) };
        (num_traits::pow(hi.clone(), k as usize) - num_traits::pow(lo.clone(), k as usize)) / (hi - lo)
    };
    cost * geometric
}

/// A stage viewed as one rectangular product `matrix · rhs`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RectStage {
    pub matrix: Arc<CountedMatrix>,
    /// Dense `cols(M) × (left·right)` matrix, row-major.
    pub rhs: Vec<Vec<Scalar>>,
    pub left: usize,
    pub right: usize,
}

/// Reshapes the stage input so that the stage becomes `M · V` with
/// V of shape cols(M) × (left·right); column `l·right + r` of V holds the
/// slice that the (l, r) copy of M acts on.
pub fn stage_as_rectangular(stage: &Stage, v: &[Scalar]) -> Result<RectStage> {
    if v.len() != stage.input_len() {
        return Err(Error::ShapeMismatch(format!("stage expects {} inputs, got {}", stage.input_len(), v.len())));
    }
    let (cols, right) = (stage.matrix.cols(), stage.right);
    let width = stage.left * right;
    let rhs = (0..cols)
        .map(|c| (0..width).map(|w| v[(w / right) * cols * right + c * right + w % right].clone()).collect())
        .collect();
    Ok(RectStage { matrix: stage.matrix.clone(), rhs, left: stage.left, right })
}

/// Flattens the product `M · V` (rows(M) × (left·right)) back into the
/// stage output order.
pub fn flatten_rectangular(product: &[Vec<Scalar>], left: usize, right: usize) -> Vec<Scalar> {
    let rows = product.len();
    let mut out = Vec::with_capacity(rows * left * right);
    for l in 0..left {
        for row in product {
            out.extend_from_slice(&row[l * right..(l + 1) * right]);
        }
    }
    debug_assert_eq!(out.len(), rows * left * right);
    out
}

/// Bound on T(M) from its transpose: naive(Mᵀ) + cols − rows. Only valid
/// when M has no zero row or column.
pub fn transpose_cost(m: &CountedMatrix) -> Result<OpCount> {
    if m.has_zero_row() || m.has_zero_col() {
        return Err(Error::HypothesisViolated("matrix has a zero row or column".into()));
    }
    let t = m.transpose().naive_cost();
    let additions = t.additions + BigUint::from(m.cols()) - BigUint::from(m.rows());
    Ok(OpCount { additions, multiplications: t.multiplications, products: BigUint::zero() })
}
