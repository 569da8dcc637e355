//! Group-algebra tensors of finite abelian groups and their DFT-based
//! bilinear algorithms.
//!
//! Elements of Z_{n₁} × … × Z_{n_r} are indexed in mixed radix with the
//! first factor most significant.

use num_bigint::BigUint;
use num_integer::Integer;
use serde::{Deserialize, Serialize};

use crate::bilinear::{BilinearAlgorithm, CountedMatrix};
use crate::error::{Error, Result};
use crate::field_arith::{Field, Scalar};
use crate::tensor_core::Tensor;

/// Largest group order accepted by `group_tensor`.
pub const GROUP_ORDER_LIMIT: usize = 64;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AbelianGroup {
    factors: Vec<u64>,
}

impl AbelianGroup {
    pub fn new(factors: Vec<u64>) -> Result<Self> {
        if factors.iter().any(|&n| n == 0) {
            return Err(Error::PreconditionViolated("cyclic factors must be positive".into()));
        }
        Ok(AbelianGroup { factors: if factors.is_empty() { vec![1] } else { factors } })
    }

    pub fn cyclic(n: u64) -> Result<Self> {
        Self::new(vec![n])
    }

    pub fn factors(&self) -> &[u64] {
        &self.factors
    }

    pub fn order(&self) -> usize {
        self.factors.iter().product::<u64>() as usize
    }

    /// Least common multiple of the factors.
    pub fn exponent(&self) -> u64 {
        self.factors.iter().fold(1, |acc, &n| acc.lcm(&n))
    }

    pub fn coords(&self, g: usize) -> Vec<u64> {
        let mut out = vec![0; self.factors.len()];
        let mut r = g as u64;
        for (slot, &n) in out.iter_mut().zip(&self.factors).rev() {
            *slot = r % n;
            r /= n;
        }
        out
    }

    pub fn index(&self, coords: &[u64]) -> usize {
        coords.iter().zip(&self.factors).fold(0u64, |acc, (&c, &n)| acc * n + c % n) as usize
    }

    pub fn add(&self, g: usize, h: usize) -> usize {
        let (a, b) = (self.coords(g), self.coords(h));
        self.index(&a.iter().zip(&b).map(|(x, y)| x + y).collect::<Vec<_>>())
    }

    pub fn neg(&self, g: usize) -> usize {
        let a = self.coords(g);
        self.index(&a.iter().zip(&self.factors).map(|(x, n)| (n - x) % n).collect::<Vec<_>>())
    }

    /// Irreducible representation dimensions: all 1 for abelian groups.
    pub fn irrep_dims(&self) -> Vec<u64> {
        vec![1; self.order()]
    }

    /// Smallest prime p ≡ 1 mod exponent, so that F_p has the needed roots.
    pub fn suitable_prime(&self) -> u64 {
        let e = self.exponent();
        (1..).map(|i| i * e + 1).find(|&p| p > 2 && is_prime(p)).expect("Dirichlet")
    }
}

fn is_prime(n: u64) -> bool {
    n >= 2 && (2..).take_while(|d| d * d <= n).all(|d| n % d != 0)
}

/// T_G with x_g·y_h·z_k present iff k = g + h.
pub fn group_tensor(g: &AbelianGroup, field: &Field) -> Result<Tensor> {
    let n = g.order();
    if n > GROUP_ORDER_LIMIT {
        return Err(Error::TooLarge(format!("group of order {n}")));
    }
    let one = field.one();
    let entries = (0..n).flat_map(|a| (0..n).map(move |b| (a, b))).map(|(a, b)| ([a, b, g.add(a, b)], one.clone()));
    Tensor::from_entries([n, n, n], field, entries)
}

/// The symmetric convention x_g·y_h·z_k with g + h + k = 0.
pub fn to_symmetric(t: &Tensor, g: &AbelianGroup) -> Result<Tensor> {
    let n = g.order();
    let z: Vec<usize> = (0..n).map(|k| g.neg(k)).collect();
    t.relabel(&[(0..n).collect(), (0..n).collect(), z], [n, n, n])
}

fn root_of_order(field: &Field, order: u64) -> Result<Scalar> {
    match (field, order) {
        (_, 1) => Ok(field.one()),
        (Field::Rational, 2) => Ok(field.from_i64(-1)),
        (Field::Rational, _) => Err(Error::NoSuitableRoot(format!("the rationals contain no root of unity of order {order}"))),
        _ => field.primitive_root_of_unity(order).map_err(|e| Error::NoSuitableRoot(e.to_string())),
    }
}

/// Character table F[χ][g] = Π_i ω_i^{χ_i·g_i}, with ω_i of order n_i taken
/// as a power of the smallest primitive root of order exponent(G).
pub fn dft_matrix(g: &AbelianGroup, field: &Field) -> Result<CountedMatrix> {
    let root = root_of_order(field, g.exponent())?;
    dft_matrix_with_root(g, &root)
}

/// As `dft_matrix` with a caller-chosen primitive root of order exponent(G).
pub fn dft_matrix_with_root(g: &AbelianGroup, root: &Scalar) -> Result<CountedMatrix> {
    let e = g.exponent();
    let field = root.field();
    let one = field.one();
    if root.pow(e as u128) != one || (1..e).any(|d| e % d == 0 && root.pow(d as u128) == one) {
        return Err(Error::NoSuitableRoot(format!("{root} is not a primitive root of order {e}")));
    }
    let roots: Vec<Scalar> = g.factors().iter().map(|&n| root.pow((e / n) as u128)).collect();
    let n = g.order();
    let rows: Vec<Vec<Scalar>> = (0..n)
        .map(|chi| {
            let c = g.coords(chi);
            (0..n)
                .map(|x| {
                    let xc = g.coords(x);
                    let mut v = one.clone();
                    for ((w, &ci), (&xi, &ni)) in roots.iter().zip(&c).zip(xc.iter().zip(g.factors())) {
                        v = &v * &w.pow(((ci * xi) % ni) as u128);
                    }
                    v
                })
                .collect()
        })
        .collect();
    CountedMatrix::from_dense(&field, &rows)
}

/// F^adj[g][χ] = χ(g)⁻¹, so F·F^adj = |G|·I.
pub fn dft_adjoint(g: &AbelianGroup, f: &CountedMatrix) -> CountedMatrix {
    let n = g.order();
    let rows: Vec<Vec<Scalar>> = (0..n).map(|x| (0..n).map(|chi| f.get(chi, g.neg(x))).collect()).collect();
    CountedMatrix::from_dense(f.field(), &rows).expect("square")
}

/// Rank-|G| algorithm: encode both inputs with F, multiply pointwise, and
/// decode with F^adj/|G|.
pub fn group_bilinear(g: &AbelianGroup, field: &Field) -> Result<BilinearAlgorithm> {
    let f = dft_matrix(g, field)?;
    let inv_order = field.from_i64(g.order() as i64).inv()?;
    let dec = dft_adjoint(g, &f).scale(&inv_order);
    BilinearAlgorithm::new(f.clone(), f, dec)
}

/// Σ_ρ oracle(d_ρ).
pub fn rank_bound_sum(irrep_dims: &[u64], oracle: impl Fn(u64) -> BigUint) -> BigUint {
    irrep_dims.iter().map(|&d| oracle(d)).sum()
}

/// Convolution (f * h)_k = Σ_{g+h=k} f_g·h_h by the group law.
pub fn convolve(g: &AbelianGroup, f: &[Scalar], h: &[Scalar]) -> Vec<Scalar> {
    let n = g.order();
    let mut out = vec![f[0].field().zero(); n];
    for a in 0..n {
        for b in 0..n {
            let k = g.add(a, b);
            out[k] = &out[k] + &(&f[a] * &h[b]);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn fp(p: u64) -> Field {
        Field::prime(p).unwrap()
    }

    #[test]
    fn small_tensors() {
        let z1 = AbelianGroup::cyclic(1).unwrap();
        assert_eq!(group_tensor(&z1, &Field::Rational).unwrap(), Tensor::matmul(crate::tensor_core::MatMulShape::new(1, 1, 1), &Field::Rational));
        let z2 = AbelianGroup::cyclic(2).unwrap();
        let t = group_tensor(&z2, &Field::Rational).unwrap();
        let idx: Vec<[usize; 3]> = t.entries().map(|(i, _)| *i).collect();
        assert_eq!(idx, vec![[0, 0, 0], [0, 1, 1], [1, 0, 1], [1, 1, 0]]);
        let z3 = AbelianGroup::cyclic(3).unwrap();
        let t = group_tensor(&z3, &Field::Rational).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert!(t.get(a, b, (a + b) % 3).is_one());
            }
        }
        assert_eq!(t.nnz(), 9);
    }

    #[test]
    fn dft_examples() {
        let f = dft_matrix(&AbelianGroup::cyclic(2).unwrap(), &fp(5)).unwrap();
        assert_eq!(f, CountedMatrix::from_i64(&fp(5), &[&[1, 1], &[1, 4]]));
        let z3 = AbelianGroup::cyclic(3).unwrap();
        let f = dft_matrix_with_root(&z3, &fp(7).from_i64(2)).unwrap();
        assert_eq!(f, CountedMatrix::from_i64(&fp(7), &[&[1, 1, 1], &[1, 2, 4], &[1, 4, 2]]));
        assert_eq!(dft_matrix(&AbelianGroup::cyclic(1).unwrap(), &Field::Rational).unwrap(), CountedMatrix::identity(1, &Field::Rational));
        assert!(matches!(dft_matrix(&z3, &fp(5)), Err(Error::NoSuitableRoot(_))));
    }

    #[test]
    fn all_small_groups_verify() {
        let groups: Vec<Vec<u64>> = vec![vec![1], vec![2], vec![3], vec![4], vec![2, 2], vec![4, 2], vec![2, 2, 2], vec![3, 3], vec![16], vec![4, 4], vec![2, 6]];
        for factors in groups {
            let g = AbelianGroup::new(factors).unwrap();
            let field = fp(g.suitable_prime());
            let alg = group_bilinear(&g, &field).unwrap();
            assert_eq!(alg.rank(), g.order());
            assert!(alg.verify_computes(&group_tensor(&g, &field).unwrap()).unwrap());
            let f = dft_matrix(&g, &field).unwrap();
            let prod = f.mul_dense(&dft_adjoint(&g, &f).to_dense()).unwrap();
            let expect = CountedMatrix::identity(g.order(), &field).scale(&field.from_i64(g.order() as i64)).to_dense();
            assert_eq!(prod, expect);
        }
    }

    #[test]
    fn convolution_oracle() {
        let g = AbelianGroup::new(vec![4, 2]).unwrap();
        let field = fp(5);
        let alg = group_bilinear(&g, &field).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let a: Vec<Scalar> = (0..8).map(|_| field.random(&mut rng)).collect();
            let b: Vec<Scalar> = (0..8).map(|_| field.random(&mut rng)).collect();
            assert_eq!(alg.evaluate(&a, &b).unwrap().0, convolve(&g, &a, &b));
        }
    }

    #[test]
    fn symmetric_convention() {
        let g = AbelianGroup::new(vec![3, 2]).unwrap();
        let s = to_symmetric(&group_tensor(&g, &Field::Rational).unwrap(), &g).unwrap();
        assert!(s.entries().all(|(i, _)| g.add(g.add(i[0], i[1]), i[2]) == 0));
    }

    #[test]
    fn rank_sums() {
        assert_eq!(rank_bound_sum(&[1; 8], |_| BigUint::from(1u32)), BigUint::from(8u32));
        assert_eq!(rank_bound_sum(&[1, 1, 2], |d| BigUint::from(if d == 2 { 7u32 } else { 1 })), BigUint::from(9u32));
        let g = AbelianGroup::new(vec![4, 3]).unwrap();
        assert_eq!(g.irrep_dims().iter().map(|d| d * d).sum::<u64>(), g.order() as u64);
    }
}
