//! Numeric evaluators for leading constants, exponents and recurrences.
//!
//! Exact formulas are evaluated with rationals; everything involving
//! roots or huge binomials is evaluated in natural-log space in f64.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;
use std::sync::Arc;

use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::ToPrimitive;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::field_arith::rational_to_f64;

/// One evaluated formula with its inputs echoed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostReport {
    pub label: String,
    pub formula_id: String,
    pub inputs: BTreeMap<String, String>,
    pub value: f64,
    /// Exact value when the formula is rational.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub exact: Option<String>,
    /// Secondary quantities computed alongside `value`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub extra: BTreeMap<String, f64>,
}

impl CostReport {
    fn new(label: &str, formula_id: &str, inputs: &[(&str, String)], value: f64) -> Self {
        CostReport {
            label: label.into(),
            formula_id: formula_id.into(),
            inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
            value,
            exact: None,
            extra: BTreeMap::new(),
        }
    }

    fn exact(mut self, v: &BigRational) -> Self {
        self.exact = Some(fmt_rational(v));
        self
    }

    fn with(mut self, key: &str, v: f64) -> Self {
        self.extra.insert(key.into(), v);
        self
    }

    pub const CSV_HEADER: &'static str = "label,formula_id,inputs,value,exact";

    /// One CSV row; floats carry 6 significant digits.
    pub fn csv_row(&self) -> String {
        let inputs: Vec<String> = self.inputs.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!("{},{},{},{},{}", self.label, self.formula_id, inputs.join(";"), sig6(self.value), self.exact.clone().unwrap_or_default())
    }
}

impl fmt::Display for CostReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} = {}", self.label, sig6(self.value))
    }
}

pub fn sig6(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    if (-4..15).contains(&mag) {
        format!("{:.*}", (5 - mag).max(0) as usize, x)
    } else {
        format!("{x:.5e}")
    }
}

fn fmt_rational(v: &BigRational) -> String {
    if v.is_integer() {
        v.numer().to_string()
    } else {
        format!("{}/{}", v.numer(), v.denom())
    }
}

fn rat(x: u64) -> BigRational {
    BigRational::from_integer(BigInt::from(x))
}

fn pow_rat(x: &BigRational, e: u32) -> BigRational {
    num_traits::pow(x.clone(), e as usize)
}

/// T₁·(t^k−n^{2k})/(t−n²) + T₂·(…) + T₃·(…) + t^k for a square-shape
/// algorithm with encoding costs T₁, T₂ and decoding cost T₃.
pub fn standard_recursion_constant(n: u64, t: u64, k: u32, costs: [u64; 3]) -> Result<CostReport> {
    let area = n * n;
    if t <= area {
        return Err(Error::HypothesisViolated(format!("t = {t} must exceed n² = {area}")));
    }
    let tk = pow_rat(&rat(t), k);
    let ratio = (&tk - pow_rat(&rat(area), k)) / rat(t - area);
    let v = costs.iter().fold(tk, |acc, &c| acc + rat(c) * &ratio);
    let inputs = [("n", n.to_string()), ("t", t.to_string()), ("k", k.to_string()), ("costs", format!("{}/{}/{}", costs[0], costs[1], costs[2]))];
    Ok(CostReport::new("standard_recursion", "kron-recursion", &inputs, rational_to_f64(&v)).exact(&v))
}

/// t^k + 4t^{k−1}/n^{2(k−1)}·T_enc + 2t^{k−1}/n^{2(k−1)}·T_dec.
pub fn rect_reduction_bound(n: u64, t: u64, k: u32, t_enc: &BigRational, t_dec: &BigRational) -> Result<CostReport> {
    if t < 2 * n * n {
        return Err(Error::HypothesisViolated(format!("t = {t} < 2n² = {}", 2 * n * n)));
    }
    if k == 0 {
        return Err(Error::PreconditionViolated("k must be positive".into()));
    }
    let scale = pow_rat(&rat(t), k - 1) / pow_rat(&rat(n * n), k - 1);
    let v = pow_rat(&rat(t), k) + &scale * rat(4) * t_enc + &scale * rat(2) * t_dec;
    let inputs = [("n", n.to_string()), ("t", t.to_string()), ("k", k.to_string()), ("T_enc", fmt_rational(t_enc)), ("T_dec", fmt_rational(t_dec))];
    Ok(CostReport::new("rect_reduction", "rect-reduction", &inputs, rational_to_f64(&v)).exact(&v))
}

/// ln(3·m^{2s}·H^{k/s}).
pub fn remark_log_constant(m: f64, h: f64, k: u32, s: u32) -> f64 {
    3f64.ln() + 2.0 * s as f64 * m.ln() + k as f64 / s as f64 * h.ln()
}

/// Integer s ≥ 1 minimising 3m^{2s}·H^{k/s}; the value is log₂ of the
/// constant. Also reports the continuous optimum and both normalisations
/// of the resulting exponent of C₀ and C = √C₀.
pub fn remark_optimizer(m: f64, h: f64, k: u32) -> Result<CostReport> {
    if m < 2.0 || h < 2.0 {
        return Err(Error::PreconditionViolated("m and H must be at least 2".into()));
    }
    let s_star = (k as f64 * h.ln() / (2.0 * m.ln())).sqrt();
    let candidates = [s_star.floor().max(1.0) as u32, s_star.ceil().max(1.0) as u32];
    let s = *candidates.iter().min_by(|a, b| remark_log_constant(m, h, k, **a).total_cmp(&remark_log_constant(m, h, k, **b))).expect("two candidates");
    let inputs = [("m", m.to_string()), ("H", h.to_string()), ("k", k.to_string())];
    Ok(CostReport::new("remark_constant_log2", "remark-optimizer", &inputs, remark_log_constant(m, h, k, s) / LN_2)
        .with("s", s as f64)
        .with("s_star", s_star)
        .with("exponent_c0", (k as f64).sqrt())
        .with("exponent_c", 1.0 + (k as f64 / 2.0).sqrt()))
}

/// Exhaustive scan of s ∈ 1..=limit.
pub fn remark_scan(m: f64, h: f64, k: u32, limit: u32) -> u32 {
    (1..=limit).min_by(|a, b| remark_log_constant(m, h, k, *a).total_cmp(&remark_log_constant(m, h, k, *b))).unwrap_or(1)
}

/// f(N) = 1/√(log₂ N) with unit constant.
pub fn f_unit(log2_n: f64) -> f64 {
    1.0 / log2_n.sqrt()
}

/// log₂ N at which f(N) = ε.
pub fn n_for_f_at_most(eps: f64) -> f64 {
    1.0 / (eps * eps)
}

/// Leading and low-order coefficients with H = 2^{C₁N}, m = 2^{C₂N},
/// C = 2^{C₃N/log N} and f(N) = 1/√log₂N. The value is log₂ of the
/// leading constant H^{1/√log N}.
pub fn improved_constant_bounds(n: f64, c1: f64, c2: f64, c3: f64, omega0: f64) -> Result<CostReport> {
    if n < 2.0 {
        return Err(Error::PreconditionViolated("N must be at least 2".into()));
    }
    let log2n = n.log2();
    let log2_h = c1 * n;
    let log2_m = c2 * n;
    let lead = log2_h * f_unit(log2n);
    // r ≤ m^{ω₀+f(√N)+C₁/(C₂√N)} and the low-order coefficient is 3r·log_r H.
    let log2_r = log2_m * (omega0 + f_unit(log2n / 2.0) + c1 / (c2 * n.sqrt()));
    let low = 3f64.log2() + log2_r + (log2_h / log2_r).log2();
    let exponent_ratio = (omega0 + f_unit(log2n)) * log2_m / log2_r;
    let inputs = [("N", n.to_string()), ("C1", c1.to_string()), ("C2", c2.to_string()), ("C3", c3.to_string()), ("omega0", omega0.to_string())];
    Ok(CostReport::new("improved_leading_log2", "improved-constant", &inputs, lead)
        .with("low_order_log2", low)
        .with("f_N", f_unit(log2n))
        .with("exponent_ratio", exponent_ratio)
        .with("log2_C", c3 * n / log2n))
}

/// Optimal s-split constant (log₂) at H = 2^{C₁N}, m = 2^{C₂N} and given k.
pub fn remark_constant_at(n: f64, c1: f64, c2: f64, k: u32) -> f64 {
    let (ln_m, ln_h) = (c2 * n * LN_2, c1 * n * LN_2);
    let s_star = (k as f64 * ln_h / (2.0 * ln_m)).sqrt();
    [s_star.floor().max(1.0), s_star.ceil().max(1.0)]
        .iter()
        .map(|&s| (3f64.ln() + 2.0 * s * ln_m + k as f64 / s * ln_h) / LN_2)
        .fold(f64::INFINITY, f64::min)
}

/// 16|G|^{1.5}/(R/H)^{log_r H + 1}; the old constant H^{√(24k·log m/log H)}
/// and the first k where it exceeds the new one are reported as extras.
pub fn group_leading_constant(order_g: f64, h: f64, m: f64, r: f64, r_tg: f64) -> Result<CostReport> {
    if r <= 1.0 || h < 1.0 || r_tg < h {
        return Err(Error::PreconditionViolated(format!("need r > 1, H ≥ 1, R(T_G) ≥ H (r={r}, H={h}, R={r_tg})")));
    }
    let levels = h.ln() / r.ln();
    let ln_new = 16f64.ln() + 1.5 * order_g.ln() - (levels + 1.0) * (r_tg / h).ln();
    let crossover = (1..=1_000_000u32).find(|&k| old_group_log_constant(h, m, k) > ln_new);
    let inputs = [("G", order_g.to_string()), ("H", h.to_string()), ("m", m.to_string()), ("r", r.to_string()), ("R_TG", r_tg.to_string())];
    let mut rep = CostReport::new("group_leading", "group-constant", &inputs, ln_new.exp()).with("ln_value", ln_new).with("cap", 16.0 * order_g.powf(1.5));
    if let Some(k) = crossover {
        rep = rep.with("crossover_k", k as f64);
    }
    Ok(rep)
}

/// ln of H^{√(24k·log m/log H)}; 0 when H = 1.
pub fn old_group_log_constant(h: f64, m: f64, k: u32) -> f64 {
    if h <= 1.0 {
        return 0.0;
    }
    (24.0 * k as f64 * m.ln() / h.ln()).sqrt() * h.ln()
}

/// Unsimplified leading constant H/(R/H)^L + (3(ΣT(d_ρ) + T(F_G)) + |G|)/(R/H)^{L+1}
/// with L = log_r H and T(⟨d,d,d⟩) = 2d³ − d².
pub fn group_leading_constant_detailed(irrep_dims: &[u64], h: f64, r: f64, r_tg: f64, t_fg: Option<f64>) -> f64 {
    let order: f64 = irrep_dims.iter().map(|&d| (d * d) as f64).sum();
    let t_fg = t_fg.unwrap_or(order.powf(1.5));
    let levels = h.ln() / r.ln();
    let base = r_tg / h;
    let inner: f64 = irrep_dims.iter().map(|&d| 2.0 * (d as f64).powi(3) - (d * d) as f64).sum();
    h / base.powf(levels) + (3.0 * (inner + t_fg) + order) / base.powf(levels + 1.0)
}

/// How the explicit-construction exponent evaluates its constant.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AppendixConvention {
    /// The simplified closed form for C with c₆ = 1.
    #[default]
    ClosedForm,
    /// The unsimplified chain through M, Elkin's |B| (log base 2) and A.
    ExactChain,
    /// The chain with a natural-log Elkin factor.
    ExactChainNatural,
}

fn ln_binom(n: f64, k: f64) -> f64 {
    ln_gamma(n + 1.0) - ln_gamma(k + 1.0) - ln_gamma(n - k + 1.0)
}

fn ln_multinomial(parts: &[f64]) -> f64 {
    let n: f64 = parts.iter().sum();
    ln_gamma(n + 1.0) - parts.iter().map(|&p| ln_gamma(p + 1.0)).sum::<f64>()
}

/// ln of the Elkin-form |B| for ln M given, c₀ = 1.
pub fn elkin_ln_size(ln_m: f64, natural_log: bool) -> f64 {
    let log2_m = ln_m / LN_2;
    let inner = if natural_log { ln_m } else { log2_m };
    ln_m + 0.25 * inner.ln() - 2.0 * (2.0 * log2_m).sqrt() * LN_2
}

/// ⌊M·(log₂M)^{1/4}/2^{2√(2 log₂ M)}⌋, at least 1.
pub fn elkin_size(m: u64) -> Result<BigUint> {
    if m < 2 {
        return Err(Error::PreconditionViolated("M must be at least 2".into()));
    }
    let v = elkin_ln_size((m as f64).ln(), false).exp().floor();
    Ok(BigUint::from((v as u64).max(1)))
}

pub fn appendix_a_limit() -> f64 {
    (4000f64 / 27.0).ln() / 8f64.ln()
}

/// log C / log 8^{SN}.
pub fn appendix_a_exponent(n: u64, s: u64, convention: AppendixConvention) -> Result<CostReport> {
    if n == 0 || s == 0 {
        return Err(Error::PreconditionViolated("N and S must be positive".into()));
    }
    let (nf, sf) = (n as f64, s as f64);
    let ln_c = match convention {
        AppendixConvention::ClosedForm => {
            let per_level = 0.75 * nf.ln() + nf * 4000f64.ln() + 4.0 * nf.sqrt() * LN_2 - 3.0 * nf * 3f64.ln();
            sf * per_level + 3.0 * nf * 3f64.ln() - 0.25 * nf.ln() - 4.0 * nf.sqrt() * LN_2 - 2.0 * nf * LN_2
        }
        AppendixConvention::ExactChain | AppendixConvention::ExactChainNatural => {
            // M = 2·C(2N,N) + 1; the +1 is below f64 resolution beyond tiny N.
            let ln_m = (2.0 * ln_binom(2.0 * nf, nf).exp() + 1.0).ln().max(LN_2 + ln_binom(2.0 * nf, nf));
            let ln_b = elkin_ln_size(ln_m, convention == AppendixConvention::ExactChainNatural);
            let ln_a = 0.25f64.ln() + ln_b - 2.0 * ln_m + ln_multinomial(&[nf, nf, nf]);
            sf * ((1.0 + 12.0 * nf).ln() + nf * 1000f64.ln() - ln_a) + ln_a
        }
    };
    let exponent = ln_c / (sf * nf * 8f64.ln());
    let inputs = [("N", n.to_string()), ("S", s.to_string()), ("convention", format!("{convention:?}"))];
    Ok(CostReport::new("appendix_a_exponent", "appendix-a", &inputs, exponent).with("limit", appendix_a_limit()).with("ln_C", ln_c))
}

/// The four reference rows N = S ∈ {10, 100, 250, 1000}.
pub fn appendix_a_table(convention: AppendixConvention) -> Vec<CostReport> {
    [10, 100, 250, 1000].iter().map(|&n| appendix_a_exponent(n, n, convention).expect("positive")).collect()
}

/// Rank profile f with ⟨n,n,n⟩ of rank n^{2+f(n)}; evaluated at real n and
/// clipped to (0, 1].
#[derive(Clone)]
pub enum RankProfile {
    Constant(f64),
    /// f(n) = log₂a / log₂n (rank a·n²).
    ConstantFactor(f64),
    /// f(n) = c·log₂log₂n / log₂n (rank (log n)^c·n²).
    PolylogFactor(f64),
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for RankProfile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RankProfile::Constant(e) => write!(f, "Constant({e})"),
            RankProfile::ConstantFactor(a) => write!(f, "ConstantFactor({a})"),
            RankProfile::PolylogFactor(c) => write!(f, "PolylogFactor({c})"),
            RankProfile::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl RankProfile {
    pub fn eval(&self, n: f64) -> f64 {
        let raw = match self {
            RankProfile::Constant(e) => *e,
            RankProfile::ConstantFactor(a) => a.log2() / n.log2(),
            RankProfile::PolylogFactor(c) => {
                let l = n.log2();
                if l <= 2.0 { 1.0 } else { c * l.log2() / l }
            }
            RankProfile::Custom(f) => f(n),
        };
        if raw.is_finite() && raw > 0.0 { raw.min(1.0) } else { 1.0 }
    }
}

/// Σ_{ℓ=0}^{⌊log₂log₂m⌋} 3/2^{ℓ+1}·f(m^{1/2^{ℓ+2}}), for m given as log₂ m.
pub fn omega2_hf(profile: &RankProfile, log2_m: f64) -> Result<CostReport> {
    if log2_m < 2.0 {
        return Err(Error::PreconditionViolated("m must be at least 4".into()));
    }
    let top = log2_m.log2().floor() as u32;
    let mut sum = 0.0;
    let mut sup: f64 = 0.0;
    for l in 0..=top {
        let arg = (log2_m / 2f64.powi(l as i32 + 2)).exp2();
        let f = profile.eval(arg);
        sup = sup.max(f);
        sum += 3.0 / 2f64.powi(l as i32 + 1) * f;
    }
    let inputs = [("log2_m", log2_m.to_string()), ("profile", format!("{profile:?}"))];
    Ok(CostReport::new("h_f", "omega2-hf", &inputs, sum).with("terms", (top + 1) as f64).with("sup_f", sup))
}

/// g(m₀) = (2m₀³ − m₀²)/m₀^{2+f(m₀)}: the naive count over the rank bound.
pub fn naive_base_g(profile: &RankProfile, m0: f64) -> f64 {
    (2.0 * m0.powi(3) - m0 * m0) / m0.powf(2.0 + profile.eval(m0))
}

/// Unrolls g(m) ≤ 9·m^{(3/2)f(m^{1/4})}·g(√m) until m < 16. The value is
/// log₂ of the unrolled g; extras carry the level count S, log₂ of the
/// closed form g(base)·9^S·m^{h_f(m)}, and log₂ of the O(log m)·m^{h_f(m)}
/// form with unit constant.
pub fn omega2_recurrence(profile: &RankProfile, log2_m: f64, base: Option<&dyn Fn(f64) -> f64>) -> Result<CostReport> {
    if log2_m < 4.0 {
        return Err(Error::PreconditionViolated("m must be at least 16".into()));
    }
    let mut l = log2_m;
    let mut acc = 0.0;
    let mut levels = 0u32;
    while l >= 4.0 {
        acc += 9f64.log2() + 1.5 * profile.eval((l / 4.0).exp2()) * l;
        l /= 2.0;
        levels += 1;
    }
    let m0 = l.exp2();
    let g0 = match base {
        Some(f) => f(m0),
        None => naive_base_g(profile, m0),
    };
    let unrolled = acc + g0.log2();
    let hf = omega2_hf(profile, log2_m)?.value;
    let closed = g0.log2() + levels as f64 * 9f64.log2() + hf * log2_m;
    let log_factor = log2_m.log2() + hf * log2_m;
    let inputs = [("log2_m", log2_m.to_string()), ("profile", format!("{profile:?}"))];
    Ok(CostReport::new("g_unrolled_log2", "omega2-recurrence", &inputs, unrolled)
        .with("levels", levels as f64)
        .with("closed_form_log2", closed)
        .with("log_factor_form_log2", log_factor)
        .with("h_f", hf)
        .with("base_m", m0))
}

/// Least-squares fit y ≈ c + b·x; returns (c, b, max |residual|).
pub fn fit_line(points: &[(f64, f64)]) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x, b + y));
    let (mx, my) = (sx / n, sy / n);
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let b = if sxx == 0.0 { 0.0 } else { sxy / sxx };
    let c = my - b * mx;
    let res = points.iter().map(|(x, y)| (y - c - b * x).abs()).fold(0.0, f64::max);
    (c, b, res)
}

/// Σ (n_i·m_i·d_i)^{ω/3} ≤ r.
pub fn asymptotic_sum_check(shapes: &[(u64, u64, u64)], r: f64, omega: f64) -> bool {
    asymptotic_sum(shapes, omega) <= r * (1.0 + 1e-12)
}

fn asymptotic_sum(shapes: &[(u64, u64, u64)], omega: f64) -> f64 {
    shapes.iter().map(|&(n, m, d)| ((n * m * d) as f64).powf(omega / 3.0)).sum()
}

/// The ω solving Σ (n_i·m_i·d_i)^{ω/3} = r, by bisection to 1e-13.
pub fn asymptotic_sum_omega(shapes: &[(u64, u64, u64)], r: f64) -> Result<f64> {
    if shapes.iter().all(|&(n, m, d)| n * m * d <= 1) {
        return Err(Error::PreconditionViolated("at least one nontrivial shape is required".into()));
    }
    if asymptotic_sum(shapes, 0.0) > r {
        return Err(Error::PreconditionViolated(format!("r = {r} is below the number of shapes")));
    }
    let mut hi = 3.0;
    while asymptotic_sum(shapes, hi) <= r {
        hi *= 2.0;
    }
    let mut lo = 0.0;
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if asymptotic_sum(shapes, mid) <= r {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// ω bound implied by R(H⊙⟨n,n,n⟩^{⊗s}) ≤ ⌈r/H⌉^s·H as s → ∞: log⌈r/H⌉ / log n.
pub fn schonhage_omega(h: u64, r: u64, n: u64) -> f64 {
    (r.div_ceil(h) as f64).ln() / (n as f64).ln()
}

/// Exponent log R / log n^s implied by the exact rank bound
/// ⌈r/H⌉^s·H for ⟨n^s,n^s,n^s⟩.
pub fn schonhage_level_exponent(h: u64, r: u64, n: u64, s: u32) -> f64 {
    let bound = crate::mm_engine::schonhage_rank_bound(h, r, s);
    let ln_bound = bound.to_f64().map(f64::ln).unwrap_or_else(|| big_ln(&bound));
    ln_bound / (s as f64 * (n as f64).ln())
}

fn big_ln(x: &BigUint) -> f64 {
    let bits = x.bits();
    let shift = bits.saturating_sub(60);
    let top = (x >> shift).to_f64().unwrap_or(1.0);
    top.ln() + shift as f64 * LN_2
}
