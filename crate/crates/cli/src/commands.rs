use std::path::Path;

use fmmlab::bilinear::{strassen, BilinearAlgorithm, CountedMatrix};
use fmmlab::cost_models::{self as cost, AppendixConvention, CostReport, RankProfile};
use fmmlab::cw_laser::{self as cw, SalemSpencerMethod, TypeDistribution};
use fmmlab::field_arith::Field;
use fmmlab::group_mm::{self as group, AbelianGroup};
use fmmlab::io;
use fmmlab::kron_eval::{apply_plan, kron_plan, kron_power_bound, PlanOrder};
use fmmlab::mm_engine::{
    multiply_naive, multiply_recursive, multiply_simultaneous, multiply_via_rect, pad_to_power, the_algorithm, Matrix, MatrixPair,
    MultiplyResult, NaiveBackend, RectBackend, SumAlgorithm, TiledBackend, TraceRow,
};
use fmmlab::sparse_decomp::{count_bound, enumerate_slp_matrices, sparse_factor};
use fmmlab::tensor_core::{MatMulShape, Tensor};
use fmmlab::Error;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

use crate::args::*;
use crate::{CliError, Outcome};

type Res<T> = Result<T, CliError>;

pub fn dispatch(cli: &Cli) -> Res<Outcome> {
    let field = Field::parse(&cli.field).map_err(|e| CliError::Usage(format!("--field: {e}")))?;
    let ctx = Ctx { field, seed: cli.seed, format: cli.format };
    match &cli.command {
        Command::Multiply(a) => ctx.multiply(a),
        Command::Verify(a) => ctx.verify(a),
        Command::Kron(a) => ctx.kron(a),
        Command::Cw(c) => ctx.cw(c),
        Command::Group(a) => ctx.group(a),
        Command::Cost(c) => ctx.cost(c),
        Command::Sparse(c) => ctx.sparse(c),
        Command::SalemSpencer(a) => ctx.json_only().and_then(|_| salem_spencer_cmd(a)),
    }
}

struct Ctx {
    field: Field,
    seed: u64,
    format: Option<Format>,
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn value(text: &str) -> Value {
    serde_json::from_str(text).expect("canonical writers emit valid JSON")
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("serialisable");
    s.push('\n');
    s
}

fn parse_shape(s: &str) -> Res<MatMulShape> {
    let v: Vec<usize> = s
        .split([',', 'x'])
        .map(|p| p.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("bad shape {s:?}, expected n,m,d")))?;
    match v[..] {
        [n, m, d] => Ok(MatMulShape::new(n, m, d)),
        _ => Err(CliError::Usage(format!("bad shape {s:?}, expected three sizes"))),
    }
}

fn same_field(a: &Field, b: &Field) -> Res<()> {
    if a != b {
        return Err(Error::DomainMismatch(a.to_string(), b.to_string()).into());
    }
    Ok(())
}

fn method_for(m: u64, method: Option<SsMethod>) -> SalemSpencerMethod {
    match method {
        Some(SsMethod::Exhaustive) => SalemSpencerMethod::Exhaustive,
        Some(SsMethod::Behrend) => SalemSpencerMethod::Behrend,
        None if m <= cw::EXHAUSTIVE_LIMIT => SalemSpencerMethod::Exhaustive,
        None => SalemSpencerMethod::Behrend,
    }
}

fn salem_spencer_cmd(a: &SalemSpencerArgs) -> Res<Outcome> {
    let set = cw::salem_spencer(a.modulus, method_for(a.modulus, a.method))?;
    let ok = set.is_valid();
    let v = json!({ "modulus": set.modulus, "size": set.elements.len(), "elements": set.elements, "valid": ok });
    Ok(Outcome::checked(pretty(&v), ok))
}

fn trace_csv(trace: &[TraceRow]) -> String {
    let mut s = String::from("level,phase,subproblems,adds,mults,prods\n");
    for r in trace {
        s.push_str(&format!("{},{},{},{},{},{}\n", r.level, r.phase, r.subproblems, r.count.additions, r.count.multiplications, r.count.products));
    }
    s
}

fn profile(s: &str) -> Res<RankProfile> {
    let (kind, arg) = s.split_once(':').ok_or_else(|| CliError::Usage(format!("bad profile {s:?}, expected kind:value")))?;
    let x: f64 = arg.parse().map_err(|_| CliError::Usage(format!("bad profile value {arg:?}")))?;
    match kind {
        "constant" => Ok(RankProfile::Constant(x)),
        "factor" => Ok(RankProfile::ConstantFactor(x)),
        "polylog" => Ok(RankProfile::PolylogFactor(x)),
        _ => Err(CliError::Usage(format!("unknown profile kind {kind:?}"))),
    }
}

impl Ctx {
    fn json_only(&self) -> Res<()> {
        match self.format {
            Some(Format::Csv) => Err(CliError::Usage("this command emits JSON only".into())),
            _ => Ok(()),
        }
    }

    fn load_alg(&self, path: &Option<std::path::PathBuf>) -> Res<BilinearAlgorithm> {
        match path {
            Some(p) => Ok(io::algorithm_from_json(&read(p)?)?),
            None => Ok(strassen(&self.field)),
        }
    }

    fn multiply(&self, a: &MultiplyArgs) -> Res<Outcome> {
        if a.inputs.len() % 2 != 0 {
            return Err(CliError::Usage("matrices come in pairs".into()));
        }
        if a.inputs.len() > 2 && a.engine != Engine::Simultaneous {
            return Err(CliError::Usage("only the simultaneous engine takes several pairs".into()));
        }
        let mut pairs = Vec::new();
        for chunk in a.inputs.chunks(2) {
            let lhs = io::matrix_from_text(&read(&chunk[0])?, &self.field)?;
            let rhs = io::matrix_from_text(&read(&chunk[1])?, &self.field)?;
            same_field(lhs.field(), rhs.field())?;
            pairs.push(MatrixPair::new(lhs, rhs)?);
        }
        let field = pairs[0].field().clone();
        let out_shape: Vec<(usize, usize)> = pairs.iter().map(|p| (p.lhs.rows(), p.rhs.cols())).collect();

        let (products, count, trace, k) = if a.engine == Engine::Naive {
            if a.alg.is_some() || a.k.is_some() {
                return Err(CliError::Usage("the naive engine takes no --alg or --k".into()));
            }
            let r = multiply_naive(&pairs[0]);
            (vec![r.product], r.count, r.trace, 0)
        } else {
            let alg = self.load_alg(&a.alg)?;
            same_field(alg.field(), &field)?;
            let base = alg.shape.ok_or(Error::ShapeUnknown)?;
            let mut kmin = 0;
            for p in &pairs {
                kmin = kmin.max(pad_to_power(p, base)?.1);
            }
            let k = a.k.unwrap_or(kmin);
            if k < kmin {
                return Err(CliError::Usage(format!("--k {k} is too small for the inputs; at least {kmin} is needed")));
            }
            let big = base.pow(k);
            let padded: Vec<MatrixPair> = pairs
                .iter()
                .map(|p| MatrixPair::new(p.lhs.padded(big.n, big.m), p.rhs.padded(big.m, big.d)))
                .collect::<Result<_, _>>()?;
            let single = |r: MultiplyResult| (vec![r.product], r.count, r.trace, k);
            match a.engine {
                Engine::Recursive => {
                    let order = if a.reversed { PlanOrder::Reversed } else { PlanOrder::Forward };
                    single(multiply_recursive(&alg, &padded[0], k, order)?)
                }
                Engine::Rect => {
                    let backend: Box<dyn RectBackend> =
                        if a.tile_levels == 0 { Box::new(NaiveBackend) } else { Box::new(TiledBackend::new(alg.clone(), a.tile_levels)?) };
                    single(multiply_via_rect(&alg, &padded[0], k, backend.as_ref())?)
                }
                Engine::Simultaneous => {
                    let sum = SumAlgorithm::direct_sum(&alg, a.copies.max(padded.len()))?;
                    let r = multiply_simultaneous(&sum, &padded, k)?;
                    (r.products, r.count, r.trace, k)
                }
                Engine::Algorithm => {
                    let sum = SumAlgorithm::direct_sum(&alg, a.copies)?;
                    single(the_algorithm(&alg, &sum, &padded[0], k)?)
                }
                Engine::Naive => unreachable!(),
            }
        };
        let products: Vec<Matrix> = products.iter().zip(&out_shape).map(|(m, &(r, c))| m.cropped(r, c)).collect();

        let mut outcome = match self.format.unwrap_or(Format::Json) {
            Format::Json => {
                let prods: Vec<Value> = products.iter().map(|m| value(&io::matrix_to_json(m))).collect();
                let mut v = json!({
                    "engine": format!("{:?}", a.engine).to_lowercase(),
                    "field": field.to_string(),
                    "k": k,
                    "count": count,
                });
                if prods.len() == 1 {
                    v["product"] = prods[0].clone();
                } else {
                    v["products"] = Value::Array(prods);
                }
                Outcome::ok(pretty(&v))
            }
            Format::Csv => {
                let text = products.iter().map(io::matrix_to_csv).collect::<Vec<_>>().join("\n");
                let mut o = Outcome::ok(text);
                o.note = Some(serde_json::to_string(&count).expect("serialisable"));
                o
            }
        };
        if let Some(path) = &a.trace {
            outcome.side_files.push((path.clone(), trace_csv(&trace)));
        }
        Ok(outcome)
    }

    fn verify(&self, a: &VerifyArgs) -> Res<Outcome> {
        self.json_only()?;
        let alg = io::algorithm_from_json(&read(&a.alg)?)?;
        let target = match (&a.tensor, &a.shape) {
            (Some(p), _) => io::tensor_from_json(&read(p)?)?,
            (None, Some(s)) => Tensor::matmul(parse_shape(s)?, alg.field()),
            (None, None) => Tensor::matmul(alg.shape.ok_or(Error::ShapeUnknown)?, alg.field()),
        };
        same_field(alg.field(), target.field())?;
        let ok = alg.dims() == target.dims() && alg.verify_computes(&target)?;
        let v = json!({
            "rank": alg.rank(),
            "dims": alg.dims(),
            "target_dims": target.dims(),
            "field": alg.field().to_string(),
            "cost": alg.cost(),
            "verified": ok,
        });
        Ok(Outcome::checked(pretty(&v), ok))
    }

    fn kron(&self, a: &KronArgs) -> Res<Outcome> {
        self.json_only()?;
        if a.k == 0 {
            return Err(CliError::Usage("--k must be at least 1".into()));
        }
        let m: CountedMatrix = match &a.matrix {
            Some(p) => io::counted_from_json(&read(p)?)?,
            None => {
                let alg = self.load_alg(&a.alg)?;
                match a.part {
                    Part::EncX => alg.enc_x,
                    Part::EncY => alg.enc_y,
                    Part::DecZ => alg.dec_z,
                }
            }
        };
        let order = if a.reversed { PlanOrder::Reversed } else { PlanOrder::Forward };
        let plan = kron_plan(&m, a.k, order);
        let predicted = plan.predicted_cost();
        let bound = kron_power_bound(&m.naive_cost().linear(), m.rows(), m.cols(), a.k);
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let input: Vec<_> = (0..plan.input_len()).map(|_| m.field().random(&mut rng)).collect();
        let (out, measured) = apply_plan(&plan, &input)?;
        let dense_limit = 1usize << 22;
        let matches_dense = if plan.input_len().saturating_mul(plan.output_len()) <= dense_limit {
            let column: Vec<Vec<_>> = input.iter().map(|x| vec![x.clone()]).collect();
            let expect = m.kron_power(a.k).mul_dense(&column)?;
            Some(expect.iter().map(|r| &r[0]).eq(out.iter()))
        } else {
            None
        };
        let stages: Vec<Value> = plan
            .stages
            .iter()
            .map(|s| json!({ "left": s.left, "right": s.right, "input_len": s.input_len(), "output_len": s.output_len(), "cost": s.cost() }))
            .collect();
        let within = measured.linear() <= bound;
        let v = json!({
            "rows": m.rows(),
            "cols": m.cols(),
            "k": a.k,
            "order": if a.reversed { "reversed" } else { "forward" },
            "stages": stages,
            "predicted": predicted,
            "measured": measured,
            "bound": bound.to_string(),
            "within_bound": within,
            "matches_dense": matches_dense,
        });
        Ok(Outcome::checked(pretty(&v), within && matches_dense != Some(false) && measured == predicted))
    }

    fn cw(&self, c: &CwCommand) -> Res<Outcome> {
        self.json_only()?;
        match c {
            CwCommand::Tensor { q } => {
                check_q(*q)?;
                Ok(Outcome::ok(io::tensor_to_json(&cw::cw_tensor(*q, &self.field).without_labels())))
            }
            CwCommand::VerifyBorder { q } => {
                check_q(*q)?;
                let decomp = cw::cw_border_decomp(*q, &self.field);
                let ok = cw::verify_border(&decomp, &cw::cw_tensor(*q, &self.field))?;
                let v = json!({ "q": q, "field": self.field.to_string(), "rank": decomp.rank(), "degree_d": decomp.degree_d()?, "verified": ok });
                Ok(Outcome::checked(pretty(&v), ok))
            }
            CwCommand::Interp { q, k } => {
                check_q(*q)?;
                let res = cw::rank_terms_from_border(*q, *k, &self.field)?;
                let parts = res.weighted_parts();
                let refs: Vec<&BilinearAlgorithm> = parts.iter().collect();
                let combined = fmmlab::bilinear::concat_algorithms(&refs)?;
                let target = cw::cw_tensor(*q, &res.field).without_labels().kron_power(*k)?;
                let ok = combined.verify_computes(&target)?;
                let v = json!({
                    "q": q,
                    "k": k,
                    "field": res.field.to_string(),
                    "degree_d": res.degree_d,
                    "ell": res.ell(),
                    "rank": combined.rank(),
                    "points": res.points.iter().map(|p| p.to_string()).collect::<Vec<_>>(),
                    "weights": res.weights.iter().map(|w| w.to_string()).collect::<Vec<_>>(),
                    "verified": ok,
                });
                Ok(Outcome::checked(pretty(&v), ok))
            }
            CwCommand::Laser(a) => self.laser(a),
            CwCommand::SalemSpencer(a) => salem_spencer_cmd(a),
        }
    }

    fn laser(&self, a: &LaserArgs) -> Res<Outcome> {
        let d = TypeDistribution::parse(&format!("{}:{}", a.q, a.dist))?;
        if d.q == 0 {
            return Err(CliError::Usage("--q must be at least 1".into()));
        }
        let counts = cw::laser_counts(&d);
        let modulus = match a.modulus {
            Some(m) => m,
            None => {
                let qa: u64 = counts.share_y.clone().try_into().map_err(|_| Error::TooLarge(format!("Q_a = {}", counts.share_y)))?;
                2 * qa + 1
            }
        };
        let set = cw::salem_spencer(modulus, method_for(modulus, a.method))?;
        let out = cw::laser_hash_degenerate(&d, &set, None, self.seed)?;
        let verified = if a.no_verify { None } else { Some(cw::verify_laser_output(&d, &out, &self.field)?) };
        let v = json!({
            "distribution": d.to_json(),
            "counts": {
                "blocks": counts.blocks.to_string(),
                "share_x": counts.share_x.to_string(),
                "share_y": counts.share_y.to_string(),
                "share_z": counts.share_z.to_string(),
            },
            "set": set.elements,
            "seed": self.seed,
            "h": out.h(),
            "output": out,
            "verified": verified,
        });
        Ok(Outcome::checked(pretty(&v), verified != Some(false)))
    }

    fn group(&self, a: &GroupArgs) -> Res<Outcome> {
        self.json_only()?;
        let g = AbelianGroup::new(a.factors.clone())?;
        let field = match a.p {
            Some(p) => Field::prime(p)?,
            None if self.field == Field::Rational && g.exponent() > 2 => Field::prime(g.suitable_prime())?,
            None => self.field.clone(),
        };
        let t = group::group_tensor(&g, &field)?;
        let alg = group::group_bilinear(&g, &field)?;
        let ok = alg.verify_computes(&t)?;
        let v = json!({
            "factors": g.factors(),
            "order": g.order(),
            "exponent": g.exponent(),
            "field": field.to_string(),
            "tensor": value(&io::tensor_to_json(&t)),
            "algorithm": value(&io::algorithm_to_json(&alg)),
            "verified": ok,
        });
        Ok(Outcome::checked(pretty(&v), ok))
    }

    fn cost(&self, c: &CostCommand) -> Res<Outcome> {
        let reports: Vec<CostReport> = match c {
            CostCommand::Standard { costs, .. } if costs.len() != 3 => return Err(CliError::Usage("--costs takes three values".into())),
            CostCommand::Standard { n, t, k, costs } => vec![cost::standard_recursion_constant(*n, *t, *k, [costs[0], costs[1], costs[2]])?],
            CostCommand::Rect { n, t, k, t_enc, t_dec } => {
                let parse = |s: &str| {
                    Field::Rational
                        .parse_scalar(s)
                        .map(|v| v.as_rational().expect("rational field").clone())
                        .map_err(|e| CliError::Usage(format!("bad rational {s:?}: {e}")))
                };
                vec![cost::rect_reduction_bound(*n, *t, *k, &parse(t_enc)?, &parse(t_dec)?)?]
            }
            CostCommand::Remark { m, h, k } => vec![cost::remark_optimizer(*m, *h, *k)?],
            CostCommand::Improved { n, c1, c2, c3, omega0 } => vec![cost::improved_constant_bounds(*n, *c1, *c2, *c3, *omega0)?],
            CostCommand::Group { order, h, m, r, r_tg } => vec![cost::group_leading_constant(*order, *h, *m, *r, *r_tg)?],
            CostCommand::AppendixA { n, s, table, convention } => {
                let conv = match convention {
                    Convention::ClosedForm => AppendixConvention::ClosedForm,
                    Convention::ExactChain => AppendixConvention::ExactChain,
                    Convention::ExactChainNatural => AppendixConvention::ExactChainNatural,
                };
                if *table {
                    cost::appendix_a_table(conv)
                } else {
                    let n = n.expect("clap requires --n without --table");
                    vec![cost::appendix_a_exponent(n, s.unwrap_or(n), conv)?]
                }
            }
            CostCommand::Hf { profile: p, log2_m } => vec![cost::omega2_hf(&profile(p)?, *log2_m)?],
            CostCommand::Recurrence { profile: p, log2_m } => vec![cost::omega2_recurrence(&profile(p)?, *log2_m, None)?],
            CostCommand::Asum { shapes, r, omega } => {
                let shapes: Vec<(u64, u64, u64)> = shapes
                    .iter()
                    .map(|s| parse_shape(s).map(|sh| (sh.n as u64, sh.m as u64, sh.d as u64)))
                    .collect::<Res<_>>()?;
                let listed: Vec<String> = shapes.iter().map(|(n, m, d)| format!("{n}x{m}x{d}")).collect();
                let inputs = |extra: Vec<(&'static str, String)>| {
                    let mut v = vec![("shapes", listed.join(" ")), ("r", r.to_string())];
                    v.extend(extra);
                    v
                };
                match omega {
                    Some(w) => {
                        let holds = cost::asymptotic_sum_check(&shapes, *r, *w);
                        vec![report("asymptotic sum holds", "asum_check", &inputs(vec![("omega", w.to_string())]), if holds { 1.0 } else { 0.0 })]
                    }
                    None => vec![report("omega bound", "asum_bisection", &inputs(vec![]), cost::asymptotic_sum_omega(&shapes, *r)?)],
                }
            }
            CostCommand::Elkin { modulus } => {
                let size = cost::elkin_size(*modulus)?;
                let mut rep = report("elkin set size", "elkin_size", &[("M", modulus.to_string())], size.to_string().parse::<f64>().unwrap_or(f64::INFINITY));
                rep.exact = Some(size.to_string());
                vec![rep]
            }
            CostCommand::Schonhage { h, r, n } => {
                let inputs = [("H", h.to_string()), ("r", r.to_string()), ("n", n.to_string())];
                vec![report("omega bound", "schonhage", &inputs, cost::schonhage_omega(*h, *r, *n))]
            }
        };
        match self.format.unwrap_or(Format::Csv) {
            Format::Csv => {
                let mut s = format!("{}\n", CostReport::CSV_HEADER);
                for r in &reports {
                    s.push_str(&r.csv_row());
                    s.push('\n');
                }
                Ok(Outcome::ok(s))
            }
            Format::Json => Ok(Outcome::ok(pretty(&serde_json::to_value(&reports).expect("serialisable")))),
        }
    }

    fn sparse(&self, c: &SparseCommand) -> Res<Outcome> {
        self.json_only()?;
        match c {
            SparseCommand::Factor { input, bound } => {
                let x = io::bit_matrix_from_text(&read(input)?)?;
                let (x1, x2, report) = sparse_factor(&x, *bound);
                let ok = x1.mul(&x2)? == x;
                let v = json!({
                    "x1": value(&io::bit_matrix_to_json(&x1)),
                    "x2": value(&io::bit_matrix_to_json(&x2)),
                    "report": report,
                    "product_matches": ok,
                });
                Ok(Outcome::checked(pretty(&v), ok))
            }
            SparseCommand::Count { t, r, c, enumerate } => {
                let bound = count_bound(*t, *r, *c);
                let mut v = json!({ "t": t, "r": r, "c": c, "bound": bound.to_string() });
                let mut ok = true;
                if *enumerate {
                    if *t > 3 || *r * *c > 9 {
                        return Err(CliError::Usage("enumeration is limited to t ≤ 3 and r·c ≤ 9".into()));
                    }
                    let n = enumerate_slp_matrices(*t as usize, *r as usize, *c as usize);
                    ok = num_bigint::BigUint::from(n) <= bound;
                    v["enumerated"] = json!(n);
                    v["within_bound"] = json!(ok);
                }
                Ok(Outcome::checked(pretty(&v), ok))
            }
        }
    }
}

fn report(label: &str, formula_id: &str, inputs: &[(&str, String)], value: f64) -> CostReport {
    CostReport {
        label: label.into(),
        formula_id: formula_id.into(),
        inputs: inputs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect(),
        value,
        exact: None,
        extra: Default::default(),
    }
}

fn check_q(q: usize) -> Res<()> {
    if q == 0 {
        return Err(CliError::Usage("--q must be at least 1".into()));
    }
    Ok(())
}
