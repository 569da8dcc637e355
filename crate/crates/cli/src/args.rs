use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "fmmlab", version, about = "Exact bilinear matrix multiplication laboratory")]
pub struct Cli {
    /// Scalar field: rational, fp:<p> or fpext:<p>:<deg>.
    #[arg(long, global = true, default_value = "rational")]
    pub field: String,
    /// Seed for every random choice.
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Write the main output here instead of standard output.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Output format; each command has its own default.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Multiply two matrices with one of the engines.
    Multiply(MultiplyArgs),
    /// Check that an algorithm computes a tensor.
    Verify(VerifyArgs),
    /// Plan and measure the Kronecker power of a sparse matrix.
    Kron(KronArgs),
    /// Coppersmith–Winograd tensors, border rank and laser degeneration.
    #[command(subcommand)]
    Cw(CwCommand),
    /// Group-algebra tensor of a finite abelian group and its DFT algorithm.
    Group(GroupArgs),
    /// Evaluate a cost formula.
    #[command(subcommand)]
    Cost(CostCommand),
    /// F₂ sparse factorisation tools.
    #[command(subcommand)]
    Sparse(SparseCommand),
    /// A three-term-progression-free subset of Z_M.
    SalemSpencer(SalemSpencerArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Engine {
    Naive,
    Recursive,
    Rect,
    Simultaneous,
    Algorithm,
}

#[derive(Args, Debug)]
pub struct MultiplyArgs {
    #[arg(long, value_enum, default_value = "recursive")]
    pub engine: Engine,
    /// Algorithm JSON with a shape; Strassen over --field when omitted.
    #[arg(long)]
    pub alg: Option<PathBuf>,
    /// Recursion depth; the smallest that fits the inputs when omitted.
    #[arg(long)]
    pub k: Option<u32>,
    /// Copies H in the direct-sum algorithm (simultaneous and algorithm engines).
    #[arg(long, default_value_t = 2)]
    pub copies: usize,
    /// Tiled backend depth for the rect engine; 0 uses the naive backend.
    #[arg(long, default_value_t = 0)]
    pub tile_levels: u32,
    /// Reversed stage order for the recursive engine.
    #[arg(long)]
    pub reversed: bool,
    /// Write the per-level cost breakdown as CSV to this path.
    #[arg(long)]
    pub trace: Option<PathBuf>,
    /// Matrices as JSON or CSV: A B for one product, A1 B1 A2 B2 … for the
    /// simultaneous engine.
    #[arg(required = true, num_args = 2..)]
    pub inputs: Vec<PathBuf>,
}

#[derive(Args, Debug)]
pub struct VerifyArgs {
    #[arg(long)]
    pub alg: PathBuf,
    /// Target tensor JSON; the algorithm's matmul shape when omitted.
    #[arg(long, conflicts_with = "shape")]
    pub tensor: Option<PathBuf>,
    /// Target ⟨n,m,d⟩ as n,m,d.
    #[arg(long)]
    pub shape: Option<String>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Part {
    EncX,
    EncY,
    DecZ,
}

#[derive(Args, Debug)]
pub struct KronArgs {
    /// Algorithm JSON; Strassen over --field when neither input is given.
    #[arg(long, conflicts_with = "matrix")]
    pub alg: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "enc-x")]
    pub part: Part,
    /// Sparse matrix JSON with an explicit field.
    #[arg(long)]
    pub matrix: Option<PathBuf>,
    #[arg(long)]
    pub k: u32,
    #[arg(long)]
    pub reversed: bool,
}

#[derive(Subcommand, Debug)]
pub enum CwCommand {
    /// CW_q as tensor JSON.
    Tensor {
        #[arg(long)]
        q: usize,
    },
    /// Check the border decomposition of CW_q.
    VerifyBorder {
        #[arg(long)]
        q: usize,
    },
    /// Interpolate CW_q^{⊗k} from specialised border decompositions.
    Interp {
        #[arg(long)]
        q: usize,
        #[arg(long)]
        k: u32,
    },
    /// Hash-and-prune degeneration of a type distribution.
    Laser(LaserArgs),
    /// A progression-free set modulo M.
    SalemSpencer(SalemSpencerArgs),
}

#[derive(Args, Debug)]
pub struct LaserArgs {
    #[arg(long)]
    pub q: u64,
    /// Block counts aN,bN,cN,L1,L2,L3.
    #[arg(long)]
    pub dist: String,
    /// Hash modulus; 2·Q_a+1 when omitted.
    #[arg(long = "M")]
    pub modulus: Option<u64>,
    #[arg(long, value_enum)]
    pub method: Option<SsMethod>,
    /// Skip the entry-level check against CW_q^{⊗P}.
    #[arg(long)]
    pub no_verify: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SsMethod {
    Exhaustive,
    Behrend,
}

#[derive(Args, Debug)]
pub struct SalemSpencerArgs {
    #[arg(long = "M")]
    pub modulus: u64,
    /// Exhaustive for M ≤ 30, Behrend otherwise, when omitted.
    #[arg(long, value_enum)]
    pub method: Option<SsMethod>,
}

#[derive(Args, Debug)]
pub struct GroupArgs {
    /// Cyclic factor orders, e.g. 4,2.
    #[arg(long, value_delimiter = ',', required = true)]
    pub factors: Vec<u64>,
    /// Work over F_p; overrides --field. The smallest p ≡ 1 mod the
    /// exponent is used when neither is given.
    #[arg(long)]
    pub p: Option<u64>,
}

#[derive(Subcommand, Debug)]
pub enum CostCommand {
    /// Leading constant of plain recursion on ⟨n,n,n⟩ of rank t.
    Standard {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        k: u32,
        /// Linear costs of the encoders and decoder, as a,b,c.
        #[arg(long, value_delimiter = ',', required = true)]
        costs: Vec<u64>,
    },
    /// Rectangular-reduction bound.
    Rect {
        #[arg(long)]
        n: u64,
        #[arg(long)]
        t: u64,
        #[arg(long)]
        k: u32,
        #[arg(long)]
        t_enc: String,
        #[arg(long)]
        t_dec: String,
    },
    /// Optimised log-constant for m, H, k.
    Remark {
        #[arg(long)]
        m: f64,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        k: u32,
    },
    /// Bounds on the improved leading constant.
    Improved {
        #[arg(long)]
        n: f64,
        #[arg(long)]
        c1: f64,
        #[arg(long)]
        c2: f64,
        #[arg(long)]
        c3: f64,
        #[arg(long)]
        omega0: f64,
    },
    /// Leading constant of the group method.
    Group {
        #[arg(long)]
        order: f64,
        #[arg(long)]
        h: f64,
        #[arg(long)]
        m: f64,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        r_tg: f64,
    },
    /// Exponent from the explicit Salem–Spencer construction.
    AppendixA {
        #[arg(long, required_unless_present = "table")]
        n: Option<u64>,
        /// S; equal to N when omitted.
        #[arg(long)]
        s: Option<u64>,
        /// The four reference rows N = S ∈ {10, 100, 250, 1000}.
        #[arg(long)]
        table: bool,
        #[arg(long, value_enum, default_value = "closed-form")]
        convention: Convention,
    },
    /// The exponent sum h_f(m) for a rank profile.
    Hf {
        /// constant:<e>, factor:<a> or polylog:<c>.
        #[arg(long)]
        profile: String,
        #[arg(long)]
        log2_m: f64,
    },
    /// Unrolled ω = 2 recurrence.
    Recurrence {
        #[arg(long)]
        profile: String,
        #[arg(long)]
        log2_m: f64,
    },
    /// Asymptotic sum inequality: check at --omega, or solve by bisection.
    Asum {
        /// Shapes n x m x d, comma separated, e.g. 2x2x2,3x3x3.
        #[arg(long, value_delimiter = ',', required = true)]
        shapes: Vec<String>,
        #[arg(long)]
        r: f64,
        #[arg(long)]
        omega: Option<f64>,
    },
    /// Size of Elkin's progression-free set modulo M.
    Elkin {
        #[arg(long = "M")]
        modulus: u64,
    },
    /// Exponent from H disjoint copies of ⟨n,n,n⟩ of total rank r.
    Schonhage {
        #[arg(long)]
        h: u64,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        n: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Convention {
    ClosedForm,
    ExactChain,
    ExactChainNatural,
}

#[derive(Subcommand, Debug)]
pub enum SparseCommand {
    /// Factor X = X₁·X₂ over F₂ by peeling dependent rows.
    Factor {
        /// JSON {"rows","cols","data"} or dense 0/1 text.
        #[arg(long = "in")]
        input: PathBuf,
        /// Largest dependency searched; ⌈2c/log₂c⌉ when omitted.
        #[arg(long)]
        bound: Option<usize>,
    },
    /// Counting bound on matrices with t-addition straight-line programs.
    Count {
        #[arg(long)]
        t: u32,
        #[arg(long)]
        r: u64,
        #[arg(long)]
        c: u64,
        /// Also enumerate the programs exhaustively.
        #[arg(long)]
        enumerate: bool,
    },
}
