use clap::{Args, Parser, Subcommand, ValueEnum};
use num_complex::Complex64;
use qconv::analytic::certify_bounds;
use qconv::convolution::{convolve_at, ConvStatus, ConvolutionResult};
use qconv::deriv::Point;
use qconv::fourier::{fourier_integral, fourier_series, FourierResult};
use qconv::lattice::{Lattice, LatticeFunction, Parity, Status, Table};
use qconv::moments::{classify_type, moment_sequence, pointwise_decay_check, MomentSequence, TypeKind};
use qconv::qcore::QContext;
use qconv::special::{eval_special, hermite_ii, kernel_k, rodrigues_gaussian_derivative, SpecialFunction, SpecialKind};
use qconv::verify::{self, VerifyConfig};
use qconv::QError;
use serde_json::{json, Value};
use std::path::PathBuf;
use std::process::ExitCode;

/// Numerical q-convolution calculus on geometric lattices.
#[derive(Parser)]
#[command(name = "qconv", version, about)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a function at points, or sample it on the lattice as CSV.
    Eval(EvalArgs),
    /// Run the identity-verification suite (JSON on stdout, table on stderr).
    Verify(VerifyArgs),
    /// Pointwise value of f * g.
    Convolve(ConvolveArgs),
    /// The q-Fourier transform at given y.
    Fourier(FourierArgs),
    /// Moment sequence μ_e, ν_e for e = 0..=E.
    Moments(MomentsArgs),
    /// Fit the growth type of the moments, or certify derivative bounds.
    Classify(ClassifyArgs),
}

#[derive(Args, Clone)]
struct Common {
    /// Base q, strictly inside (0, 1).
    #[arg(long, default_value_t = 0.5)]
    q: f64,
    /// Lattice parameter γ > 0.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Relative tail tolerance for series and lattice sums.
    #[arg(long)]
    tol: Option<f64>,
    /// Hard cap on terms of any series or product.
    #[arg(long)]
    max_terms: Option<usize>,
    /// Emit JSON (the default for everything but `eval`).
    #[arg(long, conflicts_with = "table")]
    json: bool,
    /// Bare: emit a human-readable table. With a path: read the input
    /// function from a CSV lattice table (header epsilon,k,re,im).
    #[arg(long, num_args = 0..=1, value_name = "CSV")]
    table: Option<Option<PathBuf>>,
}

impl Common {
    fn ctx(&self) -> Result<QContext, QError> {
        let mut ctx = QContext::new(self.q)?;
        if let Some(t) = self.tol {
            ctx = ctx.with_tol(t)?;
        }
        if let Some(m) = self.max_terms {
            ctx = ctx.with_max_terms(m)?;
        }
        Lattice::new(self.gamma)?;
        Ok(ctx)
    }

    fn table_path(&self) -> Option<&PathBuf> {
        self.table.as_ref().and_then(|t| t.as_ref())
    }

    fn human(&self) -> bool {
        matches!(self.table, Some(None))
    }
}

#[derive(Args)]
struct EvalArgs {
    #[command(flatten)]
    common: Common,
    /// Function: eq, Eq, gauss_e, gauss_E, gauss_cal, gm:M, alt, strip:C,
    /// hermite2 (with --k), rodrigues (with --k), kernel (with --t).
    #[arg(long = "fn", value_name = "NAME[:PARAM]")]
    func: Option<String>,
    /// Points, e.g. 0.5, -2, i, 1+2i.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x: Vec<String>,
    /// Degree for hermite2 / derivative order for rodrigues.
    #[arg(long)]
    k: Option<usize>,
    /// First argument t of kernel(t, x).
    #[arg(long, allow_hyphen_values = true)]
    t: Option<String>,
    /// Write the function on ±q^kγ, K_LO <= k <= K_HI, as CSV.
    #[arg(long, value_name = "K_LO:K_HI", allow_hyphen_values = true)]
    sample: Option<String>,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: Common,
    /// Glob over check ids or families, e.g. `momentconvo` or `*.value-at-i`.
    #[arg(long)]
    only: Option<String>,
}

#[derive(Args)]
struct ConvolveArgs {
    #[command(flatten)]
    common: Common,
    /// Left factor; only its moments enter.
    #[arg(long = "f", value_name = "NAME[:PARAM]")]
    f: String,
    /// Right factor (or pass --table CSV).
    #[arg(long = "g", value_name = "NAME[:PARAM]")]
    g: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    x: Vec<String>,
    /// Moments of f to use (default grows as q → 1).
    #[arg(long = "E")]
    order: Option<usize>,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormArg {
    Integral,
    Series,
    Both,
}

#[derive(Args)]
struct FourierArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "fn", value_name = "NAME[:PARAM]")]
    func: Option<String>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
    y: Vec<String>,
    #[arg(long, value_enum, default_value_t = FormArg::Both)]
    form: FormArg,
    /// Moments used by the series form.
    #[arg(long = "E", default_value_t = 80)]
    order: usize,
}

#[derive(Args)]
struct MomentsArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "fn", value_name = "NAME[:PARAM]")]
    func: Option<String>,
    /// Highest moment order.
    #[arg(long = "E", default_value_t = 12)]
    order: usize,
}

#[derive(Args)]
struct ClassifyArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long = "fn", value_name = "NAME[:PARAM]")]
    func: Option<String>,
    /// Fit the strict moments ν_e instead of |μ_e|.
    #[arg(long)]
    strict: bool,
    /// Moments used by the fit.
    #[arg(long = "E", default_value_t = 120)]
    order: usize,
    /// Also fit the pointwise decay exponent at ±q^{-j}γ.
    #[arg(long)]
    decay: bool,
    /// Certify |∂^k g| <= C r^k k!-type bounds instead of fitting a type.
    #[arg(long)]
    certify: bool,
    #[arg(long, requires = "certify")]
    r: Option<f64>,
    #[arg(long = "C", requires = "certify")]
    c: Option<f64>,
    #[arg(long, default_value_t = 8)]
    k_max: usize,
}

/// What went wrong, mapped onto the exit code.
enum Failure {
    Input(QError),
    Numeric(String),
}

impl From<QError> for Failure {
    fn from(e: QError) -> Self {
        if e.is_numeric() {
            Failure::Numeric(format!("{}: {e}", e.name()))
        } else {
            Failure::Input(e)
        }
    }
}

type CmdResult = Result<ExitCode, Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let res = match cli.cmd {
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Verify(a) => cmd_verify(a),
        Cmd::Convolve(a) => cmd_convolve(a),
        Cmd::Fourier(a) => cmd_fourier(a),
        Cmd::Moments(a) => cmd_moments(a),
        Cmd::Classify(a) => cmd_classify(a),
    };
    match res {
        Ok(code) => code,
        Err(Failure::Input(e)) => {
            eprintln!("error: {}: {e}", e.name());
            ExitCode::from(2)
        }
        Err(Failure::Numeric(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn parse_points(xs: &[String]) -> Result<Vec<Complex64>, QError> {
    xs.iter()
        .map(|s| s.trim().parse::<Complex64>().map_err(|_| QError::Parse(format!("not a number: {s:?}"))))
        .collect()
}

fn g17(x: f64) -> String {
    format!("{x:.16e}")
}

fn print_json(v: &Value) {
    println!("{}", serde_json::to_string_pretty(v).expect("serialisable"));
}

fn numeric_exit(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(3)
    } else {
        ExitCode::SUCCESS
    }
}

/// The input function: a built-in name or a CSV table from --table.
fn load(name: Option<&str>, common: &Common, ctx: &QContext) -> Result<LatticeFunction, QError> {
    match (name, common.table_path()) {
        (Some(_), Some(_)) => Err(QError::Parse("give either --fn or --table CSV, not both".into())),
        (Some(n), None) => SpecialFunction::new(n.parse()?, ctx).on_lattice(common.gamma),
        (None, Some(path)) => {
            let file = std::fs::File::open(path).map_err(|e| QError::Parse(format!("{}: {e}", path.display())))?;
            let t = Table::read_csv(file, common.gamma)?;
            Ok(LatticeFunction::table(path.display().to_string(), t, Parity::None))
        }
        (None, None) => Err(QError::Parse("no input function: pass --fn NAME or --table CSV".into())),
    }
}

/// Value of f at x: lattice points go through the lattice representation,
/// anything else needs a rule defined off the lattice.
fn value_at(f: &LatticeFunction, x: Complex64, ctx: &QContext) -> Result<Complex64, QError> {
    match Lattice::new(f.gamma())?.locate(x, ctx) {
        Some(p) => f.eval_at(&p).map(|s| s.to_c64()),
        None => f.eval(x),
    }
}

fn point_for(f: &LatticeFunction, x: Complex64, ctx: &QContext) -> Result<Point, QError> {
    Ok(match Lattice::new(f.gamma())?.locate(x, ctx) {
        Some(p) => Point::Lattice(p),
        None => Point::Complex(x),
    })
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    let ctx = a.common.ctx()?;
    if let Some(range) = &a.sample {
        let (lo, hi) = range
            .split_once(':')
            .and_then(|(l, h)| Some((l.parse::<i64>().ok()?, h.parse::<i64>().ok()?)))
            .filter(|(l, h)| l <= h)
            .ok_or_else(|| QError::Parse(format!("--sample wants K_LO:K_HI, got {range:?}")))?;
        let f = load(a.func.as_deref(), &a.common, &ctx)?;
        let t = Table::sample(&f, a.common.gamma, lo, hi, &ctx)?;
        t.write_csv(std::io::stdout().lock())?;
        return Ok(ExitCode::SUCCESS);
    }
    if a.x.is_empty() {
        return Err(QError::Parse("eval needs --x or --sample".into()).into());
    }
    let xs = parse_points(&a.x)?;
    let name = a.func.as_deref();
    let need_k = || a.k.ok_or_else(|| QError::Parse("this function needs --k".into()));
    let values: Vec<Complex64> = match name {
        Some("hermite2") => {
            let k = need_k()?;
            xs.iter().map(|&x| hermite_ii(k, x, &ctx)).collect()
        }
        Some("rodrigues") => {
            let k = need_k()?;
            xs.iter().map(|&x| rodrigues_gaussian_derivative(k, x, &ctx)).collect::<Result<_, _>>()?
        }
        Some("kernel") => {
            let t = a.t.as_deref().ok_or_else(|| QError::Parse("kernel needs --t".into()))?;
            let t = parse_points(&[t.to_string()])?[0];
            xs.iter().map(|&x| kernel_k(t, x, &ctx)).collect::<Result<_, _>>()?
        }
        Some(n) if a.common.table_path().is_none() => {
            let kind: SpecialKind = n.parse()?;
            let sf = SpecialFunction::new(kind, &ctx);
            if kind.analyticity() == qconv::lattice::Analyticity::LatticeOnly {
                let f = sf.on_lattice(a.common.gamma)?;
                xs.iter().map(|&x| value_at(&f, x, &ctx)).collect::<Result<_, _>>()?
            } else {
                xs.iter().map(|&x| eval_special(&sf, x)).collect::<Result<_, _>>()?
            }
        }
        _ => {
            let f = load(name, &a.common, &ctx)?;
            xs.iter().map(|&x| value_at(&f, x, &ctx)).collect::<Result<_, _>>()?
        }
    };
    if a.common.json {
        let rows: Vec<Value> =
            xs.iter().zip(&values).map(|(x, v)| json!({"x_re": x.re, "x_im": x.im, "re": v.re, "im": v.im})).collect();
        print_json(&json!({ "q": ctx.q, "gamma": a.common.gamma, "values": rows }));
    } else {
        for v in &values {
            println!("{} {}", g17(v.re), g17(v.im));
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(a: VerifyArgs) -> CmdResult {
    let cfg = VerifyConfig {
        q: a.common.q,
        gamma: a.common.gamma,
        tail_rel_tol: a.common.tol,
        max_terms: a.common.max_terms,
        only: a.only.clone(),
    };
    let report = verify::run(&cfg)?;
    print_json(&report.to_json());
    eprint!("{}", report.table());
    Ok(if report.passed() { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn conv_json(x: Complex64, r: &ConvolutionResult) -> Value {
    json!({
        "x_re": x.re, "x_im": x.im,
        "re": r.value.re, "im": r.value.im,
        "status": r.status,
        "terms_used": r.terms_used,
        "tail_bound": r.tail_bound,
    })
}

fn default_order(ctx: &QContext) -> usize {
    ((30.0 / (-ctx.ln_q()).sqrt()).ceil() as usize).clamp(40, 200)
}

fn cmd_convolve(a: ConvolveArgs) -> CmdResult {
    let ctx = a.common.ctx()?;
    let gamma = a.common.gamma;
    let f = SpecialFunction::new(a.f.parse()?, &ctx).on_lattice(gamma)?;
    let g = load(a.g.as_deref(), &a.common, &ctx)?;
    let fm = moment_sequence(&f, a.order.unwrap_or_else(|| default_order(&ctx)), gamma, &ctx)?;
    if !fm.all_converged() {
        return Err(Failure::Numeric(format!("moments of {} did not converge", a.f)));
    }
    let xs = parse_points(&a.x)?;
    let mut rows = Vec::new();
    let mut failed = false;
    for &x in &xs {
        let r = convolve_at(&fm, &g, point_for(&g, x, &ctx)?, &ctx)?;
        failed |= r.status != ConvStatus::Converged;
        rows.push((x, r));
    }
    if a.common.human() {
        println!("{:>24} {:>24} {:>24} {:>16} {:>6}", "x", "re", "im", "status", "terms");
        for (x, r) in &rows {
            println!("{:>24} {:>24} {:>24} {:>16} {:>6}", x.to_string(), g17(r.value.re), g17(r.value.im), format!("{:?}", r.status), r.terms_used);
        }
    } else {
        let results: Vec<Value> = rows.iter().map(|(x, r)| conv_json(*x, r)).collect();
        print_json(&json!({ "f": a.f, "g": g.label(), "q": ctx.q, "gamma": gamma, "moments_used": fm.max_order() + 1, "results": results }));
    }
    Ok(numeric_exit(failed))
}

fn fourier_json(y: Complex64, r: &FourierResult) -> Value {
    json!({ "y_re": y.re, "y_im": y.im, "form": r.form, "re": r.value.re, "im": r.value.im, "status": r.status })
}

fn cmd_fourier(a: FourierArgs) -> CmdResult {
    let ctx = a.common.ctx()?;
    let gamma = a.common.gamma;
    let f = load(a.func.as_deref(), &a.common, &ctx)?;
    let ys = parse_points(&a.y)?;
    let ms = match a.form {
        FormArg::Series | FormArg::Both => Some(moment_sequence(&f, a.order, gamma, &ctx)?),
        FormArg::Integral => None,
    };
    let mut rows = Vec::new();
    for &y in &ys {
        if matches!(a.form, FormArg::Integral | FormArg::Both) {
            rows.push((y, fourier_integral(&f, gamma, y, &ctx)?));
        }
        if let Some(ms) = &ms {
            rows.push((y, fourier_series(ms, y, &ctx)?));
        }
    }
    let failed = rows.iter().any(|(_, r)| r.status != Status::Converged);
    if a.common.human() {
        println!("{:>24} {:>9} {:>24} {:>24} {:>10}", "y", "form", "re", "im", "status");
        for (y, r) in &rows {
            println!("{:>24} {:>9} {:>24} {:>24} {:>10}", y.to_string(), format!("{:?}", r.form), g17(r.value.re), g17(r.value.im), format!("{:?}", r.status));
        }
    } else {
        let results: Vec<Value> = rows.iter().map(|(y, r)| fourier_json(*y, r)).collect();
        print_json(&json!({ "function": f.label(), "q": ctx.q, "gamma": gamma, "results": results }));
    }
    Ok(numeric_exit(failed))
}

fn moments_table(ms: &MomentSequence) -> String {
    let mut s = format!("{:>4} {:>24} {:>24} {:>24} {:>10}\n", "e", "mu_re", "mu_im", "nu", "status");
    for en in &ms.entries {
        let mu = en.mu.to_c64();
        s += &format!("{:>4} {:>24} {:>24} {:>24} {:>10?}\n", en.e, g17(mu.re), g17(mu.im), g17(en.nu.norm_f64()), en.status);
    }
    s
}

fn cmd_moments(a: MomentsArgs) -> CmdResult {
    let ctx = a.common.ctx()?;
    let f = load(a.func.as_deref(), &a.common, &ctx)?;
    let ms = moment_sequence(&f, a.order, a.common.gamma, &ctx)?;
    if a.common.human() {
        print!("{}", moments_table(&ms));
    } else {
        print_json(&ms.to_json());
    }
    Ok(numeric_exit(!ms.all_converged()))
}

fn cmd_classify(a: ClassifyArgs) -> CmdResult {
    let ctx = a.common.ctx()?;
    let gamma = a.common.gamma;
    let f = load(a.func.as_deref(), &a.common, &ctx)?;
    if a.certify {
        let r = a.r.ok_or_else(|| QError::Parse("--certify needs --r".into()))?;
        let c = a.c.ok_or_else(|| QError::Parse("--certify needs --C".into()))?;
        let cert = certify_bounds(&f, r, c, a.k_max, &ctx)?;
        if a.common.human() {
            println!("r = {r}, C = {c}, k_max = {}: {} (worst ratio {:.6e})", a.k_max, if cert.holds { "holds" } else { "fails" }, cert.worst_ratio);
        } else {
            print_json(&cert.to_json());
        }
        return Ok(ExitCode::SUCCESS);
    }
    let ms = moment_sequence(&f, a.order, gamma, &ctx)?;
    if !ms.all_converged() {
        return Err(Failure::Numeric(format!("moments of {} did not all converge", f.label())));
    }
    let kind = if a.strict { TypeKind::StrictLeft } else { TypeKind::Left };
    let t = classify_type(&ms, kind)?;
    let decay = if a.decay { Some(pointwise_decay_check(&f, gamma, 60, &ctx)?) } else { None };
    if a.common.human() {
        println!("{:?} type: alpha = {:.6}, b = {:.6}, residual {:.3e}", t.kind, t.alpha_hat, t.b_hat, t.residual);
        if let Some(d) = decay {
            println!("pointwise decay: beta = {:.6}, implied alpha = {:.6}", d.beta_hat, d.alpha_implied);
        }
    } else {
        let mut v = json!({ "function": f.label(), "q": ctx.q, "gamma": gamma, "moments_used": a.order + 1, "classification": t });
        if let Some(d) = decay {
            v["decay"] = json!(d);
        }
        print_json(&v);
    }
    Ok(ExitCode::SUCCESS)
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Input(QError::Parse(e.to_string()))
    }
}
