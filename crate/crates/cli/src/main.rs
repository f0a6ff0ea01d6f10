//! Batch command-line interface: analysis, densities, point counts, leading
//! constants and the verification suites, with machine-readable output.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use qcubic::constants;
use qcubic::counting;
use qcubic::density::DensityContext;
use qcubic::error::Error;
use qcubic::qform::{parse_form_file, QuadraticForm};
use qcubic::verify::{self, VerifyBudget};

#[derive(Parser)]
#[command(
    name = "qcubic",
    about = "Exact point counts and local densities for x^3 = Q(y) z",
    version
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Write output here instead of stdout.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Output format for structured reports.
    #[arg(long, global = true, value_enum, default_value_t = Format::Text)]
    format: Format,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Format {
    Text,
    Json,
    Csv,
}

#[derive(Args)]
struct FormArg {
    /// Path to a form file (TOML with `m` and `coefficients`).
    #[arg(long)]
    form: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Invariants, Jordan data at bad primes, locally-determined status.
    Analyze(FormArg),
    /// Local density delta_p(n, Q) as an exact fraction.
    Density {
        #[command(flatten)]
        form: FormArg,
        /// The prime p.
        #[arg(long)]
        prime: u64,
        /// The represented integer n.
        #[arg(long, default_value_t = 1)]
        n: u64,
        /// Also run the enumeration oracle and cross-check.
        #[arg(long)]
        oracle: bool,
    },
    /// Point counts at one height bound.
    Count {
        #[command(flatten)]
        form: FormArg,
        /// Height parameter B (the H* bound for star/direct modes, T for
        /// rational/projective).
        #[arg(long)]
        height: u64,
        #[arg(long, value_enum, default_value_t = CountMode::Star)]
        mode: CountMode,
    },
    /// zeta/L values, Euler products and leading constants.
    Constants {
        #[command(flatten)]
        form: FormArg,
        /// Euler product cutoff.
        #[arg(long, default_value_t = 100_000)]
        cutoff: u64,
    },
    /// Run named verification suites (exit 1 on any failure).
    Verify {
        /// calibration | identities | bounds | counting | all
        #[arg(long, default_value = "all")]
        suite: String,
        /// n-range override for the density batteries.
        #[arg(long)]
        n: Option<u64>,
        /// Euler product cutoff override.
        #[arg(long)]
        cutoff: Option<u64>,
        /// Height-range override for the counting cross-checks.
        #[arg(long)]
        height: Option<u64>,
    },
    /// CSV sweep over a height range: B,n_star,n_rational,n_projective,fit_c2.
    Sweep {
        #[command(flatten)]
        form: FormArg,
        /// Range A:B:STEP of height parameters.
        #[arg(long)]
        height_range: String,
    },
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CountMode {
    Star,
    Direct,
    Rational,
    Projective,
    /// All four counters plus the consistency flags.
    Report,
}

struct Output {
    sink: Box<dyn std::io::Write>,
}

impl Output {
    fn new(path: &Option<PathBuf>) -> Result<Self, Error> {
        let sink: Box<dyn std::io::Write> = match path {
            Some(p) => Box::new(
                std::fs::File::create(p)
                    .map_err(|e| Error::InvalidArgument(format!("cannot open {p:?}: {e}")))?,
            ),
            None => Box::new(std::io::stdout()),
        };
        Ok(Output { sink })
    }

    fn line(&mut self, s: &str) {
        let _ = writeln!(self.sink, "{s}");
        let _ = self.sink.flush();
    }
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::ResourceLimit(_) => 3,
        Error::Parse(_) | Error::InvalidArgument(_) => 2,
        _ => 1,
    }
}

fn load_form(path: &PathBuf) -> Result<QuadraticForm, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Parse(format!("cannot read {path:?}: {e}")))?;
    parse_form_file(&text)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(t)
            .build_global();
    }
    let mut out = match Output::new(&cli.out) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cli, &mut out) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn run(cli: &Cli, out: &mut Output) -> Result<u8, Error> {
    match &cli.command {
        Command::Analyze(f) => cmd_analyze(&load_form(&f.form)?, cli.format, out),
        Command::Density {
            form,
            prime,
            n,
            oracle,
        } => cmd_density(&load_form(&form.form)?, *prime, *n, *oracle, out),
        Command::Count { form, height, mode } => {
            cmd_count(&load_form(&form.form)?, *height, *mode, out)
        }
        Command::Constants { form, cutoff } => {
            cmd_constants(&load_form(&form.form)?, *cutoff, cli.format, out)
        }
        Command::Verify {
            suite,
            n,
            cutoff,
            height,
        } => cmd_verify(suite, *n, *cutoff, *height, out),
        Command::Sweep { form, height_range } => {
            cmd_sweep(&load_form(&form.form)?, height_range, out)
        }
    }
}

fn cmd_analyze(q: &QuadraticForm, format: Format, out: &mut Output) -> Result<u8, Error> {
    let inv = q.invariants();
    let ctx = DensityContext::new(q.clone());
    let ld = ctx.ld_condition()?;

    let mut jordan_lines = Vec::new();
    for p in inv.bad_primes() {
        if p == 2 {
            let j = ctx.jordan_two()?;
            jordan_lines.push(format!(
                "p=2: R={} S={} T={}; diag {:?}; hyper {:?}; plus {:?}",
                j.r_count(),
                j.s_count(),
                j.t_count(),
                j.diag,
                j.hyper,
                j.three
            ));
        } else {
            let j = ctx.jordan_odd(p)?;
            jordan_lines.push(format!("p={p}: blocks (alpha, eps mod p) {:?}", j.blocks));
        }
    }

    match format {
        Format::Json => {
            let witness = ld
                .witness
                .as_ref()
                .map(|w| serde_json::json!({"p": w.p, "r": w.r, "quantity": w.quantity}));
            let v = serde_json::json!({
                "m": q.m(),
                "det_a": inv.det_a as i64,
                "disc": inv.disc as i64,
                "norm": inv.norm,
                "level": inv.level,
                "bad_primes": inv.bad_primes(),
                "jordan": jordan_lines,
                "locally_determined": ld.satisfied,
                "witness": witness,
            });
            out.line(&serde_json::to_string_pretty(&v).unwrap());
        }
        _ => {
            out.line(&format!("m = {}", q.m()));
            out.line(&format!("|A| = {}", inv.det_a));
            out.line(&format!("D = {}", inv.disc));
            out.line(&format!("norm = {}", inv.norm));
            out.line(&format!("level = {}", inv.level));
            out.line(&format!("bad primes = {:?}", inv.bad_primes()));
            for l in &jordan_lines {
                out.line(l);
            }
            out.line(&format!(
                "locally determined (sufficient condition): {}",
                ld.satisfied
            ));
            if let Some(w) = &ld.witness {
                out.line(&format!("witness: p={}, r={}, {}", w.p, w.r, w.quantity));
            }
        }
    }
    Ok(0)
}

fn cmd_density(
    q: &QuadraticForm,
    prime: u64,
    n: u64,
    oracle: bool,
    out: &mut Output,
) -> Result<u8, Error> {
    let ctx = DensityContext::new(q.clone());
    let two_d = 2 * ctx.invariants().disc;
    let value = if two_d.rem_euclid(prime as i128) == 0 {
        ctx.delta_bad(prime, n)?
    } else {
        let nu = qcubic::arith::valuation(n as i64, prime)?.nu;
        ctx.delta_good(prime, nu)?
    };
    out.line(&format!("{value}"));
    if oracle {
        let o = ctx.delta_oracle(prime, n)?;
        out.line(&format!("oracle: {o}"));
        if o != value {
            out.line("MISMATCH between formula and oracle");
            return Ok(1);
        }
    }
    Ok(0)
}

fn cmd_count(
    q: &QuadraticForm,
    height: u64,
    mode: CountMode,
    out: &mut Output,
) -> Result<u8, Error> {
    let v: i64 = match mode {
        CountMode::Star => counting::n_star(q, height)? as i64,
        CountMode::Direct => counting::n_star_direct(q, height)? as i64,
        CountMode::Rational => counting::n_rational_t(q, height)?,
        CountMode::Projective => counting::n_projective_t(q, height)? as i64,
        CountMode::Report => {
            let r = counting::count_report(q, height)?;
            out.line(&format!(
                "B={} n_star={} n_star_direct={} n_rational={} n_projective={} consistent={}",
                r.b, r.n_star, r.n_star_direct, r.n_rational, r.n_projective, r.consistent
            ));
            return Ok(if r.consistent { 0 } else { 1 });
        }
    };
    out.line(&format!("{v}"));
    Ok(0)
}

fn cmd_constants(
    q: &QuadraticForm,
    cutoff: u64,
    format: Format,
    out: &mut Output,
) -> Result<u8, Error> {
    let ctx = DensityContext::new(q.clone());
    let m = q.m();
    let lc = constants::leading_constants(&ctx, cutoff)?;
    let cw = constants::frak_c_w(q, cutoff)?;
    let zeta_m1 = constants::zeta((m - 1) as f64)?;
    let l_half = constants::l_chi_form(m as f64 / 2.0, q)?;

    let mut rows: Vec<(String, f64, f64)> = vec![
        (format!("zeta({})", m - 1), zeta_m1.value, zeta_m1.error),
        (format!("L({}, chi)", m / 2), l_half.value, l_half.error),
        ("C*_Q".into(), lc.c_star.value, lc.c_star.error),
        ("C_Q".into(), lc.c.value, lc.c.error),
        ("C'*_Q".into(), lc.c_prime_star.value, lc.c_prime_star.error),
        ("C'_Q".into(), lc.c_prime.value, lc.c_prime.error),
        ("frak_C_W".into(), cw.result.value, cw.result.error),
    ];
    if let Some(pred) = lc.predicted_nstar_leading {
        let cq = constants::frak_c_q(&ctx, cutoff)?;
        rows.push(("frak_C_Q".into(), cq.result.value, cq.result.error));
        rows.push(("C*_Q frak_C_Q".into(), pred.value, pred.error));
    }

    match format {
        Format::Json => {
            let items: Vec<serde_json::Value> = rows
                .iter()
                .map(|(name, value, err)| {
                    serde_json::json!({
                        "name": name, "value": value, "error_bound": err, "cutoff": cutoff
                    })
                })
                .collect();
            out.line(&serde_json::to_string_pretty(&items).unwrap());
        }
        _ => {
            for (name, value, err) in rows {
                out.line(&format!(
                    "{name} = {value:.12} +- {err:.2e} (cutoff {cutoff})"
                ));
            }
        }
    }
    Ok(0)
}

fn cmd_verify(
    suite: &str,
    n: Option<u64>,
    cutoff: Option<u64>,
    height: Option<u64>,
    out: &mut Output,
) -> Result<u8, Error> {
    let mut budget = VerifyBudget::default();
    if let Some(n) = n {
        budget.density_n_max = n;
        budget.good_n_max = n.min(50);
        budget.varpi_n_max = n * 50;
    }
    if let Some(c) = cutoff {
        budget.euler_cutoff = c;
        budget.dirichlet_n = (c / 10).clamp(100, 10_000);
    }
    if let Some(h) = height {
        budget.count_b_m4 = h;
        budget.count_b_m8 = h.min(8);
        budget.mobius_t = h;
    }

    let suites: Vec<&str> = if suite == "all" {
        verify::SUITES.to_vec()
    } else {
        vec![suite]
    };
    let mut all_passed = true;
    for name in suites {
        let report = verify::run_suite(name, &budget)?;
        for case in &report.cases {
            out.line(&format!(
                "[{}] {} ... {}",
                report.suite,
                case.name,
                if case.passed { "ok" } else { "FAILED" }
            ));
        }
        if let Some(first) = report.first_failure() {
            all_passed = false;
            let msg = serde_json::json!({
                "suite": report.suite,
                "case": first.name,
                "detail": first.detail,
            });
            out.line(&format!("first failure: {msg}"));
        }
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn parse_range(spec: &str) -> Result<Vec<u64>, Error> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::InvalidArgument(format!(
            "height range must be A:B:STEP, got '{spec}'"
        )));
    }
    let nums: Vec<u64> = parts
        .iter()
        .map(|p| {
            p.parse::<u64>()
                .map_err(|e| Error::InvalidArgument(format!("bad range part '{p}': {e}")))
        })
        .collect::<Result<_, _>>()?;
    let (a, b, step) = (nums[0], nums[1], nums[2]);
    if step == 0 || a == 0 || b < a {
        return Err(Error::InvalidArgument(
            "need 0 < A <= B and STEP > 0".into(),
        ));
    }
    Ok((a..=b).step_by(step as usize).collect())
}

fn cmd_sweep(q: &QuadraticForm, range: &str, out: &mut Output) -> Result<u8, Error> {
    let heights = parse_range(range)?;
    let b_max = *heights.last().unwrap();
    let rep = counting::rep_table(q, b_max * b_max)?;
    out.line("B,n_star,n_rational,n_projective,fit_c2");
    let mut bs: Vec<u64> = Vec::new();
    let mut ns: Vec<f64> = Vec::new();
    for &b in &heights {
        let star = counting::n_star_from_table(&rep, b)?;
        let rational = counting::n_rational_from_table(&rep, b)?;
        let projective = counting::n_projective_t(q, b)?;
        bs.push(b);
        ns.push(star as f64);
        let fit = if bs.len() >= 6 {
            match counting::fit_leading(&bs, &ns, q.m()) {
                Ok((c2, _, _, _)) => format!("{c2:.6}"),
                Err(_) => String::new(),
            }
        } else {
            String::new()
        };
        let mut row = String::new();
        let _ = write!(row, "{b},{star},{rational},{projective},{fit}");
        out.line(&row);
    }
    Ok(0)
}
