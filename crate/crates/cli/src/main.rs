//! `refwalk`: tail analysis of reflected random walks from the command line.

mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use refwalk::asymptotics::{asymptotic_estimate, tail_constants, ConstantsOptions};
use refwalk::barrier::Finiteness;
use refwalk::estimators::{
    d_distribution_dp, tail_dp, tail_dp_converged, tail_is, tail_naive, write_estimates_csv, Method, DEFAULT_PRUNE_TOL,
};
use refwalk::rna::{k_star, p_value_band, scan_reflected};
use refwalk::walk::{simulate_tilted_trajectory, simulate_trajectory, DEFAULT_CAP};
use refwalk::{Barrier, Error, IncrementModel, PenaltyFunction, RandomStream, ScoreFunction, TailEstimate};

use report::{print_json, print_pairs, print_table, sci, write_file, McArgs, OutputArgs};

#[derive(Debug, Parser)]
#[command(name = "refwalk", version, about = "Tail of the maximum of a random walk reflected at a barrier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Adjustment coefficient, tilted law and finiteness verdict.
    Analyze(AnalyzeArgs),
    /// Estimates of P(M > u) over a grid of levels.
    Tail(TailArgs),
    /// The asymptotic constants E*[exp(theta* D)] and E*[exp(-theta* B)].
    Constants(ConstantsArgs),
    /// One trajectory of the reflected walk.
    Simulate(SimulateArgs),
    /// Exact lattice dynamic programs for the tail and the law of D.
    Oracle(OracleArgs),
    /// Stack scoring of nucleotide sequences.
    #[command(subcommand)]
    Rna(RnaCommand),
}

#[derive(Debug, Args, Serialize)]
struct ModelArgs {
    /// Increment law: table:v1:p1,v2:p2,... or gauss:mu=..,sigma=..
    #[arg(long)]
    dist: String,
    /// Barrier: zero, free, linear:alpha=.., log:rho=.., or table:<csv path>.
    #[arg(long, default_value = "free")]
    barrier: String,
}

impl ModelArgs {
    fn parse(&self) -> Result<(IncrementModel, Barrier)> {
        let model: IncrementModel = self.dist.parse().with_context(|| format!("--dist {:?}", self.dist))?;
        let barrier = Barrier::parse_spec(&self.barrier).with_context(|| format!("--barrier {:?}", self.barrier))?;
        Ok((model, barrier))
    }
}

#[derive(Debug, Args, Serialize)]
struct AnalyzeArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Root tolerance on |mgf(theta) - 1|.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct TailArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Levels: comma list and/or ranges start:stop[:step].
    #[arg(long)]
    u: String,
    /// Methods, comma separated: is, naive, dp, asymptotic.
    #[arg(long, default_value = "is")]
    method: String,
    #[arg(long, default_value_t = 10_000)]
    n_samples: u64,
    /// Horizon for naive and dp; dp runs to convergence when omitted.
    #[arg(long)]
    horizon: Option<u64>,
    /// Step cap per importance-sampling path.
    #[arg(long, default_value_t = DEFAULT_CAP)]
    cap: u64,
    /// Convergence tolerance for dp and the constants.
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Path cut-off for Monte Carlo barrier constants.
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[command(flatten)]
    #[serde(flatten)]
    mc: McArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct ConstantsArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100_000)]
    n_samples: u64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    /// Level for the Monte Carlo overshoot factor.
    #[arg(long, default_value_t = 20.0)]
    u_ref: f64,
    #[command(flatten)]
    #[serde(flatten)]
    mc: McArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct SimulateArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    #[arg(long, default_value_t = 100)]
    horizon: usize,
    /// Draw increments from the tilted law.
    #[arg(long)]
    tilted: bool,
    #[command(flatten)]
    #[serde(flatten)]
    mc: McArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct OracleArgs {
    #[command(flatten)]
    #[serde(flatten)]
    model: ModelArgs,
    /// Levels: comma list and/or ranges start:stop[:step].
    #[arg(long)]
    u: Option<String>,
    /// Fixed horizon; runs to convergence when omitted.
    #[arg(long)]
    horizon: Option<u64>,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    /// Also compute the law of D.
    #[arg(long)]
    d_law: bool,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

#[derive(Debug, Subcommand)]
enum RnaCommand {
    /// The best loop-penalized stack of one sequence.
    Scan(RnaScanArgs),
    /// Significance curve for sequences of length n.
    Pvalue(RnaPvalueArgs),
}

#[derive(Debug, Args, Serialize)]
struct ScoringArgs {
    /// Pair scores: wc, or 16 comma-separated numbers (rows a,c,g,u).
    #[arg(long, default_value = "wc")]
    scores: String,
    /// Loop penalty: zero, linear:beta=.., or table:p0,p1,...
    #[arg(long, default_value = "zero")]
    penalty: String,
}

impl ScoringArgs {
    fn parse(&self) -> Result<(ScoreFunction, PenaltyFunction)> {
        let f: ScoreFunction = self.scores.parse().with_context(|| format!("--scores {:?}", self.scores))?;
        let p = PenaltyFunction::parse_spec(&self.penalty).with_context(|| format!("--penalty {:?}", self.penalty))?;
        Ok((f, p))
    }
}

#[derive(Debug, Args, Serialize)]
struct RnaScanArgs {
    /// Sequence text.
    #[arg(long, conflicts_with = "file")]
    seq: Option<String>,
    /// Plain or FASTA file.
    #[arg(long)]
    file: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    scoring: ScoringArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

#[derive(Debug, Args, Serialize)]
struct RnaPvalueArgs {
    /// Sequence length.
    #[arg(long)]
    n: usize,
    /// Levels: comma list and/or ranges start:stop[:step].
    #[arg(long)]
    u: String,
    #[command(flatten)]
    #[serde(flatten)]
    scoring: ScoringArgs,
    /// Letter probabilities for a,c,g,u.
    #[arg(long, default_value = "0.25,0.25,0.25,0.25")]
    base: String,
    #[arg(long, default_value_t = 100_000)]
    n_samples: u64,
    #[arg(long, default_value_t = 1e-12)]
    tol: f64,
    #[arg(long, default_value_t = 1e-10)]
    eps: f64,
    #[command(flatten)]
    #[serde(flatten)]
    mc: McArgs,
    #[command(flatten)]
    #[serde(skip)]
    out: OutputArgs,
}

/// Successful run whose verdict leaves the maximum possibly infinite.
const EXIT_VERDICT: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli.command) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            match e.downcast_ref::<Error>() {
                Some(Error::InfiniteByCriterion(_)) => ExitCode::from(EXIT_VERDICT),
                _ => ExitCode::from(1),
            }
        }
    }
}

fn run(command: Command) -> Result<u8> {
    match command {
        Command::Analyze(a) => cmd_analyze(a),
        Command::Tail(a) => cmd_tail(a),
        Command::Constants(a) => cmd_constants(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Oracle(a) => cmd_oracle(a),
        Command::Rna(RnaCommand::Scan(a)) => cmd_rna_scan(a),
        Command::Rna(RnaCommand::Pvalue(a)) => cmd_rna_pvalue(a),
    }
}

/// Parses `1,2,5` and `0:30`, `0:1:0.25` style ranges (stop inclusive).
fn parse_grid(spec: &str) -> Result<Vec<f64>> {
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let fields: Vec<&str> = part.split(':').collect();
        let num = |s: &str| s.trim().parse::<f64>().with_context(|| format!("bad level {s:?} in {spec:?}"));
        match fields.as_slice() {
            [x] => out.push(num(x)?),
            [a, b] | [a, b, _] => {
                let (a, b) = (num(a)?, num(b)?);
                let step = if fields.len() == 3 { num(fields[2])? } else { 1.0 };
                if step.is_nan() || step <= 0.0 {
                    bail!("range step must be positive in {part:?}");
                }
                let count = ((b - a) / step + 1e-9).floor();
                if count < 0.0 {
                    bail!("empty range {part:?}");
                }
                out.extend((0..=count as u64).map(|k| a + k as f64 * step));
            }
            _ => bail!("bad level range {part:?}"),
        }
    }
    if out.is_empty() {
        bail!("no levels given");
    }
    Ok(out)
}

fn verdict_code(class: Finiteness) -> u8 {
    if class == Finiteness::Finite {
        0
    } else {
        EXIT_VERDICT
    }
}

#[derive(Serialize)]
struct AnalyzeBody<'a> {
    theta_star: f64,
    mu: f64,
    mu_star: f64,
    tilted: &'a IncrementModel,
    lattice_span: Option<f64>,
    finiteness: &'a refwalk::FinitenessVerdict,
}

fn cmd_analyze(a: AnalyzeArgs) -> Result<u8> {
    let (model, barrier) = a.model.parse()?;
    let tilted = model.solve_theta_star(a.tol)?;
    let verdict = barrier.classify_finiteness(tilted.theta_star);
    let body = AnalyzeBody {
        theta_star: tilted.theta_star,
        mu: model.mean(),
        mu_star: tilted.mu_star,
        tilted: &tilted.tilted,
        lattice_span: model.lattice_span(),
        finiteness: &verdict,
    };
    if a.out.json {
        print_json("analyze", &a, &body)?;
    } else {
        print_pairs(&[
            ("theta_star", format!("{:.12}", body.theta_star)),
            ("mu", format!("{}", body.mu)),
            ("mu_star", format!("{:.12}", body.mu_star)),
            ("lattice_span", body.lattice_span.map_or("none".into(), |s| s.to_string())),
            ("eq9_bound", format!("{}", verdict.eq9_bound)),
            ("finiteness", format!("{:?} ({})", verdict.class, verdict.reason)),
        ]);
    }
    Ok(verdict_code(verdict.class))
}

fn estimate_rows(rows: &[TailEstimate]) -> Vec<Vec<String>> {
    rows.iter()
        .map(|r| {
            vec![
                r.u.to_string(),
                r.method.as_str().into(),
                sci(r.point),
                sci(r.stderr),
                sci(r.ci95.0),
                sci(r.ci95.1),
                r.n_samples.to_string(),
                r.horizon.map(|h| h.to_string()).unwrap_or_default(),
            ]
        })
        .collect()
}

fn emit_estimates<C: Serialize>(command: &str, config: &C, out: &OutputArgs, rows: &[TailEstimate]) -> Result<()> {
    if let Some(path) = &out.csv {
        write_file(path, |f| write_estimates_csv(rows, f))?;
    }
    if out.json {
        #[derive(Serialize)]
        struct Body<'a> {
            rows: &'a [TailEstimate],
        }
        print_json(command, config, Body { rows })?;
    } else {
        print_table(&["u", "method", "point", "stderr", "ci_low", "ci_high", "n_samples", "horizon"], &estimate_rows(rows));
    }
    Ok(())
}

fn parse_methods(spec: &str) -> Result<Vec<Method>> {
    spec.split(',')
        .map(|m| match m.trim() {
            "is" | "is-mc" => Ok(Method::IsMc),
            "naive" | "naive-mc" => Ok(Method::NaiveMc),
            "dp" | "dp-exact" => Ok(Method::DpExact),
            "asymptotic" => Ok(Method::Asymptotic),
            other => bail!("unknown method {other:?}; expected is, naive, dp, asymptotic"),
        })
        .collect()
}

fn cmd_tail(mut a: TailArgs) -> Result<u8> {
    let (model, barrier) = a.model.parse()?;
    let methods = parse_methods(&a.method)?;
    let grid = parse_grid(&a.u)?;
    let mc = a.mc.resolve();
    let tilted = model.solve_theta_star(a.tol)?;
    let verdict = barrier.classify_finiteness(tilted.theta_star);
    if verdict.class == Finiteness::Infinite {
        return Err(Error::InfiniteByCriterion(verdict.reason).into());
    }
    let constants = if methods.contains(&Method::Asymptotic) {
        let mut opts = ConstantsOptions::new(mc);
        opts.tol = a.tol;
        opts.eps = a.eps;
        opts.n_samples = a.n_samples;
        Some(tail_constants(&model, &barrier, &opts)?)
    } else {
        None
    };
    let mut rows = Vec::new();
    for &u in &grid {
        for &m in &methods {
            let row = match m {
                Method::IsMc => tail_is(&tilted, &barrier, u, a.n_samples, mc, a.cap)?,
                Method::NaiveMc => tail_naive(&model, &barrier, u, a.horizon.unwrap_or(1000), a.n_samples, mc)?,
                Method::DpExact => match a.horizon {
                    Some(h) => tail_dp(&model, &barrier, u, h)?,
                    None => tail_dp_converged(&model, &barrier, u, a.tol, 1 << 24)?,
                },
                Method::Asymptotic => asymptotic_estimate(constants.as_ref().expect("computed above"), u),
            };
            rows.push(row);
        }
    }
    emit_estimates("tail", &a, &a.out, &rows)?;
    Ok(verdict_code(verdict.class))
}

fn cmd_constants(mut a: ConstantsArgs) -> Result<u8> {
    let (model, barrier) = a.model.parse()?;
    let mc = a.mc.resolve();
    let opts = ConstantsOptions { tol: a.tol, eps: a.eps, n_samples: a.n_samples, u_ref: a.u_ref, max_depth: 1 << 24, mc };
    let tc = tail_constants(&model, &barrier, &opts)?;
    if let Some(path) = &a.out.csv {
        write_file(path, |f| {
            let mut w = csv::Writer::from_writer(f);
            w.write_record(["quantity", "value", "stderr", "method"])?;
            w.write_record(["theta_star", &tc.theta_star.to_string(), "0", "root"])?;
            w.write_record(["c_d", &tc.c_d.to_string(), &tc.c_d_stderr.to_string(), tc.c_d_method])?;
            w.write_record(["c_b", &tc.c_b.to_string(), &tc.c_b_stderr.to_string(), tc.c_b_method])?;
            w.write_record(["constant", &tc.constant.to_string(), "", ""])?;
            w.flush()?;
            Ok(())
        })?;
    }
    if a.out.json {
        print_json("constants", &a, &tc)?;
    } else {
        print_pairs(&[
            ("theta_star", format!("{:.12}", tc.theta_star)),
            ("mu_star", format!("{:.12}", tc.mu_star)),
            ("c_d", format!("{:.12} ± {} ({})", tc.c_d, sci(tc.c_d_stderr), tc.c_d_method)),
            ("c_b", format!("{:.12} ± {} ({})", tc.c_b, sci(tc.c_b_stderr), tc.c_b_method)),
            ("constant", format!("{:.12}", tc.constant)),
            ("bracket", format!("[{:.12}, {:.12}]", tc.bracket.0, tc.bracket.1)),
            ("eq9_bound", format!("{}", tc.eq9_bound)),
            ("finiteness", format!("{:?}", tc.finiteness)),
        ]);
    }
    Ok(verdict_code(tc.finiteness))
}

fn cmd_simulate(mut a: SimulateArgs) -> Result<u8> {
    let (model, barrier) = a.model.parse()?;
    let mc = a.mc.resolve();
    let mut stream = RandomStream::from_seed(mc.seed);
    let traj = if a.tilted {
        simulate_tilted_trajectory(&model.solve_theta_star(1e-12)?, &barrier, a.horizon, &mut stream)
    } else {
        simulate_trajectory(&model, &barrier, a.horizon, &mut stream)
    };
    if let Some(path) = &a.out.csv {
        write_file(path, |f| traj.write_csv(f))?;
    }
    if a.out.json {
        print_json("simulate", &a, &traj)?;
    } else {
        let max_w = traj.reflected.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        print_pairs(&[
            ("horizon", traj.horizon().to_string()),
            ("final_s", traj.partial_sums[traj.horizon()].to_string()),
            ("final_w", traj.reflected[traj.horizon()].to_string()),
            ("max_w", max_w.to_string()),
            ("d", traj.running_d[traj.horizon()].to_string()),
        ]);
    }
    Ok(0)
}

fn cmd_oracle(a: OracleArgs) -> Result<u8> {
    let (model, barrier) = a.model.parse()?;
    let mut rows = Vec::new();
    if let Some(spec) = &a.u {
        for u in parse_grid(spec)? {
            rows.push(match a.horizon {
                Some(h) => tail_dp(&model, &barrier, u, h)?,
                None => tail_dp_converged(&model, &barrier, u, a.tol, 1 << 24)?,
            });
        }
    }
    let d_law = if a.d_law {
        let tilted = model.solve_theta_star(a.tol)?;
        Some(d_distribution_dp(&tilted, &barrier, a.tol)?)
    } else {
        None
    };
    if rows.is_empty() && d_law.is_none() {
        bail!("nothing to compute: give --u and/or --d-law");
    }
    if let Some(path) = &a.out.csv {
        write_file(path, |f| write_estimates_csv(&rows, f))?;
    }
    if a.out.json {
        #[derive(Serialize)]
        struct Body<'a> {
            rows: &'a [TailEstimate],
            prune_tol: f64,
            d_law: Option<refwalk::DDistribution>,
        }
        print_json("oracle", &a, Body { rows: &rows, prune_tol: DEFAULT_PRUNE_TOL, d_law })?;
    } else {
        if !rows.is_empty() {
            print_table(&["u", "method", "point", "stderr", "ci_low", "ci_high", "n_samples", "horizon"], &estimate_rows(&rows));
        }
        if let Some(d) = d_law {
            print_pairs(&[
                ("c_d", format!("{:.12}", d.c_d)),
                ("d_support", d.probs.len().to_string()),
                ("truncation_bound", sci(d.truncation_bound)),
            ]);
        }
    }
    Ok(0)
}

#[derive(Serialize)]
struct ScanBody {
    m_y: f64,
    i: Option<usize>,
    j: Option<usize>,
    m: Option<usize>,
    n: usize,
    converted_t: bool,
}

fn cmd_rna_scan(a: RnaScanArgs) -> Result<u8> {
    let text = match (&a.seq, &a.file) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?,
        (None, None) => bail!("give --seq or --file"),
    };
    let y = refwalk::rna::Sequence::parse(&text)?;
    let (f, p) = a.scoring.parse()?;
    let r = scan_reflected(&y, &f, &p);
    let body = ScanBody {
        m_y: r.m_y,
        i: r.argmax.map(|l| l.i),
        j: r.argmax.map(|l| l.j),
        m: r.argmax.map(|l| l.m),
        n: y.len(),
        converted_t: y.converted_t,
    };
    if let Some(path) = &a.out.csv {
        write_file(path, |file| {
            let mut w = csv::Writer::from_writer(file);
            w.write_record(["m_y", "i", "j", "m", "n"])?;
            let opt = |v: Option<usize>| v.map(|x| x.to_string()).unwrap_or_default();
            w.write_record([body.m_y.to_string(), opt(body.i), opt(body.j), opt(body.m), body.n.to_string()])?;
            w.flush()?;
            Ok(())
        })?;
    }
    if a.out.json {
        print_json("rna scan", &a, &body)?;
    } else {
        let opt = |v: Option<usize>| v.map_or("-".to_string(), |x| x.to_string());
        print_pairs(&[
            ("m_y", body.m_y.to_string()),
            ("i", opt(body.i)),
            ("j", opt(body.j)),
            ("m", opt(body.m)),
            ("n", body.n.to_string()),
        ]);
    }
    Ok(0)
}

fn parse_base(spec: &str) -> Result<[f64; 4]> {
    let v: Vec<f64> = spec
        .split(',')
        .map(|s| s.trim().parse::<f64>().with_context(|| format!("bad probability {s:?} in --base")))
        .collect::<Result<_>>()?;
    <[f64; 4]>::try_from(v).map_err(|v| anyhow::anyhow!("--base needs 4 probabilities, got {}", v.len()))
}

fn cmd_rna_pvalue(mut a: RnaPvalueArgs) -> Result<u8> {
    let (f, p) = a.scoring.parse()?;
    let base = parse_base(&a.base)?;
    let grid = parse_grid(&a.u)?;
    let mc = a.mc.resolve();
    let opts = ConstantsOptions { tol: a.tol, eps: a.eps, n_samples: a.n_samples, u_ref: 20.0, max_depth: 1 << 24, mc };
    let report = k_star(&f, &base, &p, &opts)?;
    let rows: Vec<(f64, f64, f64, f64)> = grid
        .iter()
        .map(|&u| p_value_band(a.n, &report, u).map(|(pv, lo, hi)| (u, pv, lo, hi)))
        .collect::<refwalk::Result<_>>()?;
    let write_rows = |w: &mut dyn std::io::Write| -> refwalk::Result<()> {
        let mut c = csv::Writer::from_writer(w);
        c.write_record(["u", "p_value", "p_low", "p_high"])?;
        for (u, pv, lo, hi) in &rows {
            c.write_record([u.to_string(), format!("{pv:e}"), format!("{lo:e}"), format!("{hi:e}")])?;
        }
        c.flush()?;
        Ok(())
    };
    if let Some(path) = &a.out.csv {
        write_file(path, |file| write_rows(file))?;
    }
    if a.out.json {
        #[derive(Serialize)]
        struct Row {
            u: f64,
            p_value: f64,
            p_low: f64,
            p_high: f64,
        }
        #[derive(Serialize)]
        struct Body<'a> {
            significance: &'a refwalk::SignificanceReport,
            rows: Vec<Row>,
        }
        let rows = rows.iter().map(|&(u, p_value, p_low, p_high)| Row { u, p_value, p_low, p_high }).collect();
        print_json("rna pvalue", &a, Body { significance: &report, rows })?;
    } else {
        write_rows(&mut std::io::stdout().lock())?;
    }
    Ok(0)
}
