//! `fmmio`: experiments on recursive matrix multiplication CDAGs.
//!
//! Every run echoes a `# config:` line first. Human-readable results go to
//! stdout; `--out` writes the machine-readable artifact. Exit status is 0 on
//! success, 1 on a computation error and 2 on a usage or file error.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use fmm_io::bounds::{self, BoundQuery, Regime};
use fmm_io::cdag::{self, BuildOptions, Cdag, Part, TreeShape};
use fmm_io::expansion::{self, ExpansionReport, HeuristicConfig, StudyConfig, UGraph};
use fmm_io::iosim::{self, Policy, SweepConfig, SweepSchedule};
use fmm_io::mm::{self, Matrix, Strategy};
use fmm_io::scheme::BilinearScheme;
use num_bigint::BigInt;
use thiserror::Error;

#[derive(Debug, Error)]
enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    File { path: PathBuf, source: std::io::Error },
    #[error("{0}")]
    Compute(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Compute(_) => 1,
            _ => 2,
        }
    }
}

type SeriesKey = (usize, Policy, String);

fn compute<E: std::fmt::Display>(e: E) -> CliError {
    CliError::Compute(e.to_string())
}

type Result<T> = std::result::Result<T, CliError>;

#[derive(Parser, Debug)]
#[command(name = "fmmio", version, about = "CDAGs, edge expansion and I/O simulation of fast matrix multiplication")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Bilinear scheme checks.
    #[command(subcommand)]
    Scheme(SchemeCmd),
    /// Build, decompose or inspect CDAGs.
    #[command(subcommand)]
    Cdag(CdagCmd),
    /// Edge expansion of an expanded, regularized decoding graph.
    Expansion(ExpansionArgs),
    /// Two-level memory simulation.
    #[command(subcommand)]
    Iosim(IosimCmd),
    /// Closed-form communication bounds for one query.
    Bound(BoundArgs),
    /// Executable recursive multiplication.
    #[command(subcommand)]
    Mm(MmCmd),
}

#[derive(Subcommand, Debug)]
enum SchemeCmd {
    /// Verify the Brent equations and report structure.
    Validate {
        /// Builtin name (strassen, winograd, classical2x2, classicalB) or scheme file.
        #[arg(long)]
        name: String,
    },
}

#[derive(Args, Debug, Clone)]
struct GraphSpec {
    /// Scheme, or comma-separated list of per-level schemes.
    #[arg(long, default_value = "strassen")]
    scheme: String,
    /// Recursion depth.
    #[arg(long)]
    k: usize,
    /// Keep unit encoding rows as copy vertices.
    #[arg(long)]
    no_identify: bool,
}

#[derive(Subcommand, Debug)]
enum CdagCmd {
    /// Build a graph and print its level profile.
    Build {
        #[command(flatten)]
        graph: GraphSpec,
        #[arg(long, default_value = "full")]
        part: String,
        /// Replace high in-degree vertices by binary trees.
        #[arg(long, value_enum)]
        expand: Option<Shape>,
        /// Pad every vertex with loops to this degree (after expansion).
        #[arg(long)]
        regular: Option<usize>,
        /// Seed of random expansion trees.
        #[arg(long)]
        seed: Option<u64>,
        /// Write the graph document here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decompose Dec_k into edge-disjoint copies of Dec_b.
    Decompose {
        #[command(flatten)]
        graph: GraphSpec,
        #[arg(long, default_value_t = 1)]
        base: usize,
        /// Write `copy,base_level,from,to` rows here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-import a graph document and print its profile.
    Inspect {
        #[arg(long = "in")]
        input: PathBuf,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Shape {
    Left,
    Random,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExpMethod {
    Exact,
    Heuristic,
    Spectral,
    Decomposition,
    All,
}

#[derive(Args, Debug)]
struct ExpansionArgs {
    #[arg(long, default_value = "strassen")]
    scheme: String,
    #[arg(long)]
    k: Option<usize>,
    /// Graph document (already expanded) instead of building Dec_k.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "all")]
    method: ExpMethod,
    #[arg(long, default_value_t = 6)]
    degree: usize,
    /// Search steps of the heuristic.
    #[arg(long, default_value_t = 10_000)]
    budget: u64,
    /// Largest set size considered.
    #[arg(long)]
    cap: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write `method,k,value,cut,size,seed` rows here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum IosimCmd {
    /// Simulate one configuration.
    Run {
        #[arg(long, default_value = "strassen")]
        scheme: String,
        #[arg(long)]
        k: usize,
        #[arg(long = "M")]
        m: usize,
        #[arg(long, default_value = "belady")]
        policy: String,
        #[arg(long, default_value = "dfs")]
        schedule: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 2_000_000)]
        explicit_limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross product of sizes, memories, policies and schedules.
    Sweep {
        #[arg(long, default_value = "strassen")]
        scheme: String,
        /// Size or doubling range `a..b`.
        #[arg(long)]
        n: String,
        /// Memory size or doubling range `a..b`.
        #[arg(long = "M")]
        m: String,
        /// Comma-separated policies.
        #[arg(long, default_value = "belady")]
        policy: String,
        /// Comma-separated schedules: dfs, dfs-block, bfs, random.
        #[arg(long, default_value = "dfs")]
        schedule: String,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Graphs above this many vertices run implicitly (dfs only).
        #[arg(long, default_value_t = 2_000_000)]
        explicit_limit: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct BoundArgs {
    #[arg(long)]
    n: u64,
    #[arg(long = "M")]
    m: u64,
    #[arg(long, default_value_t = 1)]
    p: u64,
    /// Replication factor of the third memory regime.
    #[arg(long, default_value_t = 1.0)]
    c: f64,
    /// Scheme fixing the exponent; ignored when `--omega` is given.
    #[arg(long, default_value = "strassen")]
    scheme: String,
    #[arg(long)]
    omega: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct MmSpec {
    /// Scheme, or comma-separated list of per-level schemes.
    #[arg(long, default_value = "strassen")]
    scheme: String,
    #[arg(long)]
    n: usize,
    /// Recursion stops at this dimension.
    #[arg(long, default_value_t = 1)]
    cutoff: usize,
}

#[derive(Subcommand, Debug)]
enum MmCmd {
    /// Multiply two matrices and compare with the classical product.
    Run {
        #[command(flatten)]
        spec: MmSpec,
        /// Matrix file for A (random with `--seed` otherwise).
        #[arg(long)]
        a: Option<PathBuf>,
        #[arg(long)]
        b: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value_t = -9, allow_hyphen_values = true)]
        lo: i64,
        #[arg(long, default_value_t = 9)]
        hi: i64,
        /// Write C here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Record the executed DAG and compare it with the builder.
    Trace {
        #[command(flatten)]
        spec: MmSpec,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn schemes(spec: &str) -> Result<Vec<BilinearScheme>> {
    spec.split(',')
        .map(|s| BilinearScheme::builtin(s.trim()).map_err(|e| CliError::Usage(e.to_string())))
        .collect()
}

fn one_scheme(spec: &str) -> Result<BilinearScheme> {
    let mut all = schemes(spec)?;
    if all.len() != 1 {
        return Err(CliError::Usage("this command takes a single scheme".into()));
    }
    Ok(all.remove(0))
}

fn names(s: &[BilinearScheme]) -> String {
    s.iter().map(|x| x.name.as_str()).collect::<Vec<_>>().join(",")
}

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn read_file(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|source| CliError::File { path: path.to_path_buf(), source })
}

fn opt<T: std::fmt::Display>(x: &Option<T>) -> String {
    x.as_ref().map_or_else(|| "-".to_string(), ToString::to_string)
}

fn require_seed(seed: Option<u64>, what: &str) -> Result<u64> {
    seed.ok_or_else(|| CliError::Usage(format!("{what} needs --seed")))
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let mut out = String::new();
    let result = dispatch(cli.command, &mut out);
    print!("{out}");
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}

fn dispatch(cmd: Command, out: &mut String) -> Result<()> {
    match cmd {
        Command::Scheme(SchemeCmd::Validate { name }) => scheme_validate(&name, out),
        Command::Cdag(c) => cdag_cmd(c, out),
        Command::Expansion(a) => expansion_cmd(a, out),
        Command::Iosim(c) => iosim_cmd(c, out),
        Command::Bound(a) => bound_cmd(a, out),
        Command::Mm(c) => mm_cmd(c, out),
    }
}

fn scheme_validate(name: &str, out: &mut String) -> Result<()> {
    let _ = writeln!(out, "# config: scheme validate name={name}");
    let s = BilinearScheme::builtin(name).map_err(|e| CliError::Usage(e.to_string()))?;
    let r = s.validate().map_err(compute)?;
    let _ = writeln!(out, "scheme       {}", r.name);
    let _ = writeln!(out, "n0           {}", r.n0);
    let _ = writeln!(out, "m            {}", r.m);
    let _ = writeln!(out, "valid        {}", r.valid);
    let _ = writeln!(out, "omega0       {:.6}", r.omega0);
    let _ = writeln!(out, "additions    {}", r.additions);
    let _ = writeln!(out, "naive_adds   {}", r.naive_additions);
    let _ = writeln!(out, "connected    {}", r.dec1_connected);
    let _ = writeln!(out, "components   {}", r.dec1_components);
    let _ = writeln!(out, "io_disjoint  {}", r.io_disjoint);
    if !r.valid {
        return Err(CliError::Compute(format!("{} fails the Brent equations", r.name)));
    }
    Ok(())
}

fn profile(g: &Cdag, out: &mut String) {
    let _ = writeln!(out, "vertices     {}", g.num_vertices());
    let _ = writeln!(out, "edges        {}", g.num_edges());
    let _ = writeln!(out, "inputs       {}", g.inputs().len());
    let _ = writeln!(out, "outputs      {}", g.outputs().len());
    let _ = writeln!(out, "max_degree   {}", g.max_degree());
    let sizes: Vec<String> = g.level_sizes().iter().map(ToString::to_string).collect();
    let _ = writeln!(out, "level_sizes  {}", sizes.join(" "));
}

fn cdag_cmd(cmd: CdagCmd, out: &mut String) -> Result<()> {
    match cmd {
        CdagCmd::Build { graph, part, expand, regular, seed, out: path } => {
            let s = schemes(&graph.scheme)?;
            let part: Part = part.parse().map_err(CliError::Usage)?;
            let shape = match expand {
                None => None,
                Some(Shape::Left) => Some(TreeShape::LeftChain),
                Some(Shape::Random) => Some(TreeShape::Random(require_seed(seed, "random expansion")?)),
            };
            let _ = writeln!(
                out,
                "# config: cdag build scheme={} k={} part={part:?} identify={} expand={} regular={} seed={}",
                names(&s),
                graph.k,
                !graph.no_identify,
                shape.map_or("none".to_string(), |t| format!("{t:?}")),
                opt(&regular),
                opt(&seed)
            );
            let opts = BuildOptions { identify_unit_rows: !graph.no_identify };
            let mut g = cdag::build_part(&s, graph.k, part, opts).map_err(compute)?;
            if let Some(t) = shape {
                g = cdag::expand_binary(&g, t);
            }
            if let Some(d) = regular {
                g = cdag::regularize(&g, d).map_err(compute)?;
            }
            profile(&g, out);
            if let Some(p) = path {
                write_file(&p, &cdag::export(&g))?;
            }
            Ok(())
        }
        CdagCmd::Decompose { graph, base, out: path } => {
            let s = schemes(&graph.scheme)?;
            let _ = writeln!(out, "# config: cdag decompose scheme={} k={} base={base}", names(&s), graph.k);
            let g = cdag::build_dec(&s, graph.k).map_err(compute)?;
            let copies = cdag::decompose(&g, base).map_err(compute)?;
            let mut covered: Vec<(usize, usize)> = copies.iter().flat_map(|c| c.edges.iter().copied()).collect();
            covered.sort_unstable();
            let mut all: Vec<(usize, usize)> = g.edges().collect();
            all.sort_unstable();
            let _ = writeln!(out, "copies       {}", copies.len());
            let _ = writeln!(out, "edges        {}", all.len());
            let _ = writeln!(out, "exact_cover  {}", covered == all);
            if let Some(p) = path {
                let mut text = String::from("copy,base_level,from,to\n");
                for (i, c) in copies.iter().enumerate() {
                    for (u, v) in &c.edges {
                        let _ = writeln!(text, "{i},{},{u},{v}", c.base_level);
                    }
                }
                write_file(&p, &text)?;
            }
            if covered != all {
                return Err(CliError::Compute("copies do not partition the edges".into()));
            }
            Ok(())
        }
        CdagCmd::Inspect { input } => {
            let _ = writeln!(out, "# config: cdag inspect in={}", input.display());
            let g = cdag::import(&read_file(&input)?).map_err(|e| CliError::Usage(e.to_string()))?;
            profile(&g, out);
            Ok(())
        }
    }
}

fn exp_row(out: &mut String, csv: &mut String, k: &str, r: &ExpansionReport) {
    let size = r.witness.as_ref().map(Vec::len);
    let value = r.ratio.map_or_else(|| format!("{:.6}", r.value), |q| format!("{q} ({:.6})", r.value));
    let _ = writeln!(
        out,
        "{:<22} {value:<24} cut={} |U|={} cap={} evaluated={}",
        r.method.label(),
        opt(&r.cut),
        opt(&size),
        opt(&r.size_cap),
        r.evaluated
    );
    let _ = writeln!(
        csv,
        "{},{k},{},{},{},{}",
        r.method.label(),
        r.value,
        r.cut.map(|c| c.to_string()).unwrap_or_default(),
        size.map(|c| c.to_string()).unwrap_or_default(),
        r.seed.map(|c| c.to_string()).unwrap_or_default()
    );
}

fn expansion_cmd(a: ExpansionArgs, out: &mut String) -> Result<()> {
    let randomized = matches!(a.method, ExpMethod::Heuristic | ExpMethod::All);
    let seed = if randomized { Some(require_seed(a.seed, "the heuristic search")?) } else { a.seed };
    let (g, k_label) = match (&a.input, a.k) {
        (Some(p), _) => {
            let g = cdag::import(&read_file(p)?).map_err(|e| CliError::Usage(e.to_string()))?;
            let d = a.degree.max(g.max_degree());
            (cdag::regularize(&g, d).map_err(compute)?, "-".to_string())
        }
        (None, Some(k)) => {
            let s = one_scheme(&a.scheme)?;
            let cfg = StudyConfig { degree: a.degree, ..StudyConfig::default() };
            (expansion::study_graph(&s, k, &cfg).map_err(compute)?, k.to_string())
        }
        (None, None) => return Err(CliError::Usage("pass --k or --in".into())),
    };
    let _ = writeln!(
        out,
        "# config: expansion scheme={} k={k_label} in={} method={:?} degree={} budget={} cap={} seed={}",
        a.scheme,
        a.input.as_ref().map_or("-".to_string(), |p| p.display().to_string()),
        a.method,
        a.degree,
        a.budget,
        opt(&a.cap),
        opt(&seed)
    );
    let ug = UGraph::from_cdag(&g).map_err(compute)?;
    let _ = writeln!(out, "vertices {} degree {}", ug.num_vertices(), ug.degree());
    let mut csv = String::from("method,k,value,cut,size,seed\n");
    let want = |m: ExpMethod| a.method == m || a.method == ExpMethod::All;
    if want(ExpMethod::Exact) {
        match expansion::exact_expansion(&ug, a.cap) {
            Ok(r) => exp_row(out, &mut csv, &k_label, &r),
            Err(e) if a.method == ExpMethod::All => {
                let _ = writeln!(out, "{:<22} skipped: {e}", "exact");
            }
            Err(e) => return Err(compute(e)),
        }
    }
    if want(ExpMethod::Heuristic) {
        let mut cfg = HeuristicConfig::new(seed.unwrap_or_default(), a.budget);
        if let Some(c) = a.cap {
            cfg = cfg.with_cap(c);
        }
        let r = expansion::heuristic_expansion(&ug, &expansion::structured_seeds(&g), cfg);
        exp_row(out, &mut csv, &k_label, &r);
    }
    if want(ExpMethod::Spectral) {
        match expansion::spectral_bounds(&ug) {
            Ok(s) => {
                let _ = writeln!(
                    out,
                    "{:<22} lambda2={:.6} lower={:.6} upper={:.6} residual={:.1e}",
                    "spectral",
                    s.lambda2,
                    s.lower,
                    s.upper,
                    s.residual
                );
                let _ = writeln!(csv, "spectral-lower,{k_label},{},,,", s.lower);
            }
            Err(e) if a.method == ExpMethod::All => {
                let _ = writeln!(out, "{:<22} skipped: {e}", "spectral");
            }
            Err(e) => return Err(compute(e)),
        }
    }
    if want(ExpMethod::Decomposition) && a.input.is_none() {
        let base = expansion::base_expansion(&g, 1).map_err(compute)?;
        let r = expansion::decomposition_bound(&g, 1, &base).map_err(compute)?;
        exp_row(out, &mut csv, &k_label, &r);
    }
    if let Some(p) = a.out {
        write_file(&p, &csv)?;
    }
    Ok(())
}

fn list<T, F: Fn(&str) -> std::result::Result<T, iosim::IoError>>(s: &str, f: F) -> Result<Vec<T>> {
    s.split(',').map(|x| f(x.trim()).map_err(|e| CliError::Usage(e.to_string()))).collect()
}

fn range(s: &str) -> Result<Vec<u64>> {
    iosim::parse_range(s).map_err(|e| CliError::Usage(e.to_string()))
}

fn iosim_cmd(cmd: IosimCmd, out: &mut String) -> Result<()> {
    let (cfg, path, header) = match cmd {
        IosimCmd::Run { scheme, k, m, policy, schedule, seed, explicit_limit, out: path } => {
            let s = one_scheme(&scheme)?;
            let n = (s.n0 as u64).checked_pow(k as u32).ok_or_else(|| CliError::Usage("n overflows".into()))?;
            let mut cfg = SweepConfig::new(s);
            cfg.ns = vec![n];
            cfg.ms = vec![m];
            cfg.policies = vec![policy.parse().map_err(|e: iosim::IoError| CliError::Usage(e.to_string()))?];
            cfg.schedules = vec![schedule.parse().map_err(|e: iosim::IoError| CliError::Usage(e.to_string()))?];
            cfg.explicit_limit = explicit_limit;
            let header = format!("iosim run scheme={scheme} k={k} n={n} M={m} policy={policy} schedule={schedule}");
            (with_seed(cfg, seed)?, path, header)
        }
        IosimCmd::Sweep { scheme, n, m, policy, schedule, seed, jobs, explicit_limit, out: path } => {
            let mut cfg = SweepConfig::new(one_scheme(&scheme)?);
            cfg.ns = range(&n)?;
            cfg.ms = range(&m)?.into_iter().map(|x| x as usize).collect();
            cfg.policies = list(&policy, str::parse::<Policy>)?;
            cfg.schedules = list(&schedule, str::parse::<SweepSchedule>)?;
            cfg.jobs = jobs;
            cfg.explicit_limit = explicit_limit;
            let header = format!(
                "iosim sweep scheme={scheme} n={n} M={m} policy={policy} schedule={schedule} jobs={jobs} explicit_limit={explicit_limit}"
            );
            (with_seed(cfg, seed)?, path, header)
        }
    };
    let seeded = cfg.schedules.contains(&SweepSchedule::Random);
    let _ = writeln!(out, "# config: {header}{}", if seeded { format!(" seed={}", cfg.seed) } else { String::new() });
    let rows = iosim::sweep(&cfg).map_err(compute)?;
    let _ = writeln!(
        out,
        "{:>6} {:>3} {:>6} {:>7} {:>10} {:>12} {:>12} {:>12} {:>12} {:>10}",
        "n", "k", "M", "policy", "schedule", "reads", "writes", "total", "seg_bound", "ratio"
    );
    for r in &rows {
        let _ = writeln!(
            out,
            "{:>6} {:>3} {:>6} {:>7} {:>10} {:>12} {:>12} {:>12} {:>12} {:>10.4}",
            r.n,
            r.k,
            r.m_words,
            r.policy.label(),
            r.schedule,
            r.reads,
            r.writes,
            r.total,
            opt(&r.seg_bound_clamped),
            r.ratio
        );
    }
    if rows.len() > 1 {
        let mut by_series: Vec<(SeriesKey, Vec<(f64, f64)>)> = Vec::new();
        for r in &rows {
            let key = (r.m_words, r.policy, r.schedule.clone());
            match by_series.iter_mut().find(|(k, _)| *k == key) {
                Some((_, v)) => v.push((r.n as f64, r.total as f64)),
                None => by_series.push((key, vec![(r.n as f64, r.total as f64)])),
            }
        }
        for ((m, p, s), pts) in by_series.iter().filter(|(_, v)| v.len() > 1) {
            let _ = writeln!(out, "slope M={m} {} {s}: {:.4}", p.label(), iosim::loglog_slope(pts));
        }
    }
    if let Some(p) = path {
        write_file(&p, &iosim::to_csv(&rows))?;
    }
    Ok(())
}

fn with_seed(mut cfg: SweepConfig, seed: Option<u64>) -> Result<SweepConfig> {
    if cfg.schedules.contains(&SweepSchedule::Random) {
        cfg.seed = require_seed(seed, "the random schedule")?;
    }
    Ok(cfg)
}

fn bound_cmd(a: BoundArgs, out: &mut String) -> Result<()> {
    let (omega, base, label) = match a.omega {
        Some(w) => (w, None, format!("omega={w}")),
        None => {
            let s = one_scheme(&a.scheme)?;
            (s.omega0(), Some((s.n0 as u64, s.m as u64)), format!("scheme={}", s.name))
        }
    };
    let _ = writeln!(out, "# config: bound n={} M={} p={} c={} {label}", a.n, a.m, a.p, a.c);
    let q = BoundQuery { base, ..BoundQuery::new(a.n, a.m, omega) }.with_p(a.p).with_c(a.c);
    let show = |out: &mut String, name: &str, v: bounds::BoundValue| {
        let exact = v.exact.map_or(String::new(), |x| format!(" exact={x}"));
        let _ = writeln!(out, "{name:<18} {:.6e}  log2={:.6}{exact}{}", v.value, v.log2, if v.in_regime { "" } else { "  (3n^2 <= M)" });
    };
    show(out, "sequential_lower", bounds::sequential_lower(&q).map_err(compute)?);
    show(out, "upper_bound", bounds::upper_bound(&q).map_err(compute)?);
    show(out, "parallel_lower", bounds::parallel_lower(&q).map_err(compute)?);
    show(out, "latency_lower", bounds::latency_lower(&q).map_err(compute)?);
    let _ = writeln!(out, "doubling_log2      {:.12}", bounds::doubling_log2_ratio(&q).map_err(compute)?);
    for e in bounds::memory_constrained_table(&q).map_err(compute)? {
        let label = match e.regime {
            Regime::TwoD => "2D",
            Regime::ThreeD => "3D",
            Regime::Replicated => "2.5D",
        };
        let _ = writeln!(
            out,
            "table {label:<5} M={:.6e} n^2/denominator={:.6e}/{:.6e} = {:.6e}",
            e.memory, e.numerator, e.denominator, e.value
        );
    }
    Ok(())
}

fn strategy(spec: &MmSpec) -> Result<Strategy> {
    let s = schemes(&spec.scheme)?;
    if spec.cutoff == 0 {
        return Err(CliError::Usage("--cutoff must be at least 1".into()));
    }
    Ok(if s.len() == 1 {
        Strategy::stationary(s.into_iter().next().expect("one scheme"), spec.cutoff)
    } else {
        Strategy::levels(s, spec.cutoff)
    })
}

fn load_matrix(path: &Path) -> Result<Matrix<BigInt>> {
    read_file(path)?.parse().map_err(|e: mm::MmError| CliError::Usage(format!("{}: {e}", path.display())))
}

fn mm_cmd(cmd: MmCmd, out: &mut String) -> Result<()> {
    match cmd {
        MmCmd::Run { spec, a, b, seed, lo, hi, out: path } => {
            let st = strategy(&spec)?;
            let (ma, mb, source) = match (a, b) {
                (Some(pa), Some(pb)) => {
                    let src = format!("a={} b={}", pa.display(), pb.display());
                    (load_matrix(&pa)?, load_matrix(&pb)?, src)
                }
                (None, None) => {
                    let s = require_seed(seed, "random matrices")?;
                    if lo > hi {
                        return Err(CliError::Usage("--lo exceeds --hi".into()));
                    }
                    let src = format!("seed={s} lo={lo} hi={hi}");
                    (Matrix::random(s, spec.n, lo, hi), Matrix::random(s.wrapping_add(1), spec.n, lo, hi), src)
                }
                _ => return Err(CliError::Usage("pass both --a and --b, or neither".into())),
            };
            let _ = writeln!(out, "# config: mm run scheme={} n={} cutoff={} {source}", spec.scheme, spec.n, spec.cutoff);
            let p = mm::multiply(&ma, &mb, &st).map_err(compute)?;
            let reference = mm::naive(&ma, &mb).map_err(compute)?;
            let _ = writeln!(out, "padded_n         {}", p.ops.padded_n);
            let _ = writeln!(out, "multiplications  {}", p.ops.multiplications);
            let _ = writeln!(out, "additions        {}", p.ops.additions);
            let _ = writeln!(out, "scalings         {}", p.ops.scalings);
            for l in &p.ops.profile {
                let _ = writeln!(out, "level {} {:<14} subproblems={} additions={}", l.level, l.scheme, l.subproblems, l.additions);
            }
            let ok = p.c == reference;
            let _ = writeln!(out, "matches_naive    {ok}");
            if let Some(path) = path {
                write_file(&path, &p.c.to_string())?;
            }
            if !ok {
                return Err(CliError::Compute("product differs from the classical product".into()));
            }
            Ok(())
        }
        MmCmd::Trace { spec, out: path } => {
            let st = strategy(&spec)?;
            let _ = writeln!(out, "# config: mm trace scheme={} n={} cutoff={}", spec.scheme, spec.n, spec.cutoff);
            let t = mm::trace(spec.n, &st).map_err(compute)?;
            let g = &t.cdag;
            let built = cdag::build_full(&g.meta.schemes, g.meta.k, BuildOptions::default()).map_err(compute)?;
            let same = built.num_vertices() == g.num_vertices()
                && built.num_edges() == g.num_edges()
                && (0..g.num_vertices()).all(|v| built.preds(v) == g.preds(v));
            let _ = writeln!(out, "vertices         {}", g.num_vertices());
            let _ = writeln!(out, "edges            {}", g.num_edges());
            let _ = writeln!(out, "builder_vertices {}", built.num_vertices());
            let _ = writeln!(out, "builder_edges    {}", built.num_edges());
            let _ = writeln!(out, "equals_builder   {same}");
            let _ = writeln!(out, "multiplications  {}", t.ops.multiplications);
            if let Some(p) = path {
                write_file(&p, &cdag::export(g))?;
            }
            if !same {
                return Err(CliError::Compute("trace differs from the built graph".into()));
            }
            Ok(())
        }
    }
}
