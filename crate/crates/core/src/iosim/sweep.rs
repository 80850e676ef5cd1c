use std::fmt::Write as _;
use std::str::FromStr;

use rayon::prelude::*;

use crate::bounds::{sequential_lower, upper_bound, BoundQuery};
use crate::cdag::{build_full, BuildOptions, Cdag, Layout, Part};
use crate::scheme::BilinearScheme;

use super::{
    bfs_schedule, dfs_schedule, optimal_segment_bound, random_topo_schedule, simulate, simulate_implicit,
    block_depth_for, IoError, Policy,
};

/// Frozen column set of the sweep table.
pub const CSV_HEADER: &str = "scheme,n,k,M,policy,schedule,reads,writes,total,seg_bound_clamped,seg_bound_raw,s_star,closed_form_lower,closed_form_upper,ratio";

/// Schedules a sweep can run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SweepSchedule {
    /// Depth-first down to the products.
    Dfs,
    /// Depth-first, with subproblems whose three blocks fit in `M` run whole.
    DfsBlock,
    Bfs,
    Random,
}

impl SweepSchedule {
    pub fn label(self) -> &'static str {
        match self {
            SweepSchedule::Dfs => "dfs",
            SweepSchedule::DfsBlock => "dfs-block",
            SweepSchedule::Bfs => "bfs",
            SweepSchedule::Random => "random",
        }
    }
}

impl FromStr for SweepSchedule {
    type Err = IoError;
    fn from_str(s: &str) -> Result<Self, IoError> {
        match s {
            "dfs" => Ok(SweepSchedule::Dfs),
            "dfs-block" => Ok(SweepSchedule::DfsBlock),
            "bfs" => Ok(SweepSchedule::Bfs),
            "random" => Ok(SweepSchedule::Random),
            _ => Err(IoError::Config(format!("unknown schedule `{s}` (dfs, dfs-block, bfs, random)"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub scheme: BilinearScheme,
    pub ns: Vec<u64>,
    pub ms: Vec<usize>,
    pub policies: Vec<Policy>,
    pub schedules: Vec<SweepSchedule>,
    /// Seed of the random schedule.
    pub seed: u64,
    /// Graphs above this many vertices are simulated implicitly (dfs only,
    /// no segment bound).
    pub explicit_limit: usize,
    pub jobs: usize,
}

impl SweepConfig {
    pub fn new(scheme: BilinearScheme) -> Self {
        Self {
            scheme,
            ns: Vec::new(),
            ms: Vec::new(),
            policies: vec![Policy::Belady],
            schedules: vec![SweepSchedule::Dfs],
            seed: 1,
            explicit_limit: 2_000_000,
            jobs: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub scheme: String,
    pub n: u64,
    pub k: usize,
    pub m_words: usize,
    pub policy: Policy,
    pub schedule: String,
    pub reads: u64,
    pub writes: u64,
    pub total: u64,
    pub seg_bound_clamped: Option<u64>,
    pub seg_bound_raw: Option<i64>,
    pub s_star: Option<usize>,
    pub closed_form_lower: f64,
    pub closed_form_upper: f64,
    /// `total / closed_form_lower`.
    pub ratio: f64,
}

fn opt<T: ToString>(x: &Option<T>) -> String {
    x.as_ref().map(ToString::to_string).unwrap_or_default()
}

fn parse_opt<T: FromStr>(s: &str) -> Result<Option<T>, IoError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse().map(Some).map_err(|_| IoError::Config(format!("bad field `{s}`")))
}

fn parse_field<T: FromStr>(s: &str) -> Result<T, IoError> {
    s.parse().map_err(|_| IoError::Config(format!("bad field `{s}`")))
}

impl SweepRow {
    pub fn to_csv(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            self.scheme,
            self.n,
            self.k,
            self.m_words,
            self.policy.label(),
            self.schedule,
            self.reads,
            self.writes,
            self.total,
            opt(&self.seg_bound_clamped),
            opt(&self.seg_bound_raw),
            opt(&self.s_star),
            self.closed_form_lower,
            self.closed_form_upper,
            self.ratio
        )
    }

    pub fn from_csv(line: &str) -> Result<Self, IoError> {
        let f: Vec<&str> = line.trim_end().split(',').collect();
        if f.len() != 15 {
            return Err(IoError::Config(format!("expected 15 fields, found {}", f.len())));
        }
        Ok(Self {
            scheme: f[0].to_string(),
            n: parse_field(f[1])?,
            k: parse_field(f[2])?,
            m_words: parse_field(f[3])?,
            policy: f[4].parse()?,
            schedule: f[5].to_string(),
            reads: parse_field(f[6])?,
            writes: parse_field(f[7])?,
            total: parse_field(f[8])?,
            seg_bound_clamped: parse_opt(f[9])?,
            seg_bound_raw: parse_opt(f[10])?,
            s_star: parse_opt(f[11])?,
            closed_form_lower: parse_field(f[12])?,
            closed_form_upper: parse_field(f[13])?,
            ratio: parse_field(f[14])?,
        })
    }
}

/// Header plus one line per row.
pub fn to_csv(rows: &[SweepRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv());
    }
    out
}

pub fn parse_csv(text: &str) -> Result<Vec<SweepRow>, IoError> {
    let mut lines = text.lines().filter(|l| !l.trim().is_empty());
    if lines.next().map(str::trim) != Some(CSV_HEADER) {
        return Err(IoError::Config("missing or unexpected CSV header".into()));
    }
    lines.map(SweepRow::from_csv).collect()
}

/// `a..b` doubling from `a` while `<= b`, or a single value.
pub fn parse_range(s: &str) -> Result<Vec<u64>, IoError> {
    let bad = || IoError::Config(format!("bad range `{s}` (expected `a..b` or a number)"));
    match s.split_once("..") {
        None => Ok(vec![s.trim().parse().map_err(|_| bad())?]),
        Some((a, b)) => {
            let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
            if a == 0 || a > b {
                return Err(bad());
            }
            let mut out = Vec::new();
            let mut x = a;
            while x <= b {
                out.push(x);
                x = match x.checked_mul(2) {
                    Some(y) => y,
                    None => break,
                };
            }
            Ok(out)
        }
    }
}

/// Recursion depth with `n0^k = n`.
fn depth_for(n0: usize, n: u64) -> Result<usize, IoError> {
    let mut k = 0;
    let mut x = 1u64;
    while x < n {
        x *= n0 as u64;
        k += 1;
    }
    if x == n && k > 0 {
        Ok(k)
    } else {
        Err(IoError::Config(format!("n = {n} is not a positive power of {n0}")))
    }
}

/// Run every configuration of the cross product; rows are ordered by
/// `(n, M, policy, schedule)` as given, independent of `jobs`.
pub fn sweep(cfg: &SweepConfig) -> Result<Vec<SweepRow>, IoError> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs.max(1))
        .build()
        .map_err(|e| IoError::Config(e.to_string()))?;
    let schemes = std::slice::from_ref(&cfg.scheme);
    let mut rows = Vec::new();
    for &n in &cfg.ns {
        let k = depth_for(cfg.scheme.n0, n)?;
        let layout = Layout::new(schemes, k, Part::Full, true)?;
        let explicit = layout.num_vertices() <= cfg.explicit_limit;
        let graph = if explicit { Some(build_full(schemes, k, BuildOptions::default())?) } else { None };
        let jobs: Vec<(usize, Policy, SweepSchedule)> = cfg
            .ms
            .iter()
            .flat_map(|&m| cfg.policies.iter().flat_map(move |&p| cfg.schedules.iter().map(move |&s| (m, p, s))))
            .collect();
        let chunk: Vec<Result<SweepRow, IoError>> = pool.install(|| {
            jobs.par_iter().map(|&(m, p, s)| run_one(cfg, n, k, &layout, graph.as_ref(), m, p, s)).collect()
        });
        for r in chunk {
            rows.push(r?);
        }
    }
    Ok(rows)
}

#[allow(clippy::too_many_arguments)]
fn run_one(
    cfg: &SweepConfig,
    n: u64,
    k: usize,
    layout: &Layout,
    graph: Option<&Cdag>,
    m: usize,
    policy: Policy,
    schedule: SweepSchedule,
) -> Result<SweepRow, IoError> {
    let cutoff = match schedule {
        SweepSchedule::DfsBlock => block_depth_for(layout, m),
        _ => None,
    };
    let (report, seg) = match graph {
        Some(g) => {
            let sched = match schedule {
                SweepSchedule::Dfs | SweepSchedule::DfsBlock => dfs_schedule(g, cutoff)?,
                SweepSchedule::Bfs => bfs_schedule(g),
                SweepSchedule::Random => random_topo_schedule(g, cfg.seed),
            };
            let report = simulate(g, &sched, m, policy)?;
            (report, Some(optimal_segment_bound(g, &sched, m)?))
        }
        None => match schedule {
            SweepSchedule::Dfs | SweepSchedule::DfsBlock => {
                (simulate_implicit(std::slice::from_ref(&cfg.scheme), k, true, cutoff, m, policy)?, None)
            }
            _ => {
                return Err(IoError::Config(format!(
                    "n = {n} has {} vertices, above the explicit limit {}; only dfs schedules run implicitly",
                    layout.num_vertices(),
                    cfg.explicit_limit
                )))
            }
        },
    };
    let q = BoundQuery {
        base: Some((cfg.scheme.n0 as u64, cfg.scheme.m as u64)),
        ..BoundQuery::new(n, m as u64, cfg.scheme.omega0())
    };
    let value = |b: crate::bounds::BoundValue| b.exact.map_or(b.value, |x| x as f64);
    let lower = value(sequential_lower(&q).map_err(|e| IoError::Config(e.to_string()))?);
    let upper = value(upper_bound(&q).map_err(|e| IoError::Config(e.to_string()))?);
    Ok(SweepRow {
        scheme: cfg.scheme.name.clone(),
        n,
        k,
        m_words: m,
        policy,
        schedule: schedule.label().to_string(),
        reads: report.reads,
        writes: report.writes,
        total: report.total,
        seg_bound_clamped: seg.as_ref().map(|s| s.bound),
        seg_bound_raw: seg.as_ref().map(|s| s.raw),
        s_star: seg.as_ref().map(|s| s.segment_size),
        closed_form_lower: lower,
        closed_form_upper: upper,
        ratio: report.total as f64 / lower,
    })
}

/// Least-squares slope of `log2 y` against `log2 x`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = points.iter().map(|&(x, y)| (x.log2(), y.log2())).collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ranges() {
        assert_eq!(parse_range("32..512").unwrap(), vec![32, 64, 128, 256, 512]);
        assert_eq!(parse_range("8..100").unwrap(), vec![8, 16, 32, 64]);
        assert_eq!(parse_range("64").unwrap(), vec![64]);
        assert!(parse_range("0..4").is_err());
        assert!(parse_range("9..4").is_err());
        assert!(parse_range("x").is_err());
    }

    #[test]
    fn rows_and_round_trip() {
        let mut cfg = SweepConfig::new(BilinearScheme::strassen());
        cfg.ns = vec![4, 8];
        cfg.ms = vec![16, 64];
        cfg.policies = vec![Policy::Belady, Policy::Lru];
        cfg.schedules = vec![SweepSchedule::Dfs, SweepSchedule::DfsBlock, SweepSchedule::Random];
        cfg.jobs = 2;
        let rows = sweep(&cfg).unwrap();
        assert_eq!(rows.len(), 2 * 2 * 2 * 3);
        for r in &rows {
            assert!(r.total >= r.seg_bound_clamped.unwrap());
        }
        let text = to_csv(&rows);
        assert_eq!(parse_csv(&text).unwrap(), rows);
        cfg.jobs = 1;
        assert_eq!(sweep(&cfg).unwrap(), rows);
    }

    #[test]
    fn implicit_rows_leave_bounds_blank() {
        let mut cfg = SweepConfig::new(BilinearScheme::strassen());
        cfg.ns = vec![8];
        cfg.ms = vec![16];
        cfg.explicit_limit = 10;
        let rows = sweep(&cfg).unwrap();
        assert_eq!(rows[0].seg_bound_clamped, None);
        cfg.explicit_limit = usize::MAX;
        let full = sweep(&cfg).unwrap();
        assert_eq!(full[0].total, rows[0].total);
        cfg.schedules = vec![SweepSchedule::Bfs];
        cfg.explicit_limit = 10;
        assert!(sweep(&cfg).is_err());
    }

    #[test]
    fn depth() {
        assert_eq!(depth_for(2, 32).unwrap(), 5);
        assert_eq!(depth_for(3, 27).unwrap(), 3);
        assert!(depth_for(2, 12).is_err());
        assert!(depth_for(2, 1).is_err());
    }

    #[test]
    fn slope_of_power_law() {
        let pts: Vec<(f64, f64)> = (1..6).map(|i| (2f64.powi(i), 3.0 * 2f64.powf(2.5 * i as f64))).collect();
        assert!((loglog_slope(&pts) - 2.5).abs() < 1e-12);
    }
}
