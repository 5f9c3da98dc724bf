mod output;

use clap::{Args, Parser, Subcommand};
use num_rational::BigRational;
use output::{render, Format, Report};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::{json, Value};
use spherical_lab::farey::farey_check;
use spherical_lab::lattice::{LatticeFunction, RdTable};
use spherical_lab::maximal_lab::{family_ratios, restricted_ratio_budget, scaling_fit, Family};
use spherical_lab::moment_lab::{gauss_bound_sweep, kloosterman_slope, lcm_reciprocal_sum_exact, lcm_slope, moment_slope_budget};
use spherical_lab::msw_symbols::{
    block_kernel_spectral, compare_kernels, exact_symbol, sphere_measure_dft, Grid, QmcConfig, SymbolContext,
};
use spherical_lab::regions::{emit_all, necessary_region, region_vertices, ExponentPoint, RegionName};
use spherical_lab::sparse::{domination_of_tree, sparsity_check, stopping_decomposition, to_sparse, StoppingConfig};
use spherical_lab::LabError;
use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

#[derive(Parser)]
#[command(name = "spherical-lab", version, about = "Experiments on discrete spherical averages")]
struct Cli {
    /// worker threads; SPHERICAL_LAB_THREADS overrides, default all cores
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// largest number of elementary terms a single evaluation may touch
    #[arg(long, global = true, default_value_t = 1 << 31, value_parser = positive)]
    budget: u64,
    /// write the artifact here instead of stdout
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Moments of dyadic blocks of Ramanujan sums and their log-log slope
    RamanujanMoment(MomentArgs),
    /// Sums of 1/lcm over dyadic k-tuples and their log-log slope
    LcmSum(LcmArgs),
    /// Normalized restricted Kloosterman maxima over primes
    KloostermanScan(KloostermanArgs),
    /// Gauss sum bound over moduli, dimensions, units and frequencies
    GaussScan(GaussArgs),
    /// Farey interval, covering and neighbor checks up to a level
    FareyCheck(FareyArgs),
    /// Table of r_d(n)
    RdTable(RdArgs),
    /// Restricted weak-type ratios of the dyadic maximal function
    MaxopRatio(MaxopRatioArgs),
    /// Log-log fit of the restricted ratios over dyadic scales
    MaxopScaling(MaxopScalingArgs),
    /// FFT of the sphere measure against the exact symbol
    SymbolCompare(SymbolArgs),
    /// Spectral block kernel against the quadrature kernel
    KernelCheck(KernelArgs),
    /// Vertex tables of the exponent regions
    RegionsEmit(RegionsArgs),
    /// Stopping-time decompositions of random set pairs
    SparseVerify(SparseArgs),
}

fn positive(s: &str) -> Result<u64, String> {
    match s.parse::<u64>() {
        Ok(0) => Err("must be positive".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn rational(s: &str) -> Result<String, String> {
    BigRational::from_str(s).map_err(|e| format!("{s:?} is not num/den: {e}"))?;
    Ok(s.to_string())
}

fn exponent_point(p: &str, r: &str) -> ExponentPoint {
    ExponentPoint::new(BigRational::from_str(p).unwrap(), BigRational::from_str(r).unwrap())
}

fn dyadic_range(lo: u64, hi: u64) -> Vec<u64> {
    let mut out = vec![];
    let mut q = lo.max(1);
    while q <= hi {
        out.push(q);
        q *= 2;
    }
    out
}

#[derive(Args, Serialize)]
struct MomentArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 2)]
    q_min: u64,
    #[arg(long, default_value_t = 1024)]
    q_max: u64,
    /// first n of the averaging window [N, N + Q^k)
    #[arg(long, default_value_t = 1)]
    n_start: u64,
    /// fail when the slope exceeds this and the fit has R^2 >= 0.9
    #[arg(long)]
    max_slope: Option<f64>,
}

#[derive(Args, Serialize)]
struct LcmArgs {
    #[arg(long, default_value_t = 2)]
    k: u32,
    #[arg(long, default_value_t = 2)]
    q_min: u64,
    #[arg(long, default_value_t = 4096)]
    q_max: u64,
    #[arg(long)]
    max_slope: Option<f64>,
    /// also report each sum as an exact fraction
    #[arg(long)]
    exact: bool,
}

#[derive(Args, Serialize)]
struct KloostermanArgs {
    #[arg(long, default_value_t = 211)]
    q_max: u64,
    #[arg(long)]
    max_slope: Option<f64>,
}

#[derive(Args, Serialize)]
struct GaussArgs {
    #[arg(long, default_value_t = 256)]
    q_max: u64,
    #[arg(long, default_value_t = 5)]
    d_max: usize,
    /// frequencies sampled per (q, d)
    #[arg(long, default_value_t = 1000)]
    samples: usize,
}

#[derive(Args, Serialize)]
struct FareyArgs {
    #[arg(long, default_value_t = 128)]
    lambda_max: u64,
    /// random circle points per level
    #[arg(long, default_value_t = 1000)]
    random: usize,
}

#[derive(Args, Serialize)]
struct RdArgs {
    #[arg(long, default_value_t = 5)]
    d_max: usize,
    #[arg(long, default_value_t = 200)]
    n_max: u64,
}

#[derive(Args, Serialize)]
struct MaxopRatioArgs {
    /// ball, box, shell, random_density or point
    #[arg(long, default_value = "ball")]
    family: String,
    /// test set as a lattice function text file; overrides --family
    #[arg(long)]
    set: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// dyadic scale L
    #[arg(long, default_value_t = 4)]
    level: u64,
    /// 1/p
    #[arg(long, default_value = "1/2", value_parser = rational)]
    p: String,
    /// 1/r
    #[arg(long, default_value = "1/2", value_parser = rational)]
    r: String,
}

#[derive(Args, Serialize)]
struct MaxopScalingArgs {
    /// one family, or every deterministic one when omitted
    #[arg(long)]
    family: Option<String>,
    #[arg(long, default_value_t = 5)]
    d: usize,
    #[arg(long, value_delimiter = ',', default_value = "1,2,4,8")]
    lambdas: Vec<u64>,
    #[arg(long, default_value = "1/2", value_parser = rational)]
    p: String,
    #[arg(long, default_value = "1/2", value_parser = rational)]
    r: String,
    #[arg(long)]
    max_slope: Option<f64>,
}

#[derive(Args, Serialize)]
struct SymbolArgs {
    #[arg(long, default_value_t = 3)]
    d: usize,
    /// squared radius
    #[arg(long, default_value_t = 21)]
    n: u64,
    #[arg(long, default_value_t = 4)]
    level: u64,
    /// grid width of the FFT
    #[arg(long, default_value_t = 64)]
    grid: usize,
    /// compare only this many random grid points instead of all
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long, default_value_t = 1e-9)]
    tol: f64,
}

#[derive(Args, Serialize)]
struct KernelArgs {
    #[arg(long, default_value_t = 2)]
    d: usize,
    #[arg(long, default_value_t = 5)]
    n: u64,
    #[arg(long, default_value_t = 2)]
    level: u64,
    /// block [Q, 2Q)
    #[arg(long, default_value_t = 1)]
    q: u64,
    #[arg(long, default_value_t = 32)]
    grid: usize,
    /// random spot points besides the origin
    #[arg(long, default_value_t = 3)]
    points: usize,
    #[arg(long, default_value_t = 1e-7)]
    rel_target: f64,
    #[arg(long, default_value_t = 1 << 18)]
    max_samples: usize,
    /// images with a smaller majorant are bounded instead of evaluated
    #[arg(long, default_value_t = 1e-9)]
    image_threshold: f64,
}

#[derive(Args, Serialize)]
struct RegionsArgs {
    #[arg(long, default_value_t = 6)]
    d: u32,
}

#[derive(Args, Serialize)]
struct SparseArgs {
    #[arg(long, default_value_t = 5)]
    d: usize,
    /// random sets live in [0, side)^d
    #[arg(long, default_value_t = 32)]
    side: i64,
    /// points per set
    #[arg(long, default_value_t = 50)]
    size: usize,
    #[arg(long, default_value_t = 20)]
    pairs: usize,
    #[arg(long, default_value = "1/2", value_parser = rational)]
    p: String,
    #[arg(long, default_value = "1/2", value_parser = rational)]
    r: String,
    /// the maximal function runs over radii below 2 lambda_max
    #[arg(long, default_value_t = 2)]
    lambda_max: u64,
    #[arg(long, default_value_t = 1.0)]
    c0: f64,
    /// also rerun each pair shifted by this multiple of 2^20 and compare bits
    #[arg(long, default_value_t = 1)]
    shift: i64,
}

fn run(cli: &Cli) -> Result<(&'static str, Value, Report), LabError> {
    let seed = cli.seed;
    let budget = cli.budget;
    Ok(match &cli.cmd {
        Cmd::RamanujanMoment(a) => {
            let qs = dyadic_range(a.q_min, a.q_max);
            let rep = moment_slope_budget(a.k, &qs, a.n_start, budget)?;
            let ok = match a.max_slope {
                Some(m) => rep.fit.r2 < 0.9 || rep.fit.slope <= m,
                None => true,
            };
            let rows = rep.points.iter().map(|(q, v)| json!({"q": q, "value": v})).collect();
            ("ramanujan-moment", json!(a), Report::new(ok, json!(rep)).rows(rows))
        }
        Cmd::LcmSum(a) => {
            let qs = dyadic_range(a.q_min, a.q_max);
            let rep = lcm_slope(a.k, &qs)?;
            let ok = a.max_slope.is_none_or(|m| rep.fit.slope <= m);
            let mut result = json!(rep);
            let mut rows: Vec<Value> = rep.points.iter().map(|(q, v)| json!({"q": q, "value": v})).collect();
            if a.exact {
                for (row, &q) in rows.iter_mut().zip(&qs) {
                    row["exact"] = json!(lcm_reciprocal_sum_exact(q, a.k, budget)?.to_string());
                }
                result["exact"] = json!(rows.iter().map(|r| r["exact"].clone()).collect::<Vec<_>>());
            }
            ("lcm-sum", json!(a), Report::new(ok, result).rows(rows))
        }
        Cmd::KloostermanScan(a) => {
            let rep = kloosterman_slope(a.q_max);
            let ok = a.max_slope.is_none_or(|m| rep.fit.slope <= m);
            let rows = rep
                .primes
                .iter()
                .zip(&rep.normalized_max)
                .map(|(q, v)| json!({"q": q, "normalized_max": v}))
                .collect();
            ("kloosterman-scan", json!(a), Report::new(ok, json!(rep)).rows(rows))
        }
        Cmd::GaussScan(a) => {
            let rep = gauss_bound_sweep(a.q_max, a.d_max, a.samples, seed);
            let ok = rep.violations == 0;
            let row = json!(rep);
            ("gauss-scan", json!(a), Report::new(ok, row.clone()).rows(vec![row]))
        }
        Cmd::FareyCheck(a) => {
            let rep = farey_check(a.lambda_max, a.random, seed);
            let ok = rep.violations == 0 && rep.neighbor_mismatches == 0 && rep.partition_failures == 0;
            let row = json!(rep);
            ("farey-check", json!(a), Report::new(ok, row.clone()).rows(vec![row]))
        }
        Cmd::RdTable(a) => {
            let t = RdTable::new(a.d_max, a.n_max);
            let mut rows = vec![];
            let mut text = String::from("n");
            for d in 1..=a.d_max {
                text.push_str(&format!(" r{d}"));
            }
            text.push('\n');
            for n in 0..=a.n_max {
                let mut row = serde_json::Map::new();
                row.insert("n".into(), json!(n));
                text.push_str(&n.to_string());
                for d in 1..=a.d_max {
                    let r = t.get(d, n);
                    row.insert(format!("r{d}"), json!(r.to_string()));
                    text.push_str(&format!(" {r}"));
                }
                text.push('\n');
                rows.push(Value::Object(row));
            }
            let result = json!({"rows": rows});
            ("rd-table", json!(a), Report::new(true, result).rows(rows).text(text))
        }
        Cmd::MaxopRatio(a) => {
            let point = exponent_point(&a.p, &a.r);
            let est = match &a.set {
                Some(path) => {
                    let text = std::fs::read_to_string(path)?;
                    let f: LatticeFunction<f64> = LatticeFunction::from_text(&text)?;
                    let set: Vec<Vec<i64>> = f.iter().filter(|(_, v)| **v != 0.0).map(|(x, _)| x.clone()).collect();
                    vec![restricted_ratio_budget(&set, &point, a.level, budget)?]
                }
                None => {
                    let family = Family::from_str(&a.family)?;
                    family_ratios(family, &point, a.d, a.level, seed, budget)?
                }
            };
            let rows = est.iter().map(|e| json!(e)).collect();
            ("maxop-ratio", json!(a), Report::new(true, json!(est)).rows(rows))
        }
        Cmd::MaxopScaling(a) => {
            let point = exponent_point(&a.p, &a.r);
            let families = match &a.family {
                Some(f) => vec![Family::from_str(f)?],
                None => vec![Family::Ball, Family::Box, Family::Shell],
            };
            let mut reports = vec![];
            let mut rows = vec![];
            let mut ok = true;
            for f in families {
                let rep = scaling_fit(f, &point, a.d, &a.lambdas, seed, budget)?;
                ok &= a.max_slope.is_none_or(|m| rep.fit.slope <= m);
                for (l, r) in rep.lambdas.iter().zip(&rep.ratios) {
                    rows.push(json!({"family": rep.family, "lambda": l, "ratio": r}));
                }
                reports.push(rep);
            }
            ("maxop-scaling", json!(a), Report::new(ok, json!(reports)).rows(rows))
        }
        Cmd::SymbolCompare(a) => {
            let ctx = SymbolContext::new(a.d, a.n, a.level)?;
            let dft = sphere_measure_dft(&ctx, a.grid)?;
            let shape = Grid {
                d: a.d,
                n: a.grid,
                data: vec![],
            };
            let idxs: Vec<usize> = match a.samples {
                Some(s) => {
                    let mut rng = ChaCha8Rng::seed_from_u64(seed);
                    (0..s).map(|_| rng.gen_range(0..dft.len())).collect()
                }
                None => (0..dft.len()).collect(),
            };
            let mut max_err = 0.0f64;
            let mut worst = vec![];
            for &i in &idxs {
                let k = shape.point(i);
                let xi: Vec<f64> = k.iter().map(|&c| c as f64 / a.grid as f64).collect();
                let e = (dft[i] - exact_symbol(&ctx, &xi)).norm();
                if e > max_err {
                    max_err = e;
                    worst = k;
                }
            }
            let result = json!({"compared": idxs.len(), "max_error": max_err, "worst": worst, "sphere_points": ctx.sphere().len()});
            let row = result.clone();
            ("symbol-compare", json!(a), Report::new(max_err <= a.tol, result).rows(vec![row]))
        }
        Cmd::KernelCheck(a) => {
            let ctx = SymbolContext::new(a.d, a.n, a.level)?;
            let grid = block_kernel_spectral(a.q, &ctx, a.grid)?;
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let half = a.grid as i64 / 2;
            let mut xs = vec![vec![0i64; a.d]];
            for _ in 0..a.points {
                xs.push((0..a.d).map(|_| rng.gen_range(-half..half)).collect());
            }
            let cfg = QmcConfig {
                rel_target: a.rel_target,
                max_samples: a.max_samples,
                seed,
                ..Default::default()
            };
            let cmp = compare_kernels(a.q, &ctx, &grid, &xs, &cfg, a.image_threshold)?;
            let ok = cmp.iter().all(|c| c.ok);
            let rows = cmp.iter().map(|c| json!(c)).collect();
            ("kernel-check", json!(a), Report::new(ok, json!(cmp)).rows(rows))
        }
        Cmd::RegionsEmit(a) => {
            let mut regions = vec![];
            for name in RegionName::ALL {
                match region_vertices(name, a.d) {
                    Ok(r) => regions.push(r),
                    Err(LabError::InvalidArgument(_)) => continue,
                    Err(e) => return Err(e),
                }
            }
            regions.push(necessary_region(a.d));
            let rows = regions
                .iter()
                .flat_map(|r| {
                    r.vertices
                        .iter()
                        .map(|v| json!({"region": r.label, "inv_p": v.inv_p.to_string(), "inv_r": v.inv_r.to_string()}))
                })
                .collect();
            let text = emit_all(a.d)?;
            ("regions-emit", json!(a), Report::new(true, json!(regions)).rows(rows).text(text))
        }
        Cmd::SparseVerify(a) => sparse_verify(a, seed)?,
    })
}

fn sparse_verify(a: &SparseArgs, seed: u64) -> Result<(&'static str, Value, Report), LabError> {
    if a.d == 0 || a.side <= 0 || a.size == 0 {
        return Err(LabError::InvalidArgument("need d, side and size positive".into()));
    }
    let point = exponent_point(&a.p, &a.r);
    let cfg = StoppingConfig {
        c0: a.c0,
        n_max: 4 * a.lambda_max * a.lambda_max - 1,
        ..Default::default()
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draw =
        |rng: &mut ChaCha8Rng| -> Vec<Vec<i64>> { (0..a.size).map(|_| (0..a.d).map(|_| rng.gen_range(0..a.side)).collect()).collect() };
    let offset = a.shift << 20;
    let shifted = |s: &[Vec<i64>]| -> Vec<Vec<i64>> { s.iter().map(|x| x.iter().map(|v| v + offset).collect()).collect() };
    let mut rows = vec![];
    let mut ok = true;
    for pair in 0..a.pairs {
        let e1 = draw(&mut rng);
        let e2 = draw(&mut rng);
        let tree = stopping_decomposition(&e1, &e2, &point, &cfg)?;
        let classes = to_sparse(&tree);
        let sparse = classes.iter().all(|c| sparsity_check(c, c.rho).ok);
        let dom = domination_of_tree(&tree, &e1, &e2, &point)?;
        let tree_b = stopping_decomposition(&shifted(&e1), &shifted(&e2), &point, &cfg)?;
        let dom_b = domination_of_tree(&tree_b, &shifted(&e1), &shifted(&e2), &point)?;
        let invariant = dom.ratio.to_bits() == dom_b.ratio.to_bits();
        let packing = tree.max_packing <= 0.01;
        let pass = sparse && invariant && packing && dom.ratio.is_finite();
        ok &= pass;
        rows.push(json!({
            "pair": pair,
            "nodes": tree.nodes,
            "depth": tree.depth,
            "c0": tree.c0,
            "doublings": tree.doublings,
            "max_packing": tree.max_packing,
            "classes": classes.len(),
            "sparse": sparse,
            "inner": dom.inner,
            "form": dom.form,
            "ratio": dom.ratio,
            "translation_invariant": invariant,
            "pass": pass,
        }));
    }
    let result = json!({"pairs": rows.clone()});
    Ok(("sparse-verify", json!(a), Report::new(ok, result).rows(rows)))
}

fn exit_code(e: &LabError) -> u8 {
    match e {
        LabError::BudgetExceeded(_) | LabError::RecursionBudget { .. } | LabError::QuadratureNotConverged { .. } => 3,
        LabError::PropositionViolation { .. } | LabError::InvalidPartition(_) => 1,
        _ => 2,
    }
}

fn threads(cli: &Cli) -> Result<Option<usize>, String> {
    match std::env::var("SPHERICAL_LAB_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(format!("SPHERICAL_LAB_THREADS={v:?} is not a positive integer")),
        },
        Err(_) => match cli.threads {
            Some(0) => Err("--threads must be positive".into()),
            t => Ok(t),
        },
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let n = match threads(&cli) {
        Ok(n) => n,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = n {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    let t0 = Instant::now();
    let (command, params, report) = match pool.install(|| run(&cli)) {
        Ok(r) => r,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(exit_code(&e));
        }
    };
    let written = match &cli.out {
        Some(path) => std::fs::File::create(path).and_then(|f| render(command, &params, &report, cli.format, std::io::BufWriter::new(f))),
        None => render(command, &params, &report, cli.format, std::io::stdout().lock()),
    };
    if let Err(e) = written {
        eprintln!("error: writing output: {e}");
        return ExitCode::from(2);
    }
    eprintln!("{command}: {:.3} s, ok={}", t0.elapsed().as_secs_f64(), report.ok);
    if report.ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}
