//! Command-line driver: load a Cartan structure, sample points, run the
//! selected verification suites and write a JSON report, or dump tensors at
//! one point.

use std::collections::BTreeSet;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use cartan_lab::run::{dump_tensors, run, RunConfig, RunError, Suite, VMode};

#[derive(Debug, Parser)]
#[command(
    name = "cartan-lab",
    about = "Verify the almost-Kahler lift of a Cartan structure at sampled points",
    after_help = "Exit codes: 0 all hard checks pass, 1 a hard check failed, 2 bad input.\n\
                  CARTAN_LAB_TOL_SCALE multiplies every tolerance (default 1)."
)]
struct Cli {
    /// Fundamental function K(x, p), e.g. "sqrt(p1^2+p2^2)"
    #[arg(long = "k-expr")]
    k_expr: Option<String>,

    /// Built-in structure: euclidean | hyperbolic-half-plane | sphere-patch | randers
    #[arg(long, conflicts_with = "k_expr")]
    preset: Option<String>,

    /// Base dimension n (coordinates x1..xn, p1..pn)
    #[arg(long)]
    n: Option<usize>,

    #[arg(long, allow_negative_numbers = true)]
    alpha: Option<f64>,

    #[arg(long, allow_negative_numbers = true)]
    beta: Option<f64>,

    /// Target constant curvature c
    #[arg(long, allow_negative_numbers = true)]
    c: Option<f64>,

    /// Explicit lift constant v (default: linked, v = -c*alpha*beta^2)
    #[arg(long, allow_negative_numbers = true)]
    v: Option<f64>,

    /// Sample points per suite
    #[arg(long)]
    points: Option<usize>,

    #[arg(long)]
    seed: Option<u64>,

    /// Chart box, "x1:lo:hi,x2:lo:hi" (or positional "lo:hi,lo:hi")
    #[arg(long)]
    domain: Option<String>,

    /// Momentum annulus "rmin:rmax"
    #[arg(long = "p-annulus")]
    p_annulus: Option<String>,

    /// Comma-separated suites (base,kahler,connection,curvature,einstein,symmetry) or "all"
    #[arg(long, default_value = "all")]
    suites: String,

    /// Write the JSON report here
    #[arg(long)]
    report: Option<PathBuf>,

    /// Dump tensors at "x1,x2;p1,p2" instead of running suites
    #[arg(long = "dump-at")]
    dump_at: Option<String>,

    /// Worker threads for point-level parallelism (0 = automatic)
    #[arg(long)]
    threads: Option<usize>,
}

fn parse_domain(text: &str, n: usize) -> Result<Vec<(f64, f64)>, String> {
    let mut out = vec![None; n];
    let mut next_slot = 0usize;
    for part in text.split(',') {
        let pieces: Vec<&str> = part.split(':').collect();
        let (slot, lo, hi) = match pieces.as_slice() {
            [name, lo, hi] => {
                let name = name.trim();
                let index: usize = name
                    .strip_prefix('x')
                    .and_then(|d| d.parse().ok())
                    .ok_or_else(|| format!("bad domain coordinate name `{name}`"))?;
                if index < 1 || index > n {
                    return Err(format!("domain coordinate `{name}` out of range 1..{n}"));
                }
                (index - 1, *lo, *hi)
            }
            [lo, hi] => {
                let slot = next_slot;
                next_slot += 1;
                (slot, *lo, *hi)
            }
            _ => return Err(format!("bad domain range `{part}` (want x1:lo:hi)")),
        };
        if slot >= n {
            return Err(format!("more domain ranges than coordinates (n = {n})"));
        }
        let lo: f64 = lo.trim().parse().map_err(|_| format!("bad bound `{lo}`"))?;
        let hi: f64 = hi.trim().parse().map_err(|_| format!("bad bound `{hi}`"))?;
        out[slot] = Some((lo, hi));
    }
    out.into_iter()
        .enumerate()
        .map(|(i, r)| r.ok_or(format!("missing domain range for x{}", i + 1)))
        .collect()
}

fn parse_annulus(text: &str) -> Result<(f64, f64), String> {
    let pieces: Vec<&str> = text.split(':').collect();
    match pieces.as_slice() {
        [lo, hi] => {
            let lo: f64 = lo.trim().parse().map_err(|_| format!("bad radius `{lo}`"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| format!("bad radius `{hi}`"))?;
            Ok((lo, hi))
        }
        _ => Err(format!("bad annulus `{text}` (want rmin:rmax)")),
    }
}

fn parse_point(text: &str) -> Result<(Vec<f64>, Vec<f64>), String> {
    let halves: Vec<&str> = text.split(';').collect();
    let [xs, ps] = halves.as_slice() else {
        return Err(format!("bad point `{text}` (want x1,x2;p1,p2)"));
    };
    let parse_list = |s: &str| -> Result<Vec<f64>, String> {
        s.split(',')
            .map(|v| v.trim().parse().map_err(|_| format!("bad number `{v}`")))
            .collect()
    };
    Ok((parse_list(xs)?, parse_list(ps)?))
}

fn parse_suites(text: &str) -> Result<BTreeSet<Suite>, String> {
    if text.trim() == "all" {
        return Ok(Suite::ALL.into_iter().collect());
    }
    text.split(',')
        .map(|name| {
            Suite::from_name(name.trim()).ok_or_else(|| format!("unknown suite `{name}`"))
        })
        .collect()
}

fn build_config(cli: &Cli) -> Result<RunConfig, String> {
    let mut config = match &cli.preset {
        Some(name) => RunConfig::preset(name)
            .ok_or_else(|| format!("unknown preset `{name}` (euclidean, hyperbolic-half-plane, sphere-patch, randers)"))?,
        None => {
            let expression = cli
                .k_expr
                .clone()
                .ok_or("one of --k-expr or --preset is required")?;
            let n = cli.n.unwrap_or(2);
            RunConfig {
                expression,
                n,
                alpha: 1.0,
                beta: 1.0,
                c: 0.0,
                v_mode: VMode::Linked,
                domain: vec![(-1.0, 1.0); n],
                p_annulus: (0.5, 1.5),
                points: 100,
                seed: 42,
                suites: Suite::ALL.into_iter().collect(),
                threads: 0,
            }
        }
    };
    if let Some(expr) = &cli.k_expr {
        config.expression = expr.clone();
    }
    if let Some(n) = cli.n {
        if n != config.n {
            config.n = n;
            config.domain = vec![(-1.0, 1.0); n];
        }
    }
    if let Some(alpha) = cli.alpha {
        config.alpha = alpha;
    }
    if let Some(beta) = cli.beta {
        config.beta = beta;
    }
    if let Some(c) = cli.c {
        config.c = c;
    }
    if let Some(v) = cli.v {
        config.v_mode = VMode::Explicit(v);
    }
    if let Some(points) = cli.points {
        config.points = points;
    }
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(domain) = &cli.domain {
        config.domain = parse_domain(domain, config.n)?;
    }
    if let Some(annulus) = &cli.p_annulus {
        config.p_annulus = parse_annulus(annulus)?;
    }
    if let Some(threads) = cli.threads {
        config.threads = threads;
    }
    config.suites = parse_suites(&cli.suites)?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(2)
        }
    }
}

fn execute(cli: &Cli) -> Result<ExitCode, String> {
    let config = build_config(cli)?;

    if let Some(spec) = &cli.dump_at {
        let (x, p) = parse_point(spec)?;
        let dump = dump_tensors(&config, x, p).map_err(render_run_error)?;
        let json = serde_json::to_string_pretty(&dump).map_err(|e| e.to_string())?;
        match &cli.report {
            Some(path) => std::fs::write(path, &json).map_err(|e| e.to_string())?,
            None => println!("{json}"),
        }
        return Ok(ExitCode::SUCCESS);
    }

    let outcome = run(&config).map_err(render_run_error)?;
    let report = &outcome.report;

    println!(
        "cartan-lab: {} | n = {} | alpha = {} beta = {} c = {} v = {}{}",
        config.expression,
        config.n,
        config.alpha,
        config.beta,
        config.c,
        report.meta.v,
        if report.meta.v_linked { " (linked)" } else { "" }
    );
    println!(
        "points = {} | seed = {} | jet order = {} | suites = {}",
        config.points,
        config.seed,
        report.meta.jet_order,
        report.meta.suites.join(",")
    );
    println!();
    println!(
        "{:<38} {:>12} {:>9}  {:<6} kind",
        "check", "max residual", "tol", "result"
    );
    for check in &report.checks {
        println!(
            "{:<38} {:>12.3e} {:>9.1e}  {:<6} {}",
            check.name,
            check.max_abs_residual,
            check.tolerance,
            if check.pass { "pass" } else { "FAIL" },
            if check.hard { "hard" } else { "info" }
        );
    }
    println!();
    let verdicts = &report.verdicts;
    let show = |label: &str, v: Option<bool>| {
        if let Some(v) = v {
            println!("verdict {label}: {v}");
        }
    };
    show("almost_kahler", verdicts.almost_kahler);
    show("integrable", verdicts.integrable);
    show("einstein_consistent", verdicts.einstein_consistent);
    show(
        "locally_symmetric_consistent",
        verdicts.locally_symmetric_consistent,
    );
    show("riemannian_detected", verdicts.riemannian_detected);

    if let Some(path) = &cli.report {
        std::fs::write(path, report.to_json()).map_err(|e| e.to_string())?;
        println!("report written to {}", path.display());
    }

    if outcome.exit_code != 0 {
        let failed: Vec<&str> = report
            .failed_hard_checks()
            .iter()
            .map(|c| c.name.as_str())
            .collect();
        eprintln!("hard checks failed: {}", failed.join(", "));
        return Ok(ExitCode::from(1));
    }
    Ok(ExitCode::SUCCESS)
}

fn render_run_error(e: RunError) -> String {
    e.to_string()
}
