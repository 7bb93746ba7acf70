use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{CommandFactory, Parser, Subcommand, ValueEnum};
use ratdyn::bimodule::{normalized_witness, reverify_normalized, reverify_witness, simplicity_witness, WitnessOptions};
use ratdyn::expr::{parse_complex, parse_test_function};
use ratdyn::io::{report_json, write_cloud_csv, write_julia_csv, write_pgm, write_trace_csv};
use ratdyn::julia::{
    critical_points_in_julia, default_start, render, sample_inverse_iteration, sample_tree, JuliaCloud, RenderMode, RenderOptions, Window,
    DEFAULT_BURN_IN, DEFAULT_CRITICAL_TOL,
};
use ratdyn::measure::{lyubich_exact, lyubich_mc, WeightedCloud};
use ratdyn::registry::{self, resolve_map, VerifyOptions};
use ratdyn::transfer::{kms_iterate_many, Observable, KMS_BUDGET};
use ratdyn::{Error, RationalMap, SpherePoint};
use serde::Serialize;

const GRAMMAR: &str = "\
MAP SPECIFICATIONS
  A map is one of
    * a catalog entry, optionally with a parameter:  power_map_n:3, quadratic_family:-1,
      tchebychev_n:4, z2_minus_2, lattes, ushiki_gasket, full_shift_example
    * an expression in z, with '/' between numerator and denominator:
      'z^2 - 2', '(2z^2 - 1)/z', '(z^2+1)^2/(4z(z^2-1))', 'z^2 + (-0.1+0.65i)'
    * coefficient lists in ascending powers: '[-1, 0, 2]/[0, 1]'

EXPRESSION GRAMMAR
  expr  := term (('+' | '-') term)*
  term  := unary (('*' | '/')? unary)*      juxtaposition multiplies: 4z(z-1)
  unary := ('-' | '+') unary | power
  power := atom ('^' int)?
  atom  := number | z | zbar | i | func '(' expr ')' | '(' expr ')'
  func  := conj | re | im | abs
  Numbers are decimals with an optional exponent; write rationals as 16/27.
  Maps use z, numbers and i only. Test functions (--test, --a) may also use
  zbar and the functions, e.g. 'z*zbar', 're(z)^2', 'abs(z - 1)'.

CONFIGURATION
  --config FILE reads 'key = value' lines naming long flags ('levels = 12',
  'seed = 7'). Flags given on the command line win. Lines starting with '#'
  are comments. 'flag = true' sets a switch.

EXIT STATUS
  0 success, 1 a check or witness failed, 2 invalid input.";

#[derive(Parser, Debug)]
#[command(
    name = "ratdyn",
    version,
    about = "Rational maps on the Riemann sphere: fibers, Julia sets, Lyubich measure, transfer operators"
)]
#[command(after_long_help = GRAMMAR)]
struct Cli {
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = "RATDYN_THREADS")]
    threads: Option<usize>,

    /// File of `key = value` lines mirroring long flags.
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Degree, critical data, Riemann-Hurwitz count and critical points in J.
    Info {
        map: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Weighted preimage fiber of a point under R^n.
    Preimage {
        map: String,
        /// Base point, e.g. `0`, `1-2i` or `inf`.
        #[arg(long, allow_hyphen_values = true)]
        point: String,
        #[arg(long, default_value_t = 1)]
        depth: u32,
        #[arg(long, value_enum, default_value_t = Format::Text)]
        format: Format,
    },
    /// Sample the Julia set to CSV, or render it to a PGM image.
    Julia {
        map: String,
        #[arg(long, value_enum, default_value_t = JuliaMethod::Inverse)]
        method: JuliaMethod,
        /// Points for inverse iteration.
        #[arg(long, default_value_t = 20_000)]
        samples: usize,
        /// Tree depth for `--method tree`.
        #[arg(long, default_value_t = 12)]
        depth: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cloud CSV (`re,im,is_infinity`).
        #[arg(long)]
        out: Option<PathBuf>,
        /// PGM (P5) image.
        #[arg(long)]
        render: Option<PathBuf>,
        /// `x_min,x_max,y_min,y_max`.
        #[arg(long, allow_hyphen_values = true, default_value = "-2,2,-2,2")]
        window: String,
        /// `WIDTHxHEIGHT`.
        #[arg(long, default_value = "512x512")]
        res: String,
        #[arg(long, value_enum, default_value_t = Mode::Auto)]
        mode: Mode,
        #[arg(long, default_value_t = 256)]
        max_iter: u32,
    },
    /// Pullback measure as a weighted cloud.
    Measure {
        map: String,
        #[arg(long, value_enum, default_value_t = MeasureMethod::Exact)]
        method: MeasureMethod,
        #[arg(long, default_value_t = 10)]
        depth: u32,
        /// Base point; defaults to a repelling fixed point.
        #[arg(long, allow_hyphen_values = true)]
        base: Option<String>,
        #[arg(long, default_value_t = 10_000)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Cloud CSV (`re,im,is_infinity,weight`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Iterate the normalised transfer operator on a test function.
    Kms {
        map: String,
        /// Test function, e.g. `z*zbar`.
        #[arg(long, allow_hyphen_values = true)]
        test: String,
        #[arg(long, default_value_t = 20)]
        levels: u32,
        #[arg(long, default_value_t = 16)]
        probes: usize,
        /// Stop once the variation over the probes drops below this.
        #[arg(long)]
        stop_below: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Trace CSV (`level,probe_index,re,im`).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Construct and check a simplicity witness for a positive function.
    Witness {
        map: String,
        /// Positive test function, e.g. `2+re(z)`.
        #[arg(long, allow_hyphen_values = true)]
        a: String,
        /// Tolerance in `||a|| - eps <= (f|af)`.
        #[arg(long)]
        eps: f64,
        /// Also build the normalised witness u.
        #[arg(long)]
        normalized: bool,
        #[arg(long, default_value_t = 200)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report JSON; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the numerical checks of catalog examples.
    Verify {
        /// `name` or `name:param`.
        #[arg(required_unless_present = "all", conflicts_with = "all")]
        example: Option<String>,
        /// Every catalog entry, in catalog order.
        #[arg(long)]
        all: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Report JSON; stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List catalog entries with their quoted facts.
    List,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Text,
    Csv,
    Json,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum JuliaMethod {
    Inverse,
    Tree,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MeasureMethod {
    Exact,
    Mc,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Mode {
    Auto,
    Escape,
    Density,
}

enum Failure {
    Invalid(String),
    Check(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Parse(_)
            | Error::InvalidMap(_)
            | Error::UnknownExample(_)
            | Error::Precondition(_)
            | Error::CommonFactor { .. }
            | Error::BudgetExceeded { .. }
            | Error::CoverTooCoarse { .. } => Failure::Invalid(e.to_string()),
            _ => Failure::Check(e.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Check(e.to_string())
    }
}

type CliResult<T = ()> = Result<T, Failure>;

fn main() -> ExitCode {
    let args = match apply_config(std::env::args_os().collect()) {
        Ok(a) => a,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let cli = Cli::parse_from(args);
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new().num_threads(n).build_global().ok();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Invalid(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Check(msg)) => {
            eprintln!("failed: {msg}");
            ExitCode::from(1)
        }
    }
}

/// Appends config-file flags that the command line did not set. Keys that
/// belong to another subcommand are skipped so one file can serve several.
fn apply_config(mut args: Vec<OsString>) -> Result<Vec<OsString>, String> {
    let pos = args
        .iter()
        .position(|a| a == "--config" || a.to_string_lossy().starts_with("--config="));
    let Some(pos) = pos else { return Ok(args) };
    let path = match args[pos].to_string_lossy().strip_prefix("--config=") {
        Some(p) => PathBuf::from(p),
        None => PathBuf::from(args.get(pos + 1).ok_or("--config needs a file")?),
    };
    let text = std::fs::read_to_string(&path).map_err(|e| format!("cannot read config {}: {e}", path.display()))?;

    let cmd = Cli::command();
    let sub = args
        .iter()
        .find_map(|a| cmd.find_subcommand(a.to_string_lossy().as_ref()))
        .ok_or("no subcommand given")?;
    let accepts = |key: &str| sub.get_arguments().any(|a| a.get_long() == Some(key)) || key == "threads";
    let known = |key: &str| cmd.get_subcommands().any(|s| s.get_arguments().any(|a| a.get_long() == Some(key)));
    let given = |key: &str, args: &[OsString]| {
        let flag = format!("--{key}");
        args.iter().any(|a| {
            let a = a.to_string_lossy();
            a == flag || a.starts_with(&format!("{flag}="))
        })
    };

    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("{}:{}: expected 'key = value'", path.display(), lineno + 1))?;
        let (key, value) = (key.trim(), value.trim().trim_matches('"'));
        if key == "config" {
            return Err("config files cannot include other config files".into());
        }
        if !accepts(key) {
            if known(key) {
                continue;
            }
            return Err(format!("{}:{}: unknown key '{key}'", path.display(), lineno + 1));
        }
        if given(key, &args) {
            continue;
        }
        match value {
            "true" => args.push(format!("--{key}").into()),
            "false" => {}
            v => args.push(format!("--{key}={v}").into()),
        }
    }
    Ok(args)
}

fn run(cmd: Command) -> CliResult {
    match cmd {
        Command::Info { map, seed } => info(&map, seed),
        Command::Preimage { map, point, depth, format } => preimage(&map, &point, depth, format),
        Command::Julia {
            map,
            method,
            samples,
            depth,
            seed,
            out,
            render,
            window,
            res,
            mode,
            max_iter,
        } => julia(&map, method, samples, depth, seed, out, render, &window, &res, mode, max_iter),
        Command::Measure {
            map,
            method,
            depth,
            base,
            samples,
            seed,
            out,
        } => measure(&map, method, depth, base.as_deref(), samples, seed, out),
        Command::Kms {
            map,
            test,
            levels,
            probes,
            stop_below,
            seed,
            out,
        } => kms(&map, &test, levels, probes, stop_below, seed, out),
        Command::Witness {
            map,
            a,
            eps,
            normalized,
            probes,
            seed,
            out,
        } => witness(&map, &a, eps, normalized, probes, seed, out),
        Command::Verify { example, all, seed, out } => verify(example.as_deref(), all, seed, out),
        Command::List => list(),
    }
}

fn parse_point(s: &str) -> CliResult<SpherePoint> {
    match s.trim() {
        "inf" | "infinity" | "∞" => Ok(SpherePoint::Infinity),
        other => Ok(SpherePoint::new(parse_complex(other)?)),
    }
}

fn emit(out: Option<&Path>, text: &str) -> CliResult {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn create(path: &Path) -> CliResult<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn cloud_for(map: &RationalMap, seed: u64, samples: usize) -> CliResult<JuliaCloud> {
    Ok(sample_inverse_iteration(map, &default_start(map)?, DEFAULT_BURN_IN, samples, seed)?)
}

#[derive(Serialize)]
struct CriticalRow {
    point: SpherePoint,
    branch_index: usize,
    critical_value: SpherePoint,
    in_julia: bool,
}

#[derive(Serialize)]
struct InfoReport {
    map: String,
    degree: usize,
    critical_points: Vec<CriticalRow>,
    riemann_hurwitz_sum: usize,
    riemann_hurwitz_expected: usize,
    riemann_hurwitz_pass: bool,
    critical_in_julia: usize,
    entropy: f64,
}

fn info(spec: &str, seed: u64) -> CliResult {
    let map = resolve_map(spec)?;
    let crit = map.critical_points()?;
    let in_j = if map.degree() >= 2 {
        critical_points_in_julia(&map, &cloud_for(&map, seed, 20_000)?, DEFAULT_CRITICAL_TOL)?
    } else {
        Vec::new()
    };
    let sum: usize = crit.iter().map(|c| c.branch_index - 1).sum();
    let expected = 2 * map.degree() - 2;
    let report = InfoReport {
        map: map.to_string(),
        degree: map.degree(),
        critical_points: crit
            .iter()
            .map(|c| CriticalRow {
                point: c.point,
                branch_index: c.branch_index,
                critical_value: c.critical_value,
                in_julia: in_j.iter().any(|d| d.point == c.point),
            })
            .collect(),
        riemann_hurwitz_sum: sum,
        riemann_hurwitz_expected: expected,
        riemann_hurwitz_pass: sum == expected,
        critical_in_julia: in_j.len(),
        entropy: (map.degree() as f64).ln(),
    };
    emit(None, &report_json("info", &report)?)
}

fn preimage(spec: &str, point: &str, depth: u32, format: Format) -> CliResult {
    let map = resolve_map(spec)?;
    let y = parse_point(point)?;
    let fiber = map.preimage_tree(&y, depth)?;
    match format {
        Format::Text => {
            let mut s = String::new();
            for e in &fiber.entries {
                s.push_str(&format!("{}, index {}\n", e.point, e.index));
            }
            emit(None, &s)
        }
        Format::Csv => {
            let mut s = String::from("re,im,is_infinity,index\n");
            for e in &fiber.entries {
                let (re, im, inf) = match e.point {
                    SpherePoint::Finite(z) => (ratdyn::io::fmt17(z.re), ratdyn::io::fmt17(z.im), 0),
                    SpherePoint::Infinity => ("0".into(), "0".into(), 1),
                };
                s.push_str(&format!("{re},{im},{inf},{}\n", e.index));
            }
            emit(None, &s)
        }
        Format::Json => emit(None, &report_json("fiber", &fiber)?),
    }
}

fn parse_window(s: &str) -> CliResult<Window> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| Failure::Invalid(format!("bad window '{s}'")))?;
    match v[..] {
        [x_min, x_max, y_min, y_max] if x_min < x_max && y_min < y_max => Ok(Window {
            x_min,
            x_max,
            y_min,
            y_max,
        }),
        _ => Err(Failure::Invalid(format!(
            "window must be x_min,x_max,y_min,y_max with min < max, got '{s}'"
        ))),
    }
}

fn parse_res(s: &str) -> CliResult<(usize, usize)> {
    let bad = || Failure::Invalid(format!("resolution must look like 512x512, got '{s}'"));
    let (w, h) = s.split_once('x').ok_or_else(bad)?;
    let w: usize = w.trim().parse().map_err(|_| bad())?;
    let h: usize = h.trim().parse().map_err(|_| bad())?;
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

#[allow(clippy::too_many_arguments)]
fn julia(
    spec: &str,
    method: JuliaMethod,
    samples: usize,
    depth: u32,
    seed: u64,
    out: Option<PathBuf>,
    render_to: Option<PathBuf>,
    window: &str,
    res: &str,
    mode: Mode,
    max_iter: u32,
) -> CliResult {
    let map = resolve_map(spec)?;
    if out.is_none() && render_to.is_none() {
        return Err(Failure::Invalid("give --out and/or --render".into()));
    }
    if let Some(path) = render_to {
        let window = parse_window(window)?;
        let (w, h) = parse_res(res)?;
        let opts = RenderOptions {
            mode: match mode {
                Mode::Auto => RenderMode::Auto,
                Mode::Escape => RenderMode::Escape,
                Mode::Density => RenderMode::Density,
            },
            max_iter,
            seed,
            samples: None,
        };
        let img = render(&map, &window, w, h, &opts)?;
        let mut f = create(&path)?;
        write_pgm(&mut f, &img)?;
        f.flush()?;
    }
    if let Some(path) = out {
        let cloud = match method {
            JuliaMethod::Inverse => cloud_for(&map, seed, samples)?,
            JuliaMethod::Tree => sample_tree(&map, &default_start(&map)?, depth)?,
        };
        let mut f = create(&path)?;
        write_julia_csv(&mut f, &cloud)?;
        f.flush()?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MeasureReport<'a> {
    map: String,
    provenance: &'a ratdyn::measure::Provenance,
    atoms: usize,
    total_weight: f64,
    integrals: Vec<(String, [f64; 2])>,
}

fn measure(
    spec: &str,
    method: MeasureMethod,
    depth: u32,
    base: Option<&str>,
    samples: usize,
    seed: u64,
    out: Option<PathBuf>,
) -> CliResult {
    let map = resolve_map(spec)?;
    let y = match base {
        Some(b) => parse_point(b)?,
        None => default_start(&map)?,
    };
    let cloud: WeightedCloud = match method {
        MeasureMethod::Exact => lyubich_exact(&map, &y, depth)?,
        MeasureMethod::Mc => lyubich_mc(&map, &y, depth, samples, seed)?,
    };
    if let Some(path) = &out {
        let mut f = create(path)?;
        write_cloud_csv(&mut f, &cloud)?;
        f.flush()?;
    }
    let integrals = ratdyn::TestFunction::monomial_family(2)
        .into_iter()
        .map(|t| Ok((t.name(), cloud.integrate(&t)?)))
        .collect::<Result<Vec<_>, Error>>()?
        .into_iter()
        .map(|(n, v)| (n, [v.re, v.im]))
        .collect();
    let report = MeasureReport {
        map: map.to_string(),
        provenance: &cloud.provenance,
        atoms: cloud.len(),
        total_weight: cloud.total_weight(),
        integrals,
    };
    emit(None, &report_json("measure", &report)?)
}

#[derive(Serialize)]
struct KmsCliReport {
    map: String,
    test: String,
    beta: f64,
    probes: usize,
    levels: u32,
    final_sup_variation: f64,
    limit: [f64; 2],
    lyubich_integral: [f64; 2],
    limit_gap: f64,
    /// Set when J contains critical points: the convergence statement is
    /// only proved without them.
    outside_theorem_hypothesis: bool,
}

fn kms(spec: &str, test: &str, levels: u32, probes: usize, stop_below: Option<f64>, seed: u64, out: Option<PathBuf>) -> CliResult {
    let map = resolve_map(spec)?;
    if probes == 0 {
        return Err(Failure::Invalid("--probes must be positive".into()));
    }
    let a = parse_test_function(test)?;
    let cloud = cloud_for(&map, seed, 20_000)?;
    let outside = !critical_points_in_julia(&map, &cloud, DEFAULT_CRITICAL_TOL)?.is_empty();
    let pts = cloud.strided(probes);
    let traces = kms_iterate_many(&map, &[&a as &dyn Observable], levels, &pts, stop_below, &KMS_BUDGET)?
        .pop()
        .unwrap();
    if let Some(path) = &out {
        let mut f = create(path)?;
        write_trace_csv(&mut f, &traces)?;
        f.flush()?;
    }
    let depth = ((15.0 * 2f64.ln()) / (map.degree() as f64).ln()).floor() as u32;
    let reference = lyubich_exact(&map, &pts[0], depth.min(14))?.integrate(&a)?;
    let last = traces.last().unwrap();
    let limit = last.mean();
    let report = KmsCliReport {
        map: map.to_string(),
        test: a.name(),
        beta: (map.degree() as f64).ln(),
        probes: pts.len(),
        levels: last.level,
        final_sup_variation: last.sup_variation,
        limit: [limit.re, limit.im],
        lyubich_integral: [reference.re, reference.im],
        limit_gap: (limit - reference).norm(),
        outside_theorem_hypothesis: outside,
    };
    emit(None, &report_json("kms", &report)?)
}

#[derive(Serialize)]
struct WitnessCliReport<T: Serialize> {
    map: String,
    a: String,
    report: T,
    reverify_worst: f64,
}

fn witness(spec: &str, a: &str, eps: f64, normalized: bool, probes: usize, seed: u64, out: Option<PathBuf>) -> CliResult {
    let map = resolve_map(spec)?;
    let a = parse_test_function(a)?;
    if eps.is_nan() || eps <= 0.0 {
        return Err(Failure::Invalid("--eps must be positive".into()));
    }
    let cloud = cloud_for(&map, seed, 20_000)?;
    let opts = WitnessOptions {
        probes,
        ..WitnessOptions::default()
    };
    let (json, pass) = if normalized {
        let w = normalized_witness(&map, &a, eps, &cloud, &opts)?;
        let worst = reverify_normalized(&map, &a, &w)?;
        let pass = w.report.pass && worst <= 0.0;
        let r = WitnessCliReport {
            map: map.to_string(),
            a: a.name(),
            report: w.report,
            reverify_worst: worst,
        };
        (report_json("normalized_witness", &r)?, pass)
    } else {
        let w = simplicity_witness(&map, &a, eps, &cloud, &opts)?;
        let worst = reverify_witness(&map, &a, &w)?;
        let pass = w.report.pass && worst <= 0.0;
        let r = WitnessCliReport {
            map: map.to_string(),
            a: a.name(),
            report: w.report,
            reverify_worst: worst,
        };
        (report_json("witness", &r)?, pass)
    };
    emit(out.as_deref(), &json)?;
    if pass {
        Ok(())
    } else {
        Err(Failure::Check("witness bounds not met".into()))
    }
}

fn verify(example: Option<&str>, all: bool, seed: u64, out: Option<PathBuf>) -> CliResult {
    let opts = VerifyOptions {
        seed,
        ..VerifyOptions::default()
    };
    let reports = if all {
        registry::verify_all(&opts)?
    } else {
        vec![registry::verify(example.expect("clap enforces an example"), &opts)?]
    };
    for r in &reports {
        let failed: Vec<&str> = r.checks.iter().filter(|c| !c.pass).map(|c| c.name.as_str()).collect();
        if failed.is_empty() {
            eprintln!("{}: pass ({} checks)", r.example, r.checks.len());
        } else {
            eprintln!("{}: FAIL ({})", r.example, failed.join(", "));
        }
    }
    emit(out.as_deref(), &report_json("verify", &reports)?)?;
    if reports.iter().all(|r| r.pass) {
        Ok(())
    } else {
        Err(Failure::Check("some checks failed".into()))
    }
}

fn list() -> CliResult {
    let records: Vec<_> = registry::list().into_iter().map(registry::get).collect::<Result<_, _>>()?;
    emit(None, &report_json("catalog", &records)?)
}
