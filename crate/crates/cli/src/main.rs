//! `twistlab` command-line front end.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde_json::{json, Value};

use twistlab::amplifier::{compute_decomposition, compute_s_direct, SDirectMethod};
use twistlab::characters::CharacterGroup;
use twistlab::config::{parse_theta, OutputFormat, RunConfig};
use twistlab::lfunc::{truncation, ExponentTable};
use twistlab::oracle::{s_quadruple_loop, QUADRUPLE_LIMIT};
use twistlab::scan::{fit_rows, read_csv, run_scan, write_csv};
use twistlab::spectral::{kappa, kappa_bound_probe, kappa_exact, z_q_direct, KappaParams, ShiftedConvolutionPoint};
use twistlab::verify::{run_suite, Suite};
use twistlab::Complex64;

#[derive(Parser, Debug)]
#[command(name = "twistlab", version, about = "Amplified second moments of twisted modular L-functions")]
struct Cli {
    #[command(flatten)]
    global: GlobalOpts,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct GlobalOpts {
    /// TOML run configuration; every field is optional.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Worker threads (0 = all cores); overrides run.threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Output format; overrides run.format.
    #[arg(long, global = true, value_enum)]
    format: Option<Format>,
    /// Output file; overrides run.out. Standard output when absent.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Ramanujan-Petersson exponent as "a/b" or a decimal; overrides run.theta.
    #[arg(long, global = true)]
    theta: Option<String>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Format {
    Json,
    Csv,
}

impl From<Format> for OutputFormat {
    fn from(f: Format) -> Self {
        match f {
            Format::Json => OutputFormat::Json,
            Format::Csv => OutputFormat::Csv,
        }
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a verification suite and emit a JSON report; exit 1 if any check fails.
    Verify {
        /// identities | appendix | decomposition | smoothing | all
        suite: String,
    },
    /// Evaluate the amplified moment and its four pieces for the [moment] section.
    Decompose,
    /// Evaluate smoothed L-values over the [scan] grid.
    Scan,
    /// Fit log|L| against log Q and log(1+|t|) from a scan CSV.
    Fit {
        csv: PathBuf,
    },
    /// Evaluate the Eisenstein constant kappa for the cusp 1/w.
    Kappa(KappaArgs),
    /// Evaluate the shifted convolution series Z_Q by direct summation.
    Zq(ZqArgs),
}

#[derive(Args, Debug)]
struct KappaArgs {
    /// Squarefree level N.
    #[arg(long, default_value_t = 1)]
    level: u64,
    /// Cusp denominator w, a divisor of N.
    #[arg(long, default_value_t = 1)]
    w: u64,
    /// Modulus Q, coprime to N.
    #[arg(long)]
    q: u64,
    /// s' as "a", "a/b" or "a+bi".
    #[arg(long, allow_hyphen_values = true)]
    s_prime: String,
    /// z as "a", "a/b" or "a+bi".
    #[arg(long, allow_hyphen_values = true)]
    z: String,
    /// Also report sup |kappa(1/2, -z)| Q^{1/2} over z = i k/4, k = 1..40.
    #[arg(long)]
    probe: bool,
}

#[derive(Args, Debug)]
struct ZqArgs {
    /// s with Re s > 2, as "a", "a/b" or "a+bi".
    #[arg(long, allow_hyphen_values = true)]
    s: String,
    /// w with Re w > 1, as "a", "a/b" or "a+bi".
    #[arg(long, allow_hyphen_values = true)]
    w: String,
    /// First amplifier prime.
    #[arg(long)]
    l1: u64,
    /// Second amplifier prime.
    #[arg(long)]
    l2: u64,
    /// Modulus Q.
    #[arg(long)]
    q: u64,
    /// Truncation in m2.
    #[arg(long, default_value_t = 1000)]
    m_max: u64,
    /// Truncation in h0.
    #[arg(long, default_value_t = 1000)]
    h_max: u64,
}

/// The parsed input of a complex argument; `exact` is set for real rationals.
struct ComplexArg {
    value: Complex64,
    exact: Option<Rational64>,
}

fn parse_real(text: &str) -> Result<(f64, Option<Rational64>)> {
    let t = text.trim();
    if let Some((a, b)) = t.split_once('/') {
        let a: i64 = a.trim().parse().with_context(|| format!("bad number `{t}`"))?;
        let b: i64 = b.trim().parse().with_context(|| format!("bad number `{t}`"))?;
        if b == 0 {
            bail!("zero denominator in `{t}`");
        }
        let r = Rational64::new(a, b);
        return Ok((a as f64 / b as f64, Some(r)));
    }
    let v: f64 = t.parse().with_context(|| format!("bad number `{t}`"))?;
    // Decimals with a short exact binary expansion, such as 0.5, are exact.
    let exact = (v * 1024.0).fract().eq(&0.0).then(|| Rational64::new((v * 1024.0) as i64, 1024));
    Ok((v, exact))
}

fn parse_complex(text: &str) -> Result<ComplexArg> {
    let t: String = text.chars().filter(|c| !c.is_whitespace()).collect();
    let Some(body) = t.strip_suffix('i') else {
        let (v, exact) = parse_real(&t)?;
        return Ok(ComplexArg {
            value: Complex64::new(v, 0.0),
            exact,
        });
    };
    // Split at the last sign that is not a leading sign or an exponent sign.
    let bytes = body.as_bytes();
    let split = (1..bytes.len())
        .rev()
        .find(|&i| (bytes[i] == b'+' || bytes[i] == b'-') && !matches!(bytes[i - 1], b'e' | b'E'));
    let (re, im) = match split {
        Some(i) => (parse_real(&body[..i])?.0, &body[i..]),
        None => (0.0, body),
    };
    let im = match im {
        "" | "+" => 1.0,
        "-" => -1.0,
        s => parse_real(s)?.0,
    };
    Ok(ComplexArg {
        value: Complex64::new(re, im),
        exact: None,
    })
}

fn complex_json(z: Complex64) -> Value {
    json!({ "re": z.re, "im": z.im })
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, text).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut so = std::io::stdout().lock();
            so.write_all(text.as_bytes())?;
            so.flush()?;
            Ok(())
        }
    }
}

/// Loads the configuration, applies command-line overrides and resolves it.
/// The output path is returned separately and left out of the configuration
/// so that reports do not depend on where they are written.
fn load_config(g: &GlobalOpts) -> Result<(RunConfig, Option<PathBuf>)> {
    let mut cfg = match &g.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(t) = g.threads {
        cfg.run.threads = t;
    }
    if let Some(f) = g.format {
        cfg.run.format = Some(f.into());
    }
    if let Some(theta) = &g.theta {
        parse_theta(theta)?;
        cfg.run.theta = theta.clone();
    }
    let out = g.out.clone().or_else(|| cfg.run.out.take().map(PathBuf::from));
    cfg.run.out = None;
    Ok((cfg.resolved()?, out))
}

fn json_text(v: &Value) -> String {
    serde_json::to_string_pretty(v).expect("json serializes") + "\n"
}

fn cmd_verify(cfg: &RunConfig, out: Option<&Path>, suite: &str) -> Result<ExitCode> {
    let suite: Suite = suite.parse()?;
    if cfg.run.format == Some(OutputFormat::Csv) {
        bail!("verification reports are JSON only");
    }
    let report = run_suite(suite, cfg)?;
    for c in &report.checks {
        eprintln!(
            "{} {:<32} measured={}",
            if c.passed { "PASS" } else { "FAIL" },
            c.id,
            c.measured.map_or("error".to_string(), |m| format!("{m:.3e}"))
        );
    }
    eprintln!(
        "{} of {} checks passed",
        report.summary.passed, report.summary.total
    );
    emit(out, &report.to_json())?;
    Ok(if report.passed { ExitCode::SUCCESS } else { ExitCode::from(1) })
}

fn cmd_decompose(cfg: &RunConfig, out: Option<&Path>) -> Result<ExitCode> {
    let f = cfg.load_form()?;
    let p = cfg.moment.params(f.level(), cfg.theta()?)?;
    let chi = Arc::new(CharacterGroup::new(cfg.moment.q)?).character(cfg.moment.chi_index)?;
    let d = compute_decomposition(&p, &f, &chi)?;
    let method: SDirectMethod = cfg.moment.method.into();
    let s_direct = if method == SDirectMethod::Recurrence {
        d.s_direct
    } else {
        compute_s_direct(&p, &f, &chi, method)?.value
    };
    let m = truncation(p.x);
    let n = p.primes.len() as u64;
    let oracle = if cfg.moment.oracle && m.saturating_mul(m).saturating_mul(n * n) <= QUADRUPLE_LIMIT {
        Some(s_quadruple_loop(&p, &f, &chi)?)
    } else {
        None
    };
    let fingerprint = cfg.fingerprint()?;
    match cfg.run.format.unwrap_or(OutputFormat::Json) {
        OutputFormat::Json => {
            let v = json!({
                "config_fingerprint": fingerprint,
                "params": {
                    "q": p.q, "t": p.t, "r_offset": p.r_offset, "level": p.level,
                    "theta": format!("{}/{}", p.theta.numer(), p.theta.denom()),
                    "g": p.g, "l": p.l, "primes": p.primes, "x": p.x,
                    "alpha": p.alpha, "big_a": p.big_a, "warning": p.warning,
                },
                "chi_index": chi.index(),
                "s_direct": s_direct,
                "s_d1": complex_json(d.s_d1),
                "s_d2": complex_json(d.s_d2),
                "s_o1": complex_json(d.s_o1),
                "s_o2": complex_json(d.s_o2),
                "total": complex_json(d.total()),
                "relative_mismatch": d.relative_mismatch(),
                "conjugacy_error": d.conjugacy_error(),
                "quadruple_oracle": oracle,
                "m_max": d.m_max,
                "h_max": d.h_max,
                "off_diagonal_terms": d.off_diagonal_terms,
                "dropped_tail_bound": d.dropped_tail_bound,
                "config": cfg.echo(),
            });
            emit(out, &json_text(&v))?;
        }
        OutputFormat::Csv => {
            let mut text = format!("# twistlab decompose config={fingerprint}\n");
            for line in cfg.echo().lines() {
                text.push_str(&format!("# {line}\n"));
            }
            text.push_str(
                "Q,chi_index,t,x,G,primes,s_direct,re_S_d1,re_S_d2,im_S_d2,re_S_o1,im_S_o1,re_S_o2,im_S_o2,relative_mismatch,conjugacy_error,quadruple_oracle\n",
            );
            let primes: Vec<String> = p.primes.iter().map(|l| l.to_string()).collect();
            text.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                p.q,
                chi.index(),
                p.t,
                p.x,
                p.g,
                primes.join(";"),
                s_direct,
                d.s_d1.re,
                d.s_d2.re,
                d.s_d2.im,
                d.s_o1.re,
                d.s_o1.im,
                d.s_o2.re,
                d.s_o2.im,
                d.relative_mismatch(),
                d.conjugacy_error(),
                oracle.map_or(String::new(), |o| o.to_string())
            ));
            emit(out, &text)?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_scan(cfg: &RunConfig, out: Option<&Path>) -> Result<ExitCode> {
    let f = cfg.load_form()?;
    let rows = run_scan(&cfg.scan, &f)?;
    let fingerprint = cfg.fingerprint()?;
    match cfg.run.format.unwrap_or(OutputFormat::Csv) {
        OutputFormat::Csv => {
            let mut buf = Vec::new();
            write_csv(&rows, &fingerprint, &cfg.echo(), &mut buf)?;
            emit(out, &String::from_utf8(buf)?)?;
        }
        OutputFormat::Json => {
            let v = json!({
                "config_fingerprint": fingerprint,
                "rows": rows,
                "config": cfg.echo(),
            });
            emit(out, &json_text(&v))?;
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_fit(cfg: &RunConfig, out: Option<&Path>, csv: &Path) -> Result<ExitCode> {
    let file = std::fs::File::open(csv).with_context(|| format!("opening {}", csv.display()))?;
    let rows = read_csv(file).with_context(|| format!("reading {}", csv.display()))?;
    let report = fit_rows(&rows, &ExponentTable::new(cfg.theta()?))?;
    match cfg.run.format {
        None => emit(out, &report.to_text())?,
        Some(OutputFormat::Json) => {
            let v = json!({ "fit": report, "config": cfg.echo() });
            emit(out, &json_text(&v))?;
        }
        Some(OutputFormat::Csv) => bail!("fit reports are text or JSON"),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_kappa(cfg: &RunConfig, out: Option<&Path>, a: &KappaArgs) -> Result<ExitCode> {
    if cfg.run.format == Some(OutputFormat::Csv) {
        bail!("kappa output is JSON only");
    }
    let s = parse_complex(&a.s_prime)?;
    let z = parse_complex(&a.z)?;
    let value = kappa(&KappaParams {
        level: a.level,
        w: a.w,
        q: a.q,
        s_prime: s.value,
        z: z.value,
    })?;
    let exact = match (s.exact, z.exact) {
        (Some(se), Some(ze)) => kappa_exact(a.level, a.w, a.q, se, ze).ok().map(|r| r.to_string()),
        _ => None,
    };
    let probe = if a.probe {
        let grid: Vec<f64> = (1..=40).map(|k| k as f64 * 0.25).collect();
        Some(kappa_bound_probe(a.level, a.w, a.q, &grid)?.scaled_sup)
    } else {
        None
    };
    let v = json!({
        "level": a.level, "w": a.w, "q": a.q,
        "s_prime": complex_json(s.value), "z": complex_json(z.value),
        "value": complex_json(value),
        "exact": exact,
        "probe_scaled_sup": probe,
    });
    emit(out, &json_text(&v))?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_zq(cfg: &RunConfig, out: Option<&Path>, a: &ZqArgs) -> Result<ExitCode> {
    if cfg.run.format == Some(OutputFormat::Csv) {
        bail!("zq output is JSON only");
    }
    let f = cfg.load_form()?;
    let pt = ShiftedConvolutionPoint {
        s: parse_complex(&a.s)?.value,
        w: parse_complex(&a.w)?.value,
        l1: a.l1,
        l2: a.l2,
        q: a.q,
        m_max: a.m_max,
        h_max: a.h_max,
    };
    let z = z_q_direct(&pt, &f)?;
    let v = json!({
        "form": f.name(),
        "s": complex_json(pt.s), "w": complex_json(pt.w),
        "l1": pt.l1, "l2": pt.l2, "q": pt.q, "m_max": pt.m_max, "h_max": pt.h_max,
        "value": complex_json(z.value),
        "tail_bound": z.tail_bound,
        "terms": z.terms,
        "note": z.note,
    });
    emit(out, &json_text(&v))?;
    Ok(ExitCode::SUCCESS)
}

fn run(cli: Cli) -> Result<ExitCode> {
    let (cfg, out) = load_config(&cli.global)?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.run.threads)
        .build_global()
        .context("configuring the worker pool")?;
    let out = out.as_deref();
    match &cli.command {
        Command::Verify { suite } => cmd_verify(&cfg, out, suite),
        Command::Decompose => cmd_decompose(&cfg, out),
        Command::Scan => cmd_scan(&cfg, out),
        Command::Fit { csv } => cmd_fit(&cfg, out, csv),
        Command::Kappa(a) => cmd_kappa(&cfg, out, a),
        Command::Zq(a) => cmd_zq(&cfg, out, a),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn complex_arguments() {
        let a = parse_complex("1/2").unwrap();
        assert_eq!(a.value, Complex64::new(0.5, 0.0));
        assert_eq!(a.exact, Some(Rational64::new(1, 2)));
        assert_eq!(parse_complex("-0.5").unwrap().exact, Some(Rational64::new(-1, 2)));
        assert_eq!(parse_complex("0.1").unwrap().exact, None);
        assert_eq!(parse_complex("0.5+1.25i").unwrap().value, Complex64::new(0.5, 1.25));
        assert_eq!(parse_complex("3 - 2i").unwrap().value, Complex64::new(3.0, -2.0));
        assert_eq!(parse_complex("-i").unwrap().value, Complex64::new(0.0, -1.0));
        assert_eq!(parse_complex("1e-3+2i").unwrap().value, Complex64::new(1e-3, 2.0));
        assert_eq!(parse_complex("2.5i").unwrap().value, Complex64::new(0.0, 2.5));
        assert!(parse_complex("abc").is_err());
        assert!(parse_complex("1/0").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
