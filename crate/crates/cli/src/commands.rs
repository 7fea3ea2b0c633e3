//! The subcommands.

use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use errmoments::planner::{plan_grid, ScanRule, TABLE_TAUS_CONDITIONAL, TABLE_TAUS_UNCONDITIONAL};
use errmoments::{
    asymptotic_limits, conditional_coefficients, conditional_moment_matrix, mc, reduce_conditional,
    reduce_unconditional, unconditional_coefficients, unconditional_moment_matrix, Error, McConfig, McEstimates, Mode,
    ModelDocument, MomentMatrix, ReducedConditional, ReducedUnconditional,
};
use rayon::prelude::*;

use crate::report::{fmt6, OutDir};
use crate::{CliError, Command, FailureKind, Invocation, McArgs, ModeArg, PlanArgs, RuleArg, RunReport, SurfaceArgs};

/// Fraction of redrawn samples above which a Monte Carlo run is flagged.
const REDRAW_WARNING: f64 = 1e-3;

/// |z| above which a validation row is flagged.
const Z_FLAG: f64 = 3.0;

pub fn dispatch(inv: &Invocation, out: &Path) -> Result<RunReport, CliError> {
    let start = Instant::now();
    let mut dir = OutDir::create(out)?;
    let mut run = Run::default();
    match &inv.command {
        Command::Moments => moments(inv, &mut dir, &mut run)?,
        Command::Validate(args) => validate(inv, args, &mut dir, &mut run)?,
        Command::Mc(args) => monte_carlo(inv, args, &mut dir, &mut run)?,
        Command::Surface(args) => surface(args, &mut dir, &mut run)?,
        Command::Plan(args) => plan(args, &mut dir, &mut run)?,
        Command::Replay { .. } => return Err(CliError::validation("a manifest cannot replay another replay")),
    }
    if !run.summary.is_empty() {
        dir.write_text("summary.txt", &run.summary)?;
    }
    let manifest = dir.finish(inv, start.elapsed().as_secs_f64())?;
    let (deferred_kind, deferred) = match run.deferred {
        Some(e) => (Some(e.kind), Some(e.message)),
        None => (None, None),
    };
    Ok(RunReport { manifest, summary: run.summary, deferred, deferred_kind })
}

/// Output accumulated by a subcommand, with the first failure that did not stop it.
#[derive(Default)]
struct Run {
    summary: String,
    deferred: Option<CliError>,
}

impl Run {
    fn line(&mut self, text: impl AsRef<str>) {
        self.summary.push_str(text.as_ref());
        self.summary.push('\n');
    }

    fn defer(&mut self, e: CliError) {
        self.line(format!("error: {e}"));
        if self.deferred.is_none() {
            self.deferred = Some(e);
        }
    }
}

fn config_document(inv: &Invocation) -> Result<(ModelDocument, &str), CliError> {
    let text =
        inv.config_text.as_deref().ok_or_else(|| CliError::validation("this subcommand needs --config <path>"))?;
    let name = inv.config_path.as_ref().map(|p| p.display().to_string()).unwrap_or_else(|| "config".into());
    let doc = ModelDocument::from_json(text).map_err(|e| CliError::validation(format!("{name}: {e}")))?;
    Ok((doc, text))
}

fn full(x: f64) -> String {
    format!("{x}")
}

fn push_block(rows: &mut Vec<Vec<String>>, block: &str, entries: impl IntoIterator<Item = (String, f64)>) {
    for (entry, value) in entries {
        rows.push(vec![block.to_string(), entry, full(value)]);
    }
}

fn matrix_entries(mm: &MomentMatrix) -> Vec<(String, f64)> {
    mm.entries().into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn pairs<const N: usize>(name: &str, v: [f64; N]) -> Vec<(String, f64)> {
    v.iter().enumerate().map(|(i, &x)| (format!("{name}{i}"), x)).collect()
}

fn conditional_coefficient_entries(rc: &ReducedConditional) -> Vec<(String, f64)> {
    let cc = conditional_coefficients(rc);
    let mut v = pairs("g_est", cc.g_est);
    v.push(("d_plain".into(), cc.d_plain));
    v.extend(pairs("g_true", cc.g_true));
    v.extend(pairs("d_est", cc.d_est));
    v.extend(pairs("d_true", cc.d_true));
    v.extend(pairs("c_est", cc.c_est));
    v.push(("c_est01".into(), cc.c_est_01));
    v.extend(pairs("c_cross", cc.c_cross));
    v.push(("c_cross01".into(), cc.c_cross_01));
    v.push(("c_cross10".into(), cc.c_cross_10));
    v.extend(pairs("c_true", cc.c_true));
    v.push(("c_true01".into(), cc.c_true_01));
    v
}

fn unconditional_coefficient_entries(ru: &ReducedUnconditional) -> Vec<(String, f64)> {
    let uc = unconditional_coefficients(ru);
    let mut v = pairs("h", uc.h);
    v.extend(pairs("f", uc.f));
    v.extend(pairs("k_est", uc.k_est));
    v.push(("k_est01".into(), uc.k_est_01));
    v.extend(pairs("k_cross", uc.k_cross));
    v.push(("k_cross01".into(), uc.k_cross_01));
    v.push(("k_cross10".into(), uc.k_cross_10));
    v.extend(pairs("k_true", uc.k_true));
    v.push(("k_true01".into(), uc.k_true_01));
    v
}

fn summarize_matrix(run: &mut Run, label: &str, mm: &MomentMatrix) {
    let m = &mm.mixture;
    run.line(format!(
        "{label}: E[eps_hat] = {}  E[eps] = {}  bias = {}  dev_var = {}  rms = {}",
        fmt6(m.est_mean),
        fmt6(m.true_mean),
        fmt6(m.bias),
        fmt6(m.dev_var),
        fmt6(m.rms)
    ));
    if !mm.clamped.is_empty() {
        run.line(format!("  correlation clamped for: {}", mm.clamped.join(", ")));
    }
}

fn moments(inv: &Invocation, dir: &mut OutDir, run: &mut Run) -> Result<(), CliError> {
    let (doc, text) = config_document(inv)?;
    let profile = ModelDocument::asymptotic_from_json(text)?;
    let mut rows = Vec::new();
    run.line("errmoments moments");

    if let Some(rc) = doc.conditional()? {
        run.line(format!(
            "conditional model: p = {}  n0 = {}  n1 = {}  alpha0 = {}  c = {}  delta2 = {}",
            rc.p,
            rc.n0,
            rc.n1,
            fmt6(rc.alpha0()),
            fmt6(rc.c),
            fmt6(rc.delta2)
        ));
        push_block(&mut rows, "conditional_coefficients", conditional_coefficient_entries(&rc));
        match conditional_moment_matrix(&rc) {
            Ok(mm) => {
                push_block(&mut rows, "conditional", matrix_entries(&mm));
                summarize_matrix(run, "conditional", &mm);
            }
            Err(e) => run.defer(CliError::from(e)),
        }
    }
    if let Some(ru) = doc.unconditional()? {
        run.line(format!(
            "unconditional model: p = {}  n0 = {}  n1 = {}  nu0 = {}  nu1 = {}  alpha0 = {}  c = {}  Delta2 = {}",
            ru.p,
            ru.n0,
            ru.n1,
            fmt6(ru.nu0),
            fmt6(ru.nu1),
            fmt6(ru.alpha0()),
            fmt6(ru.c),
            fmt6(ru.prior_delta2)
        ));
        push_block(&mut rows, "unconditional_coefficients", unconditional_coefficient_entries(&ru));
        match unconditional_moment_matrix(&ru) {
            Ok(mm) => {
                push_block(&mut rows, "unconditional", matrix_entries(&mm));
                summarize_matrix(run, "unconditional", &mm);
            }
            Err(e) => run.defer(CliError::from(e)),
        }
    }
    if let Some(ap) = profile {
        match asymptotic_limits(&ap) {
            Ok(lim) => {
                let t = lim.terms;
                let mut terms = pairs("g_est", t.g_est);
                terms.extend(pairs("g_true", t.g_true));
                terms.push(("d".into(), t.d));
                if let (Some(h), Some(f)) = (t.h, t.f) {
                    terms.extend(pairs("h", h));
                    terms.push(("f".into(), f));
                }
                push_block(&mut rows, "asymptotic_terms", terms);
                push_block(&mut rows, "asymptotic_conditional", matrix_entries(&lim.conditional));
                summarize_matrix(run, "asymptotic conditional", &lim.conditional);
                if let Some(u) = &lim.unconditional {
                    push_block(&mut rows, "asymptotic_unconditional", matrix_entries(u));
                    summarize_matrix(run, "asymptotic unconditional", u);
                }
            }
            Err(e) => run.defer(CliError::from(e)),
        }
    }
    dir.write_csv("moments.csv", &["block", "entry", "value"], &rows)
}

fn mc_configs(inv: &Invocation, args: &McArgs) -> Result<Vec<McConfig>, CliError> {
    let (doc, _) = config_document(inv)?;
    let spec = doc
        .full_spec()
        .ok_or_else(|| CliError::validation("Monte Carlo needs the full vector form of the model"))?
        .clone();
    args.mode
        .modes()
        .into_iter()
        .map(|mode| {
            let (t1, t2) = match mode {
                Mode::Conditional => {
                    if args.mode == ModeArg::Conditional && args.t2.is_some_and(|t| t != 1) {
                        return Err(CliError::validation("--t2 applies to unconditional mode only"));
                    }
                    (args.t1.unwrap_or(10_000), 1)
                }
                Mode::Unconditional => (args.t1.unwrap_or(300), args.t2.unwrap_or(300)),
            };
            let cfg = McConfig { mode, t1, t2, seed: inv.seed, spec: spec.clone(), sampler: args.sampler.into() };
            cfg.validate()?;
            Ok(cfg)
        })
        .collect()
}

fn run_mc(cfg: &McConfig, run: &mut Run) -> Result<McEstimates, CliError> {
    let est = mc::run(cfg)?;
    if est.redraws as f64 > REDRAW_WARNING * est.pairs as f64 {
        let msg =
            format!("warning: {} mode redrew {} of {} samples with coincident means", cfg.mode, est.redraws, est.pairs);
        eprintln!("{msg}");
        run.line(msg);
    }
    Ok(est)
}

fn analytic(spec: &errmoments::FullModelSpec, mode: Mode) -> Result<MomentMatrix, Error> {
    match mode {
        Mode::Conditional => conditional_moment_matrix(&reduce_conditional(spec)?),
        Mode::Unconditional => unconditional_moment_matrix(&reduce_unconditional(spec)?),
    }
}

fn validate(inv: &Invocation, args: &McArgs, dir: &mut OutDir, run: &mut Run) -> Result<(), CliError> {
    let configs = mc_configs(inv, args)?;
    let mut rows = Vec::new();
    run.line(format!("errmoments validate (seed {})", inv.seed));
    for cfg in &configs {
        let est = run_mc(cfg, run)?;
        let mm = match analytic(&cfg.spec, cfg.mode) {
            Ok(mm) => mm,
            Err(e) => {
                run.defer(e.into());
                continue;
            }
        };
        let analytic_values = mm.class.values().into_iter().chain(mm.mixture.values());
        let mc_values = est.class.named().chain(est.mixture.named());
        let mut flagged = 0;
        let mut worst: f64 = 0.0;
        for (a, (entry, e)) in analytic_values.zip(mc_values) {
            let z = if e.stderr > 0.0 {
                (a - e.mean) / e.stderr
            } else if a == e.mean {
                0.0
            } else {
                f64::INFINITY.copysign(a - e.mean)
            };
            let flag = z.abs() > Z_FLAG;
            flagged += usize::from(flag);
            worst = worst.max(z.abs());
            rows.push(vec![
                cfg.mode.to_string(),
                entry.to_string(),
                full(a),
                full(e.mean),
                full(e.stderr),
                full(z),
                if flag { "|z|>3".into() } else { String::new() },
            ]);
        }
        run.line(format!(
            "{} (T1 = {}, T2 = {}): {flagged} of 22 entries with |z| > 3, max |z| = {}; rms analytic {} vs MC {} +/- {}",
            cfg.mode,
            cfg.t1,
            cfg.t2,
            fmt6(worst),
            fmt6(mm.mixture.rms),
            fmt6(est.mixture.rms.mean),
            fmt6(est.mixture.rms.stderr)
        ));
    }
    dir.write_csv("validation.csv", &["mode", "entry", "analytic", "mc_mean", "mc_stderr", "z", "flag"], &rows)
}

fn monte_carlo(inv: &Invocation, args: &McArgs, dir: &mut OutDir, run: &mut Run) -> Result<(), CliError> {
    let configs = mc_configs(inv, args)?;
    let mut runs = Vec::new();
    run.line(format!("errmoments mc (seed {})", inv.seed));
    for cfg in &configs {
        let est = run_mc(cfg, run)?;
        let m = &est.mixture;
        run.line(format!(
            "{} (T1 = {}, T2 = {}): E[eps_hat] = {} +/- {}  E[eps] = {} +/- {}  rms = {} +/- {}  ({} s)",
            cfg.mode,
            cfg.t1,
            cfg.t2,
            fmt6(m.est_mean.mean),
            fmt6(m.est_mean.stderr),
            fmt6(m.true_mean.mean),
            fmt6(m.true_mean.stderr),
            fmt6(m.rms.mean),
            fmt6(m.rms.stderr),
            fmt6(est.elapsed_secs)
        ));
        let mut value = serde_json::to_value(&est)?;
        // Timing lives in the manifest so that reruns produce identical bytes.
        if let Some(obj) = value.as_object_mut() {
            obj.remove("elapsed_secs");
        }
        runs.push(value);
    }
    dir.write_text("mc.json", &(serde_json::to_string_pretty(&runs)? + "\n"))
}

/// Parse `start:end[:step]` (inclusive) or a single value.
pub fn parse_range(text: &str, default_step: u32) -> Result<Vec<u32>, CliError> {
    let bad = || CliError::validation(format!("invalid range `{text}`; expected start:end[:step] or a single value"));
    let parts: Vec<u32> =
        text.split(':').map(|s| s.trim().parse::<u32>().map_err(|_| bad())).collect::<Result<_, _>>()?;
    let (start, end, step) = match parts[..] {
        [v] => (v, v, default_step),
        [a, b] => (a, b, default_step),
        [a, b, s] => (a, b, s),
        _ => return Err(bad()),
    };
    if step == 0 || end < start {
        return Err(bad());
    }
    Ok((start..=end).step_by(step as usize).collect())
}

fn surface(args: &SurfaceArgs, dir: &mut OutDir, run: &mut Run) -> Result<(), CliError> {
    let ps = parse_range(&args.p_range, 1)?;
    let ns = parse_range(&args.n_range, 2)?;
    if ps.contains(&0) {
        return Err(CliError::validation("dimensions must be positive"));
    }
    if let Some(n) = ns.iter().find(|&&n| n < 2 || n % 2 != 0) {
        return Err(CliError::validation(format!("sample size {n} must be even and at least 2")));
    }
    if !(args.beta > 0.0 && args.beta.is_finite()) {
        return Err(CliError::validation("--beta must be positive"));
    }
    let separation = match (args.mode, args.delta2, args.prior_delta2) {
        (Mode::Conditional, d, None) => d.unwrap_or(4.0),
        (Mode::Unconditional, None, d) => d.unwrap_or(4.0),
        (Mode::Conditional, _, Some(_)) => return Err(CliError::validation("--Delta2 applies to unconditional mode")),
        (Mode::Unconditional, Some(_), _) => return Err(CliError::validation("--delta2 applies to conditional mode")),
    };
    let cells: Vec<(u32, u32)> = ps.iter().flat_map(|&p| ns.iter().map(move |&n| (p, n))).collect();
    let (mode, beta) = (args.mode, args.beta);
    let values: Vec<Result<f64, Error>> = cells
        .par_iter()
        .map(|&(p, n)| {
            let half = n / 2;
            let mm = match mode {
                Mode::Conditional => {
                    conditional_moment_matrix(&ReducedConditional::centered(p, half, beta, separation, 0.0)?)
                }
                Mode::Unconditional => unconditional_moment_matrix(&ReducedUnconditional {
                    p,
                    n0: half,
                    n1: half,
                    nu0: beta * f64::from(half),
                    nu1: beta * f64::from(half),
                    c: 0.0,
                    prior_delta2: separation,
                }),
            }?;
            Ok(mm.mixture.rms)
        })
        .collect();
    let mut rows = Vec::with_capacity(cells.len());
    let mut failed = 0usize;
    let mut first_error = None;
    for (&(p, n), v) in cells.iter().zip(values) {
        let rms = match v {
            Ok(r) => r,
            Err(e @ (Error::Inconsistent(_) | Error::Numeric(_))) => {
                failed += 1;
                first_error.get_or_insert(format!("p = {p}, n = {n}: {e}"));
                f64::NAN
            }
            Err(e) => return Err(e.into()),
        };
        rows.push(vec![p.to_string(), n.to_string(), full(rms)]);
    }
    dir.write_csv("surface.csv", &["p", "n", "rms"], &rows)?;
    if let Some(msg) = first_error {
        let e = CliError::numeric(format!(
            "{failed} of {} cells have no consistent RMS (written as NaN); first: {msg}",
            cells.len()
        ));
        eprintln!("{e}");
        run.deferred = Some(e);
    }
    Ok(())
}

fn plan(args: &PlanArgs, dir: &mut OutDir, run: &mut Run) -> Result<(), CliError> {
    if args.p_list.is_empty() || args.tau_list.as_ref().is_some_and(Vec::is_empty) {
        return Err(CliError::validation("tau and p lists must be nonempty"));
    }
    let rule = match args.rule {
        RuleArg::Literal => ScanRule::Literal,
        RuleArg::Safe => ScanRule::Safe { horizon: args.horizon },
    };
    let rule_label = match rule {
        ScanRule::Literal => "literal".to_string(),
        ScanRule::Safe { horizon } => format!("safe, horizon {horizon}"),
    };
    let mut rows = Vec::new();
    let mut missing = 0usize;
    for mode in args.mode.modes() {
        let taus = args.tau_list.clone().unwrap_or_else(|| match mode {
            Mode::Conditional => TABLE_TAUS_CONDITIONAL.to_vec(),
            Mode::Unconditional => TABLE_TAUS_UNCONDITIONAL.to_vec(),
        });
        let cells = plan_grid(mode, args.beta, &taus, &args.p_list, args.n_max, rule)?;
        run.line(format!("minimum n, {mode}, beta = {}, {rule_label} rule", fmt6(args.beta)));
        let mut header = String::from("     tau \\ p");
        for p in &args.p_list {
            let _ = write!(header, " {p:>7}");
        }
        run.line(header);
        for (row, tau) in cells.chunks(args.p_list.len()).zip(&taus) {
            let mut line = format!("{:>12}", fmt6(*tau));
            for cell in row {
                let shown = match cell.n_min {
                    Some(n) => n.to_string(),
                    None => format!(">{}", cell.n_max),
                };
                let _ = write!(line, " {shown:>7}");
            }
            run.line(line);
        }
        for cell in cells {
            let (n_min, kappa) = match (cell.n_min, cell.kappa_at_n_min) {
                (Some(n), Some(k)) => (n.to_string(), full(k)),
                _ => {
                    missing += 1;
                    (format!(">{}", cell.n_max), String::new())
                }
            };
            rows.push(vec![full(cell.tau), cell.p.to_string(), n_min, kappa, mode.to_string(), full(cell.beta)]);
        }
    }
    dir.write_csv("plan.csv", &["tau", "p", "n_min", "kappa_at_n_min", "mode", "beta"], &rows)?;
    if missing > 0 {
        run.deferred = Some(CliError {
            kind: FailureKind::NotFound,
            message: format!("{missing} cells did not reach the target by n = {}", args.n_max),
        });
    }
    Ok(())
}
