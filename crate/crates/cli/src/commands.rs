use std::fs::File;
use std::io::BufWriter;

use expfun::mc::{self, InfiniteTarget, McEstimate};
use expfun::moments::{
    self, BetaBound, Extended, FinitenessReport, LadderEntry, Method, MomentLadder, OrderFiniteness,
    QuadratureOptions,
};
use expfun::process::{LaplaceExponent, PiiCharacteristics, Process};
use expfun::{Error, Result};
use serde_json::{json, Value};

use crate::report::{num, text, Table, Warning};
use crate::{validate, Command, McArgs, McCommand, MethodArg, SignArg};

pub struct Output {
    pub table: Table,
    pub warnings: Vec<Warning>,
    pub details: Option<Value>,
}

impl Output {
    fn new(table: Table) -> Self {
        Output {
            table,
            warnings: Vec::new(),
            details: None,
        }
    }

    fn notes<'a>(&mut self, notes: impl IntoIterator<Item = &'a String>) {
        self.warnings.extend(notes.into_iter().map(|n| Warning::from_note(n)));
    }
}

fn invalid(msg: String) -> Error {
    Error::InvalidParameter(msg)
}

fn check_time(name: &str, t: f64) -> Result<()> {
    if t.is_finite() && t >= 0.0 {
        Ok(())
    } else {
        Err(invalid(format!("--{name} must be finite and >= 0, got {t}")))
    }
}

fn check_order(n: u32) -> Result<()> {
    if n == 0 {
        Err(invalid("--n must be >= 1".into()))
    } else {
        Ok(())
    }
}

fn check_mc(args: &McArgs) -> Result<()> {
    if args.paths < 2 {
        return Err(invalid(format!("--paths must be >= 2, got {}", args.paths)));
    }
    if !(args.dt > 0.0 && args.dt.is_finite()) {
        return Err(invalid(format!("--dt must be > 0, got {}", args.dt)));
    }
    if !(args.cutoff > 0.0 && args.cutoff.is_finite()) {
        return Err(invalid(format!("--cutoff must be > 0, got {}", args.cutoff)));
    }
    Ok(())
}

/// Numeric flags of every command, checked before any computation.
fn check_flags(cmd: &Command) -> Result<()> {
    match cmd {
        Command::Moments { t, n, .. } => {
            check_time("t", *t)?;
            check_order(*n)
        }
        Command::InfMoments { n, .. } | Command::Finiteness { n, .. } | Command::NegRatio { n, .. } => check_order(*n),
        Command::Laplace { beta, tol, .. } => {
            if let Some(b) = beta.iter().find(|b| !(b.is_finite() && **b >= 0.0)) {
                return Err(invalid(format!("--beta values must be finite and >= 0, got {b}")));
            }
            if !(*tol > 0.0 && tol.is_finite()) {
                return Err(invalid(format!("--tol must be > 0, got {tol}")));
            }
            Ok(())
        }
        Command::LaplaceCarson { q, n, .. } => {
            check_order(*n)?;
            match q.iter().find(|q| !(q.is_finite() && **q > 0.0)) {
                Some(v) => Err(invalid(format!("--q values must be finite and > 0, got {v}"))),
                None => Ok(()),
            }
        }
        Command::Validate { t, n, mc, .. } => {
            check_time("t", *t)?;
            check_order(*n)?;
            check_mc(mc)
        }
        Command::Mc { command } => match command {
            McCommand::Moment { t, alpha, mc, .. } => {
                check_time("t", *t)?;
                if let Some(a) = alpha.iter().find(|a| !a.is_finite()) {
                    return Err(invalid(format!("--alpha values must be finite, got {a}")));
                }
                check_mc(mc)
            }
            McCommand::Inf {
                alpha,
                beta_laplace,
                horizon,
                mc,
                ..
            } => {
                if alpha.is_none() && beta_laplace.is_none() {
                    return Err(invalid("one of --alpha or --beta-laplace is required".into()));
                }
                if let Some(a) = alpha.filter(|a| !a.is_finite()) {
                    return Err(invalid(format!("--alpha must be finite, got {a}")));
                }
                if let Some(b) = beta_laplace.filter(|b| !(b.is_finite() && *b >= 0.0)) {
                    return Err(invalid(format!("--beta-laplace must be >= 0, got {b}")));
                }
                if !(*horizon > 0.0 && horizon.is_finite()) {
                    return Err(invalid(format!("--horizon must be > 0, got {horizon}")));
                }
                check_mc(mc)
            }
            McCommand::Reversed { t, n, mc, .. } => {
                check_time("t", *t)?;
                if !n.is_finite() {
                    return Err(invalid(format!("--n must be finite, got {n}")));
                }
                check_mc(mc)
            }
            McCommand::Validate { t, n, mc, .. } => {
                check_time("t", *t)?;
                check_order(*n)?;
                check_mc(mc)
            }
        },
    }
}

pub fn run(cmd: &Command, process: &Process, seed: u64) -> Result<Output> {
    check_flags(cmd)?;
    match cmd {
        Command::Moments { t, n, method, .. } => run_moments(process, *t, *n, *method),
        Command::InfMoments { n, .. } => run_inf_moments(process, *n),
        Command::Finiteness { n, sign, .. } => run_finiteness(process, *n, *sign),
        Command::Laplace {
            beta, tol, max_terms, ..
        } => run_laplace(process, beta, *tol, *max_terms),
        Command::LaplaceCarson { q, n, .. } => run_laplace_carson(process, q, *n),
        Command::NegRatio { n, .. } => run_neg_ratio(process, *n),
        Command::Validate { t, n, mc, .. } => validate::full(process, *t, *n, &mc.config(seed, *t)),
        Command::Mc { command } => match command {
            McCommand::Moment { t, alpha, dump, mc, .. } => {
                let cfg = mc.config(seed, *t);
                let ests = mc::estimate_functional_moments(process, *t, alpha, &cfg)?;
                if let Some(path) = dump {
                    let file = File::create(path)
                        .map_err(|e| invalid(format!("cannot create {}: {e}", path.display())))?;
                    mc::write_path_dump(process, *t, &cfg, &mut BufWriter::new(file))?;
                }
                let mut out = Output::new(mc_table());
                for (a, e) in alpha.iter().zip(&ests) {
                    mc_row(&mut out, &format!("E(I_t^{a})"), *t, e);
                }
                out.details = Some(json!({ "config": cfg }));
                Ok(out)
            }
            McCommand::Inf {
                alpha,
                beta_laplace,
                horizon,
                allow_nonpositive,
                mc,
                ..
            } => {
                let cfg = mc.config(seed, *horizon);
                let (target, label) = match (alpha, beta_laplace) {
                    (Some(a), _) => (InfiniteTarget::Moment(*a), format!("E(I_inf^{a})")),
                    (None, Some(b)) => (InfiniteTarget::Laplace(*b), format!("E exp(-{b} I_inf)")),
                    (None, None) => unreachable!("checked"),
                };
                let e = mc::estimate_infinite(process, target, &cfg, *allow_nonpositive)?;
                let mut out = Output::new(mc_table());
                mc_row(&mut out, &label, *horizon, &e);
                if let Some(note) = &e.tail_bound_note {
                    out.warnings.push(Warning::new("TAIL_BOUND", note.clone()));
                }
                out.details = Some(json!({ "tail_bound": e.tail_bound, "config": cfg }));
                Ok(out)
            }
            McCommand::Reversed { t, n, mc, .. } => {
                let cfg = mc.config(seed, *t);
                let e = mc::estimate_reversed(process, *t, *n, &cfg)?;
                let mut out = Output::new(mc_table());
                mc_row(&mut out, &format!("E(I_t^{n}) reversed"), *t, &e);
                out.details = Some(json!({ "config": cfg }));
                Ok(out)
            }
            McCommand::Validate { t, n, mc, .. } => validate::monte_carlo(process, *t, *n, &mc.config(seed, *t)),
        },
    }
}

pub fn mc_table() -> Table {
    Table::new(&["quantity", "t", "mean", "std_error", "n_paths", "flagged_paths", "integrator"])
}

pub fn mc_row(out: &mut Output, label: &str, t: f64, e: &McEstimate) {
    out.table.push(vec![
        text(label),
        num(t),
        num(e.mean),
        num(e.std_error),
        Value::from(e.n_paths),
        Value::from(e.flagged_paths),
        text(e.integrator.as_str()),
    ]);
    out.notes(&e.notes);
}

pub fn levy<'a>(process: &'a Process, what: &str) -> Result<&'a dyn LaplaceExponent> {
    process.levy().ok_or_else(|| {
        Error::Precondition(format!(
            "{what} needs a homogeneous (Levy) process, got {}",
            process.kind_name()
        ))
    })
}

pub fn pii<'a>(process: &'a Process, what: &str) -> Result<&'a PiiCharacteristics> {
    process.pii().ok_or_else(|| {
        Error::Precondition(format!(
            "{what} needs a process given by its characteristics, got {}",
            process.kind_name()
        ))
    })
}

/// Closed form per order, using the confluent-safe evaluation where the plain
/// sum is ill-conditioned.
pub fn closed_ladder(phi: &dyn LaplaceExponent, t: f64, n: u32) -> Result<MomentLadder> {
    match moments::levy_moment_closed_form_ladder(phi, t, n) {
        Err(Error::NearConfluent { .. }) => {}
        other => return other,
    }
    let mut ladder = MomentLadder {
        horizon: moments::Horizon::Finite(t),
        entries: Vec::new(),
        flagged: false,
        notes: Vec::new(),
    };
    for k in 1..=n {
        let (value, err) = match moments::levy_moment_closed_form(phi, t, k) {
            Ok(v) => (v, 0.0),
            Err(Error::NearConfluent { .. }) => {
                ladder.notes.push(format!(
                    "CLOSED_FORM_CONFLUENT: order {k} evaluated through the matrix form of the divided difference"
                ));
                moments::levy_moment_closed_form_extended(phi, t, k)?
            }
            Err(e) => return Err(e),
        };
        ladder.entries.push(LadderEntry {
            order: k as i32,
            value,
            method: Method::ClosedForm,
            error_estimate: err,
        });
    }
    Ok(ladder)
}

pub fn ladder(process: &Process, t: f64, n: u32, method: MethodArg) -> Result<MomentLadder> {
    match method {
        MethodArg::Auto => match process.levy() {
            Some(phi) => moments::moments_auto(phi, t, n),
            None => moments::pii_moment_quadrature(pii(process, "quadrature")?, t, n, QuadratureOptions::default()),
        },
        MethodArg::Closed => closed_ladder(levy(process, "the closed form")?, t, n),
        MethodArg::Ode => moments::levy_moment_ode(levy(process, "the ODE recursion")?, t, n),
        MethodArg::Quadrature => {
            moments::pii_moment_quadrature(pii(process, "quadrature")?, t, n, QuadratureOptions::default())
        }
    }
}

fn run_moments(process: &Process, t: f64, n: u32, method: MethodArg) -> Result<Output> {
    let l = ladder(process, t, n, method)?;
    let mut out = Output::new(Table::new(&["t", "order", "value", "method", "error_estimate"]));
    for e in &l.entries {
        out.table.push(vec![
            num(t),
            Value::from(e.order),
            num(e.value),
            text(e.method.as_str()),
            num(e.error_estimate),
        ]);
    }
    if l.flagged {
        out.warnings.push(Warning::new("FLAGGED", "a refinement loop stopped before its tolerance"));
    }
    out.notes(&l.notes);
    Ok(out)
}

fn extended(v: Extended) -> Value {
    match v {
        Extended::Finite(x) => num(x),
        Extended::Infinite => text("inf"),
    }
}

fn run_inf_moments(process: &Process, n: u32) -> Result<Output> {
    let phi = levy(process, "infinite-horizon moments")?;
    let mut out = Output::new(Table::new(&["order", "value"]));
    for k in 1..=n {
        out.table.push(vec![Value::from(k), extended(moments::infinite_moment(phi, k)?)]);
    }
    Ok(out)
}

fn verdict_name(v: OrderFiniteness) -> &'static str {
    match v {
        OrderFiniteness::Finite => "finite",
        OrderFiniteness::Infinite => "infinite",
        OrderFiniteness::ConditionalOnNegOne => "finite_if_neg1_finite",
    }
}

fn run_finiteness(process: &Process, n: u32, sign: SignArg) -> Result<Output> {
    let phi = levy(process, "finiteness classification")?;
    let report = match sign {
        SignArg::Positive => moments::positive_finiteness(phi, n)?,
        SignArg::Negative => moments::negative_finiteness(phi, n)?,
        SignArg::Both => moments::positive_finiteness(phi, n)?.merge(moments::negative_finiteness(phi, n)?),
    };
    Ok(finiteness_output(&report))
}

fn finiteness_output(report: &FinitenessReport) -> Output {
    let mut out = Output::new(Table::new(&["quantity", "value"]));
    if let Some(a) = report.alpha0 {
        out.table.push(vec![text("alpha0"), extended(a)]);
    }
    if let Some(b) = report.beta {
        let v = match b {
            BetaBound::Finite(k) => Value::from(k),
            BetaBound::AtLeast(k) => text(format!(">={k}")),
        };
        out.table.push(vec![text("beta"), v]);
    }
    if let Some(all) = report.all_negative_finite {
        out.table.push(vec![text("all_negative_finite"), Value::from(all)]);
    }
    for o in &report.orders {
        out.table.push(vec![text(format!("order {}", o.order)), text(verdict_name(o.verdict))]);
    }
    out.notes(&report.assumptions);
    out.notes(&report.notes);
    out.details = Some(serde_json::to_value(report).expect("report serializes"));
    out
}

fn run_laplace(process: &Process, betas: &[f64], tol: f64, max_terms: usize) -> Result<Output> {
    let phi = levy(process, "the Laplace transform series")?;
    let mut out = Output::new(Table::new(&["beta", "value", "terms", "error_bound", "converged"]));
    for &b in betas {
        let s = moments::laplace_transform_series(phi, b, max_terms, tol)?;
        if !s.converged {
            out.warnings.push(Warning::new(
                "SERIES_NOT_CONVERGED",
                format!("beta = {b}: error bound {:e} after {} terms", s.error_bound, s.terms),
            ));
        }
        out.table.push(vec![
            num(b),
            num(s.value),
            Value::from(s.terms),
            num(s.error_bound),
            Value::from(s.converged),
        ]);
    }
    Ok(out)
}

fn run_laplace_carson(process: &Process, qs: &[f64], n: u32) -> Result<Output> {
    let phi = levy(process, "Laplace-Carson transforms")?;
    let mut out = Output::new(Table::new(&["q", "order", "value"]));
    for &q in qs {
        let l = moments::laplace_carson_ladder(phi, q, n)?;
        for (k, v) in l.iter().enumerate().skip(1) {
            out.table.push(vec![num(q), Value::from(k), num(*v)]);
        }
    }
    Ok(out)
}

fn run_neg_ratio(process: &Process, n: u32) -> Result<Output> {
    let phi = levy(process, "negative moment ratios")?;
    let mut out = Output::new(Table::new(&["order", "ratio"]));
    for k in 1..=n {
        out.table.push(vec![Value::from(-(k as i64)), num(moments::negative_moment_ratio(phi, k)?)]);
    }
    let fin = moments::negative_finiteness(phi, n)?;
    out.notes(&fin.assumptions);
    Ok(out)
}
