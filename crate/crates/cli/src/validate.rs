use expfun::mc::{self, SimulationConfig};
use expfun::moments::{self, MomentLadder, QuadratureOptions};
use expfun::process::{reverse_characteristics, Exponent, LaplaceExponent, Process};
use expfun::{Error, Result};
use serde_json::Value;

use crate::commands::{self, Output};
use crate::report::{num, text, Table, Warning};
use crate::MethodArg;

const MC_Z: f64 = 3.0;

struct Checks {
    table: Table,
    warnings: Vec<Warning>,
    failed: usize,
}

impl Checks {
    fn new() -> Self {
        Checks {
            table: Table::new(&["check", "value", "reference", "detail", "status"]),
            warnings: Vec::new(),
            failed: 0,
        }
    }

    fn row(&mut self, name: impl Into<String>, value: f64, reference: f64, detail: impl Into<String>, ok: bool) {
        if !ok {
            self.failed += 1;
        }
        self.table.push(vec![
            text(name),
            num(value),
            num(reference),
            text(detail),
            text(if ok { "PASS" } else { "FAIL" }),
        ]);
    }

    fn skip(&mut self, name: impl Into<String>, why: &Error) {
        self.table
            .push(vec![text(name), Value::Null, Value::Null, text(why.to_string()), text("SKIP")]);
    }

    fn notes(&mut self, notes: &[String]) {
        for n in notes {
            let w = Warning::from_note(n);
            if !self.warnings.contains(&w) {
                self.warnings.push(w);
            }
        }
    }

    fn finish(mut self) -> Output {
        if self.failed > 0 {
            self.warnings
                .push(Warning::new("VALIDATION_FAILED", format!("{} check(s) failed", self.failed)));
        }
        Output {
            table: self.table,
            warnings: self.warnings,
            details: None,
        }
    }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}

/// Reference ladder: closed form or ODE for Lévy processes, quadrature
/// otherwise.
fn analytic(process: &Process, t: f64, n: u32) -> Result<MomentLadder> {
    commands::ladder(process, t, n, MethodArg::Auto)
}

fn exponent_checks(c: &mut Checks, phi: &dyn LaplaceExponent) -> Result<()> {
    let zero = phi.exponent(0.0)?.finite().unwrap_or(f64::NAN);
    c.row("phi(0) = 0", zero, 0.0, "abs 1e-12", zero.abs() <= 1e-12);
    let grid: Vec<f64> = (-12..=12).map(|i| f64::from(i) * 0.25).collect();
    let vals: Vec<Option<f64>> = grid
        .iter()
        .map(|&a| phi.exponent(a).map(Exponent::finite))
        .collect::<Result<_>>()?;
    let mut worst = 0.0f64;
    for w in vals.windows(3) {
        if let [Some(a), Some(b), Some(d)] = w {
            let scale = a.abs().max(b.abs()).max(d.abs()).max(1.0);
            worst = worst.max((a + d - 2.0 * b) / scale);
        }
    }
    c.row(
        "phi concave on [-3, 3]",
        worst,
        0.0,
        "max scaled second difference <= 1e-10",
        worst <= 1e-10,
    );
    Ok(())
}

fn ladder_checks(c: &mut Checks, process: &Process, t: f64, n: u32) -> Result<Option<MomentLadder>> {
    let full = match analytic(process, t, n) {
        Ok(l) => l,
        Err(e) if e.is_refusal() => {
            c.skip("moment ladder", &e);
            return Ok(None);
        }
        Err(e) => return Err(e),
    };
    c.notes(&full.notes);
    let half = analytic(process, t / 2.0, n)?;
    for e in &full.entries {
        c.row(
            format!("m^({}) > 0", e.order),
            e.value,
            0.0,
            e.method.as_str(),
            e.value > 0.0,
        );
        let h = half.value(e.order).unwrap_or(f64::NAN);
        c.row(
            format!("m^({}) increasing in t", e.order),
            h,
            e.value,
            format!("value at t/2 below value at t = {t}"),
            h < e.value,
        );
    }
    for k in 2..=n as i32 {
        let lo = full.value(k - 1).unwrap_or(f64::NAN).powf(1.0 / f64::from(k - 1));
        let hi = full.value(k).unwrap_or(f64::NAN).powf(1.0 / f64::from(k));
        c.row(
            format!("Jensen ||I||_{} <= ||I||_{}", k - 1, k),
            lo,
            hi,
            "L^p norms nondecreasing",
            lo <= hi * (1.0 + 1e-9),
        );
    }
    Ok(Some(full))
}

fn closed_vs_ode(c: &mut Checks, phi: &dyn LaplaceExponent, t: f64, n: u32) -> Result<()> {
    let pair = commands::closed_ladder(phi, t, n).and_then(|a| Ok((a, moments::levy_moment_ode(phi, t, n)?)));
    match pair {
        Ok((closed, ode)) => {
            for (a, b) in closed.entries.iter().zip(&ode.entries) {
                let r = rel(b.value, a.value);
                c.row(
                    format!("closed form vs ODE, order {}", a.order),
                    b.value,
                    a.value,
                    format!("rel {r:.2e} <= 1e-6"),
                    r <= 1e-6,
                );
            }
            c.notes(&closed.notes);
            Ok(())
        }
        Err(e) if e.is_refusal() || matches!(e, Error::Overflow(_)) => {
            c.skip("closed form vs ODE", &e);
            Ok(())
        }
        Err(e) => Err(e),
    }
}

fn laplace_carson_checks(c: &mut Checks, phi: &dyn LaplaceExponent, n: u32) -> Result<()> {
    let q = 1.0;
    // only orders with E(I_inf^k) finite have a transform
    let mut n = n;
    while n > 0 && moments::infinite_moment(phi, n)?.is_infinite() {
        n -= 1;
    }
    if n == 0 {
        c.skip(
            "Laplace-Carson recurrence",
            &Error::Precondition("E(I_inf) is infinite".into()),
        );
        return Ok(());
    }
    let lc = match moments::laplace_carson_ladder(phi, q, n) {
        Ok(l) => l,
        Err(e) if e.is_refusal() => {
            c.skip("Laplace-Carson recurrence", &e);
            return Ok(());
        }
        Err(e) => return Err(e),
    };
    for k in 1..=n as usize {
        let p = phi.exponent(k as f64)?.finite().unwrap_or(f64::NAN);
        let lhs = (q + p) * lc[k];
        let rhs = k as f64 * lc[k - 1];
        let r = rel(lhs, rhs);
        c.row(
            format!("(q + phi({k})) LC^({k}) = {k} LC^({})", k - 1),
            lhs,
            rhs,
            "q = 1, rel 1e-12",
            r <= 1e-12,
        );
    }
    Ok(())
}

fn reversal_checks(c: &mut Checks, process: &Process, t: f64) -> Result<()> {
    let Some(pii) = process.pii() else {
        return Ok(());
    };
    let rev = reverse_characteristics(pii, t)?;
    for alpha in [1.0, -1.0] {
        let fwd = pii.integrate_h(0.0, t, alpha)?.finite();
        let back = rev.as_pii().integrate_h(0.0, t, alpha)?.finite();
        match (fwd, back) {
            (Some(f), Some(b)) => c.row(
                format!("reversal keeps int_0^t H(s, {alpha}) ds"),
                b,
                f,
                "rel 1e-6",
                rel(b, f) <= 1e-6 || (b - f).abs() <= 1e-12,
            ),
            _ => c.skip(
                format!("reversal keeps int_0^t H(s, {alpha}) ds"),
                &Error::Divergent { alpha },
            ),
        }
    }
    let ito = pii.to_ito();
    let twice = ito.reflect(t).reflect(t);
    let mut worst = 0.0f64;
    for j in 0..=8 {
        let s = t * f64::from(j) / 8.0;
        if let (Some(a), Some(b)) = (ito.h_alpha(s, 1.0)?.finite(), twice.h_alpha(s, 1.0)?.finite()) {
            worst = worst.max((a - b).abs() / a.abs().max(1.0));
        }
    }
    c.row("double reversal is the identity", worst, 0.0, "max deviation of H(s, 1)", worst <= 1e-12);
    Ok(())
}

fn mc_against(c: &mut Checks, label: String, est: &expfun::mc::McEstimate, value: f64) {
    let z = est.z_score(value);
    c.row(label, est.mean, value, format!("z = {z:.2}, se = {:.3e}", est.std_error), z <= MC_Z);
    c.notes(&est.notes);
}

/// Every check that applies to the process.
pub fn full(process: &Process, t: f64, n: u32, cfg: &SimulationConfig) -> Result<Output> {
    let mut c = Checks::new();
    if let Some(phi) = process.levy() {
        exponent_checks(&mut c, phi)?;
        closed_vs_ode(&mut c, phi, t, n)?;
        laplace_carson_checks(&mut c, phi, n)?;
    } else if let Some(pii) = process.pii() {
        let z = pii.phi_t(t, 0.0)?.finite().unwrap_or(f64::NAN);
        c.row("phi_t(0) = 0", z, 0.0, "abs 1e-12", z.abs() <= 1e-12);
    }
    let ladder = ladder_checks(&mut c, process, t, n)?;
    reversal_checks(&mut c, process, t)?;
    if let Some(l) = ladder {
        match mc::estimate_functional_moment(process, t, 1.0, cfg) {
            Ok(est) => mc_against(&mut c, "MC E(I_t) vs analytic".into(), &est, l.value(1).unwrap_or(f64::NAN)),
            Err(e) if e.is_refusal() => c.skip("MC E(I_t) vs analytic", &e),
            Err(e) => return Err(e),
        }
    }
    Ok(c.finish())
}

/// Direct and reversed estimators of `E(I_t^k)` against each other and the
/// analytic ladder when one is available.
pub fn monte_carlo(process: &Process, t: f64, n: u32, cfg: &SimulationConfig) -> Result<Output> {
    let mut c = Checks::new();
    let orders: Vec<f64> = (1..=n).map(f64::from).collect();
    let direct = mc::estimate_functional_moments(process, t, &orders, cfg)?;
    let reference = match analytic(process, t, n) {
        Ok(l) => {
            c.notes(&l.notes);
            Some(l)
        }
        Err(e) if e.is_refusal() => {
            c.skip("analytic ladder", &e);
            None
        }
        Err(e) => return Err(e),
    };
    for (k, d) in (1..=n).zip(&direct) {
        let r = mc::estimate_reversed(process, t, f64::from(k), cfg)?;
        let z = mc::combined_z(d, &r);
        c.row(
            format!("direct vs reversed E(I_t^{k})"),
            d.mean,
            r.mean,
            format!("z = {z:.2}, se = {:.3e} / {:.3e}", d.std_error, r.std_error),
            z <= MC_Z,
        );
        c.notes(&d.notes);
        c.notes(&r.notes);
        if let Some(v) = reference.as_ref().and_then(|l| l.value(k as i32)) {
            mc_against(&mut c, format!("direct E(I_t^{k}) vs analytic"), d, v);
            mc_against(&mut c, format!("reversed E(I_t^{k}) vs analytic"), &r, v);
        }
    }
    let mut out = c.finish();
    out.details = Some(serde_json::json!({ "config": cfg.with_horizon(t), "quadrature": quadrature_note(process) }));
    Ok(out)
}

fn quadrature_note(process: &Process) -> Option<String> {
    if process.is_homogeneous() {
        None
    } else {
        let o = QuadratureOptions::default();
        Some(format!("analytic reference by quadrature, rel_tol {:e}", o.rel_tol))
    }
}
