//! Norms, dissipation-criterion checkers, structure functions and the
//! Obukhov–Corrsin bound.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt::Write as _;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::field::{GridView, SpectralField};
use crate::inviscid::BootstrapTrace;
use crate::program::{ScheduleKind, StageSchedule};
use crate::viscous::DissipationLedger;

/// |θ|_{Ḣ^s}; negative s requires zero mean.
pub fn sobolev_norm(field: &SpectralField, s: f64) -> Result<f64> {
    field.sobolev(s)
}

/// Norms of one field at one time.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct NormSample {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub hneg1: f64,
}

impl NormSample {
    pub fn of(field: &SpectralField, t: f64) -> Result<Self> {
        Ok(Self {
            t,
            l2: field.l2(),
            h1: field.sobolev(1.0)?,
            h2: field.sobolev(2.0)?,
            hneg1: field.sobolev(-1.0)?,
        })
    }

    /// |θ|²_{Ḣ¹} ≤ |θ|_{L²}|θ|_{Ḣ²} and |θ_0|² ≤ |θ|_{Ḣ⁻¹}|θ|_{Ḣ¹}, with relative slack `tol`.
    pub fn interpolation_holds(&self, l2_initial: f64, tol: f64) -> bool {
        self.h1 * self.h1 <= self.l2 * self.h2 * (1.0 + tol)
            && l2_initial * l2_initial <= self.hneg1 * self.h1 * (1.0 + tol)
    }
}

/// Stage-end samples of a viscous run, preceded by t = 0.
pub fn ledger_trace(ledger: &DissipationLedger) -> Vec<NormSample> {
    let first = ledger.entries.first().into_iter();
    first
        .chain(ledger.stage_ends())
        .map(|e| NormSample {
            t: e.t,
            l2: e.l2,
            h1: e.h1,
            h2: e.h2,
            hneg1: e.hneg1,
        })
        .collect()
}

/// Stage-end samples of an inviscid evolution, preceded by θ_0 at t = 0.
pub fn bootstrap_norm_trace(
    trace: &BootstrapTrace,
    theta0: &SpectralField,
) -> Result<Vec<NormSample>> {
    let mut out = vec![NormSample::of(theta0, 0.0)?];
    for r in &trace.records {
        out.push(NormSample {
            t: r.time,
            l2: r.l2,
            h1: r.h1,
            h2: r.h2,
            hneg1: r.hneg1,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CriterionReport {
    pub id: u8,
    pub times: Vec<f64>,
    /// Named per-time hypothesis quantities.
    pub columns: Vec<(String, Vec<f64>)>,
    pub satisfied: Vec<bool>,
    /// Empirical constant: inf c (criterion 1) or sup C (criterion 2, 3).
    pub constant: f64,
    /// Dissipation lower bound implied by the constant, when the criterion gives one.
    pub implied_bound: Option<f64>,
    pub notes: Vec<String>,
}

impl CriterionReport {
    pub fn column(&self, name: &str) -> Option<&[f64]> {
        self.columns
            .iter()
            .find(|c| c.0 == name)
            .map(|c| c.1.as_slice())
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t");
        for (name, _) in &self.columns {
            s.push(',');
            s.push_str(name);
        }
        s.push_str(",satisfied\n");
        for (i, t) in self.times.iter().enumerate() {
            let _ = write!(s, "{t:.15e}");
            for (_, v) in &self.columns {
                let _ = write!(s, ",{:.12e}", v.get(i).copied().unwrap_or(f64::NAN));
            }
            let _ = writeln!(
                s,
                ",{}",
                u8::from(self.satisfied.get(i).copied().unwrap_or(false))
            );
        }
        s
    }
}

fn aligned(a: &[NormSample], b: &[NormSample]) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::Config(format!(
            "traces have {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    for (x, y) in a.iter().zip(b) {
        if (x.t - y.t).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "trace times {} and {} differ",
                x.t, y.t
            )));
        }
    }
    Ok(())
}

/// c(t) = |θ|²_{Ḣ¹} / ((|θ|_{Ḣ²} + |θ^κ|_{Ḣ²}) |θ_0|) over t > 0; implied bound (c/2)⁴|θ_0|².
pub fn criterion1_check(
    inviscid: &[NormSample],
    viscous: &[NormSample],
    l2_initial: f64,
) -> Result<CriterionReport> {
    aligned(inviscid, viscous)?;
    let mut times = Vec::new();
    let mut c = Vec::new();
    let mut sat = Vec::new();
    for (a, b) in inviscid.iter().zip(viscous) {
        if a.t <= 0.0 {
            continue;
        }
        let v = a.h1 * a.h1 / ((a.h2 + b.h2) * l2_initial);
        times.push(a.t);
        c.push(v);
        sat.push(v > 0.0 && v < 1.0);
    }
    let inf = c.iter().copied().fold(f64::INFINITY, f64::min);
    // running ∫|∇θ|² dt (trapezoid) against 1/(1 − t)
    let mut integral = vec![0.0];
    for w in inviscid.windows(2) {
        let last = *integral.last().unwrap();
        integral.push(last + 0.5 * (w[1].t - w[0].t) * (w[0].h1 * w[0].h1 + w[1].h1 * w[1].h1));
    }
    let mut slopes = Vec::new();
    for i in 1..inviscid.len().saturating_sub(1) {
        let (t0, t1) = (inviscid[i].t, inviscid[i + 1].t);
        if integral[i] > 0.0 && t1 < 1.0 {
            let s = (integral[i + 1] / integral[i]).ln() / ((1.0 - t0) / (1.0 - t1)).ln();
            slopes.push(s);
        }
    }
    let growing =
        slopes.windows(2).all(|w| w[1] >= w[0]) && slopes.last().is_some_and(|s| *s > 1.0);
    let mut notes = vec![format!("inf c = {inf:.6e}")];
    notes.push(format!(
        "log-log slopes of the running gradient integral vs 1/(1-t): {:?}; unbounded growth: {growing}",
        slopes.iter().map(|s| (s * 1e3).round() / 1e3).collect::<Vec<_>>()
    ));
    let integral_t: Vec<f64> = integral
        .iter()
        .skip(inviscid.len() - times.len())
        .copied()
        .collect();
    Ok(CriterionReport {
        id: 1,
        times,
        columns: vec![("c".into(), c), ("grad_integral".into(), integral_t)],
        satisfied: sat,
        constant: inf,
        implied_bound: Some((inf / 2.0).powi(4) * l2_initial * l2_initial),
        notes,
    })
}

/// C(t) = |θ|_{Ḣ⁻¹}|θ|_{Ḣ¹}/|θ_0|²; implied bound |θ_0|²/(64 sup C²).
pub fn criterion2_check(inviscid: &[NormSample]) -> Result<CriterionReport> {
    let first = inviscid
        .first()
        .ok_or_else(|| Error::Config("empty trace".into()))?;
    let l0 = first.l2;
    let c: Vec<f64> = inviscid
        .iter()
        .map(|s| s.hneg1 * s.h1 / (l0 * l0))
        .collect();
    let sat: Vec<bool> = c.iter().map(|v| *v >= 1.0 - 1e-9).collect();
    let sup = c.iter().copied().fold(0.0, f64::max);
    let growing = c.windows(2).all(|w| w[1] >= w[0] * (1.0 - 1e-12)) && c.last() > c.first();
    Ok(CriterionReport {
        id: 2,
        times: inviscid.iter().map(|s| s.t).collect(),
        columns: vec![("C".into(), c)],
        satisfied: sat,
        constant: sup,
        implied_bound: Some(l0 * l0 / (64.0 * sup * sup)),
        notes: vec![format!(
            "C(t) nondecreasing and growing (not mixing): {growing}"
        )],
    })
}

/// Blow-up time used by the hypotheses: 1 for the universal programs.
fn singular_time(schedule: &StageSchedule) -> f64 {
    match schedule.kind {
        ScheduleKind::Custom => schedule.total_time(),
        _ => 1.0,
    }
}

/// Margins for the three hypotheses: Ḣ²/Ḣ¹², Ḣ¹·(T−t), and per active stage
/// N_j·(T − T_j) where T_j is the stage end.
pub fn criterion3_check(
    inviscid: &[NormSample],
    schedule: &StageSchedule,
) -> Result<CriterionReport> {
    let tt = singular_time(schedule);
    let samples: Vec<&NormSample> = inviscid.iter().filter(|s| s.t > 0.0 && s.t < tt).collect();
    let ratio: Vec<f64> = samples.iter().map(|s| s.h2 / (s.h1 * s.h1)).collect();
    let lower: Vec<f64> = samples.iter().map(|s| s.h1 * (tt - s.t)).collect();
    let grad: Vec<f64> = samples
        .iter()
        .map(|s| {
            schedule
                .active_stages()
                .find(|st| (st.end_time() - s.t).abs() < 1e-12)
                .map(|st| st.frequency as f64 * (tt - st.end_time()))
                .unwrap_or(f64::NAN)
        })
        .collect();
    let grads: Vec<f64> = grad.iter().copied().filter(|v| v.is_finite()).collect();
    let grad_bounded = grads.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-12));
    let lower_inf = lower.iter().copied().fold(f64::INFINITY, f64::min);
    let sat: Vec<bool> = grad
        .iter()
        .map(|g| !g.is_finite() || grad_bounded)
        .collect();
    let sup_ratio = ratio.iter().copied().fold(0.0, f64::max);
    Ok(CriterionReport {
        id: 3,
        times: samples.iter().map(|s| s.t).collect(),
        columns: vec![
            ("h2_over_h1sq".into(), ratio),
            ("h1_times_gap".into(), lower),
            ("gradu_times_gap".into(), grad),
        ],
        satisfied: sat,
        constant: sup_ratio,
        implied_bound: None,
        notes: vec![
            format!("sup H2/H1^2 = {sup_ratio:.6e}"),
            format!("inf H1*(T-t) = {lower_inf:.6e}"),
            format!("gradient hypothesis holds: {grad_bounded}"),
        ],
    })
}

/// Stage-wise N_j(1 − T_j) for the active stages, with T_j the stage end.
pub fn gradient_gap_ratios(schedule: &StageSchedule) -> Vec<(u32, f64)> {
    let tt = singular_time(schedule);
    schedule
        .active_stages()
        .map(|s| (s.j, s.frequency as f64 * (tt - s.end_time())))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct StructureRow {
    pub ell: f64,
    pub ell_axis: f64,
    pub ell_diag: f64,
    pub value: f64,
}

fn check_structure_args(p: f64, ells: &[f64], h: f64) -> Result<()> {
    if p.is_nan() || p < 1.0 {
        return Err(Error::Config(format!(
            "structure-function order must be >= 1, got {p}"
        )));
    }
    for &l in ells {
        if !(l >= h * (1.0 - 1e-9) && l <= PI) {
            return Err(Error::Config(format!(
                "separation {l} outside [grid spacing, pi]"
            )));
        }
    }
    Ok(())
}

/// Isotropic S_p(ℓ) of an x-major `nx × ny` grid: the mean over the two axes
/// and the two diagonals of ⟨|f(x+ℓe) − f(x)|^p⟩ with periodic wraparound.
/// Axis shifts use round(ℓ/h) steps, diagonal ones round(ℓ/(√2 h)) steps per component.
pub fn structure_function(
    values: &[f64],
    nx: usize,
    ny: usize,
    p: f64,
    ells: &[f64],
) -> Result<Vec<StructureRow>> {
    if values.len() != nx * ny || nx != ny {
        return Err(Error::Config(
            "structure functions need a square x-major grid".into(),
        ));
    }
    let h = TAU / nx as f64;
    check_structure_args(p, ells, h)?;
    let pw = |d: f64| {
        if p == 1.0 {
            d.abs()
        } else if p == 2.0 {
            d * d
        } else {
            d.abs().powf(p)
        }
    };
    let mut out = Vec::with_capacity(ells.len());
    for &ell in ells {
        let m = ((ell / h).round() as usize).max(1);
        let md = ((ell / (2f64.sqrt() * h)).round() as usize).max(1);
        let shifts = [
            (m, 0usize, false),
            (0, m, false),
            (md, md, false),
            (md, md, true),
        ];
        let mut total = 0.0;
        for &(sa, sb, anti) in &shifts {
            let mut acc = Vec::with_capacity(nx);
            for a in 0..nx {
                let a2 = (a + sa) % nx;
                let mut s = 0.0;
                for b in 0..ny {
                    let b2 = if anti {
                        (b + ny - sb % ny) % ny
                    } else {
                        (b + sb) % ny
                    };
                    s += pw(values[a2 * ny + b2] - values[a * ny + b]);
                }
                acc.push(s);
            }
            total += crate::field::pairwise_sum(acc) / (nx * ny) as f64;
        }
        out.push(StructureRow {
            ell,
            ell_axis: m as f64 * h,
            ell_diag: md as f64 * h * 2f64.sqrt(),
            value: total / 4.0,
        });
    }
    Ok(out)
}

/// S_p(ℓ) of periodic samples on a line of length 2π.
pub fn structure_function_line(samples: &[f64], p: f64, ells: &[f64]) -> Result<Vec<StructureRow>> {
    let n = samples.len();
    if n < 4 {
        return Err(Error::Config("need at least four samples".into()));
    }
    let h = TAU / n as f64;
    check_structure_args(p, ells, h)?;
    let mut out = Vec::with_capacity(ells.len());
    for &ell in ells {
        let m = ((ell / h).round() as usize).max(1);
        let mut acc = Vec::with_capacity(n / 1024 + 1);
        for chunk in (0..n).collect::<Vec<_>>().chunks(1024) {
            acc.push(
                chunk
                    .iter()
                    .map(|&i| (samples[(i + m) % n] - samples[i]).abs().powf(p))
                    .sum(),
            );
        }
        out.push(StructureRow {
            ell,
            ell_axis: m as f64 * h,
            ell_diag: f64::NAN,
            value: crate::field::pairwise_sum(acc) / n as f64,
        });
    }
    Ok(out)
}

pub fn structure_csv(rows: &[StructureRow]) -> String {
    let mut s = String::from("ell,ell_axis,ell_diag,S_p\n");
    for r in rows {
        let _ = writeln!(
            s,
            "{:.12e},{:.12e},{:.12e},{:.12e}",
            r.ell, r.ell_axis, r.ell_diag, r.value
        );
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExponentFit {
    pub window: (f64, f64),
    pub points: usize,
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual in log space.
    pub residual: f64,
}

impl ExponentFit {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("fit serializes")
    }
}

/// Least squares of log S against log ℓ over rows with ℓ in `window`.
pub fn fit_exponent(rows: &[StructureRow], window: (f64, f64)) -> Result<ExponentFit> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.ell >= window.0 && r.ell <= window.1)
        .map(|r| (r.ell.ln(), r.value.ln()))
        .collect();
    if pts.len() < 2 || pts.iter().any(|p| !p.1.is_finite()) {
        return Err(Error::Config(format!("degenerate fit window {window:?}")));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::Config("fit window holds a single separation".into()));
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let residual = (pts
        .iter()
        .map(|p| (p.1 - intercept - slope * p.0).powi(2))
        .sum::<f64>()
        / n)
        .sqrt();
    Ok(ExponentFit {
        window,
        points: pts.len(),
        slope,
        intercept,
        residual,
    })
}

/// (α + 2β − 1)/(α + 1).
pub fn oc_exponent(alpha: f64, beta: f64) -> f64 {
    (alpha + 2.0 * beta - 1.0) / (alpha + 1.0)
}

/// ℓ^{α+2β−1}|θ|²_{C^β}|u|_{L¹C^α} + (κTℓ^{2(β−1)} + ℓ^{2β})|θ|²_{C^β} with ℓ = κ^{1/(α+1)}.
pub fn obukhov_corrsin_bound(
    alpha: f64,
    beta: f64,
    kappa: f64,
    theta_cbeta: f64,
    u_l1_calpha: f64,
    t: f64,
) -> Result<f64> {
    if !(alpha > 0.0 && alpha <= 1.0 && beta > 0.0 && beta <= 1.0 && kappa > 0.0) {
        return Err(Error::Config(
            "need alpha, beta in (0,1] and kappa > 0".into(),
        ));
    }
    let ell = kappa.powf(1.0 / (alpha + 1.0));
    let th2 = theta_cbeta * theta_cbeta;
    Ok(ell.powf(alpha + 2.0 * beta - 1.0) * th2 * u_l1_calpha
        + (kappa * t * ell.powf(2.0 * (beta - 1.0)) + ell.powf(2.0 * beta)) * th2)
}

/// Σ t_j (sup|S| + [S(N_j·)]_α) over active stages, using the sharp-sawtooth
/// seminorm π^{1−α}N^α, which dominates the smoothed one.
pub fn velocity_holder_norm(schedule: &StageSchedule, alpha: f64) -> f64 {
    schedule
        .active_stages()
        .map(|s| s.duration * (FRAC_PI_2 + PI.powf(1.0 - alpha) * (s.frequency as f64).powf(alpha)))
        .sum()
}

/// Hölder data of a field measured on its grid.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HolderProbe {
    pub beta: f64,
    pub sup: f64,
    /// max over probe shifts of |δθ|/ℓ^β.
    pub quotient: f64,
}

impl HolderProbe {
    pub fn norm(&self) -> f64 {
        self.sup + self.quotient
    }
}

/// Largest increments along both axes for shifts of `steps` grid points,
/// plus the sup norm. Streams lines so the full grid is never stored.
pub fn max_increments(view: &GridView, steps: &[usize]) -> (f64, Vec<f64>) {
    let l = view.layout();
    let (nx, ny) = (l.nx, l.ny);
    let mut best = vec![0.0f64; steps.len()];
    let mut sup = 0.0f64;
    let mut line = vec![0.0; nx.max(ny)];
    for b in 0..ny {
        let row = &mut line[..nx];
        view.line_x(b, row);
        for v in row.iter() {
            sup = sup.max(v.abs());
        }
        for (k, &m) in steps.iter().enumerate() {
            for a in 0..nx {
                best[k] = best[k].max((row[(a + m) % nx] - row[a]).abs());
            }
        }
    }
    for a in 0..nx {
        let col = &mut line[..ny];
        view.line_y(a, col);
        for (k, &m) in steps.iter().enumerate() {
            for b in 0..ny {
                best[k] = best[k].max((col[(b + m) % ny] - col[b]).abs());
            }
        }
    }
    (sup, best)
}

/// Hölder quotients for each β from precomputed increments.
pub fn holder_probes(
    sup: f64,
    increments: &[f64],
    steps: &[usize],
    h: f64,
    betas: &[f64],
) -> Vec<HolderProbe> {
    betas
        .iter()
        .map(|&beta| {
            let q = steps
                .iter()
                .zip(increments)
                .map(|(&m, &d)| d / (m as f64 * h).powf(beta))
                .fold(0.0, f64::max);
            HolderProbe {
                beta,
                sup,
                quotient: q,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oc_reference_substitution() {
        let b = obukhov_corrsin_bound(1.0, 1.0, 1e-4, 1.0, 1.0, 1.0).unwrap();
        assert!((b - 3e-4).abs() < 1e-15);
        assert_eq!(oc_exponent(0.5, 0.25), 0.0);
        assert!(oc_exponent(0.5, 0.5) > 0.0);
    }

    #[test]
    fn structure_function_of_sine_along_axes() {
        let n = 128;
        let vals: Vec<f64> = (0..n * n)
            .map(|i| (TAU * (i / n) as f64 / n as f64).sin())
            .collect();
        let h = TAU / n as f64;
        let rows = structure_function(&vals, n, n, 2.0, &[8.0 * h]).unwrap();
        // direct summation along each direction
        let md = (8.0f64 / 2f64.sqrt()).round();
        let ax = 1.0 - (8.0 * h).cos();
        let dg = 1.0 - (md * h).cos();
        let expect = (ax + 0.0 + 2.0 * dg) / 4.0;
        assert!((rows[0].value - expect).abs() < 1e-12);
        let flat = vec![3.0; n * n];
        assert_eq!(
            structure_function(&flat, n, n, 1.0, &[h]).unwrap()[0].value,
            0.0
        );
        assert!(structure_function(&flat, n, n, 0.5, &[h]).is_err());
    }

    #[test]
    fn fit_recovers_power_law() {
        let rows: Vec<StructureRow> = (1..10)
            .map(|i| {
                let l = 0.01 * i as f64;
                StructureRow {
                    ell: l,
                    ell_axis: l,
                    ell_diag: l,
                    value: 3.0 * l.powf(0.7),
                }
            })
            .collect();
        let f = fit_exponent(&rows, (0.0, 1.0)).unwrap();
        assert!((f.slope - 0.7).abs() < 1e-12);
        assert!(fit_exponent(&rows, (0.5, 0.6)).is_err());
        assert!(f.to_json().contains("\"slope\""));
    }
}
