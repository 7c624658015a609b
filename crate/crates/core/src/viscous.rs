//! Pseudospectral advection–diffusion along a shear program.
//!
//! Each substep of length δ is diffusion(δ/2) · shear(δ) · diffusion(δ/2).
//! Both sub-flows are exact: diffusion is a Fourier multiplier and the shear
//! is a phase multiplier in the mixed representation (Fourier along the
//! advected coordinate, physical along the shearing one).

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::path::PathBuf;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::fft::{transpose, AxisPlan};
use crate::field::{pairwise_sum, Layout, SpectralField};
use crate::program::{Direction, Stage, StageSchedule};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub kappa: f64,
    pub substeps_per_stage: usize,
    pub nx: usize,
    pub ny: usize,
    /// Only consulted when fields are handed to the structure-function pipeline.
    pub dealias: bool,
    /// Ledger sampling interval in substeps; stage ends are always recorded.
    pub ledger_stride: usize,
    /// Where to write the field if the NaN guard trips.
    pub failure_dump: Option<PathBuf>,
}

impl SolverConfig {
    pub fn new(kappa: f64, substeps_per_stage: usize, nx: usize, ny: usize) -> Self {
        Self {
            kappa,
            substeps_per_stage,
            nx,
            ny,
            dealias: false,
            ledger_stride: substeps_per_stage,
            failure_dump: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kappa >= 0.0 && self.kappa.is_finite()) {
            return Err(Error::Config(format!(
                "kappa must be finite and >= 0, got {}",
                self.kappa
            )));
        }
        if self.substeps_per_stage < 4 {
            return Err(Error::Config(
                "substeps_per_stage must be at least 4".into(),
            ));
        }
        if self.ledger_stride == 0 {
            return Err(Error::Config("ledger_stride must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LedgerEntry {
    pub t: f64,
    pub l2: f64,
    pub h1: f64,
    pub h2: f64,
    pub hneg1: f64,
    pub chi: f64,
    pub residual: f64,
    /// Set when the entry closes a stage.
    pub stage_end: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DissipationLedger {
    pub kappa: f64,
    /// |θ_0|²_{L²}.
    pub energy0: f64,
    pub entries: Vec<LedgerEntry>,
}

impl DissipationLedger {
    pub fn chi(&self) -> f64 {
        self.entries.last().map(|e| e.chi).unwrap_or(0.0)
    }

    pub fn residual(&self) -> f64 {
        self.entries.last().map(|e| e.residual).unwrap_or(0.0)
    }

    pub fn max_residual(&self) -> f64 {
        self.entries.iter().map(|e| e.residual).fold(0.0, f64::max)
    }

    pub fn stage_ends(&self) -> impl Iterator<Item = &LedgerEntry> {
        self.entries.iter().filter(|e| e.stage_end.is_some())
    }

    pub fn entry_at_stage(&self, j: u32) -> Option<&LedgerEntry> {
        self.entries.iter().find(|e| e.stage_end == Some(j))
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,l2,h1,h2,hneg1,chi,residual\n");
        for e in &self.entries {
            let _ = writeln!(
                s,
                "{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.15e},{:.6e}",
                e.t, e.l2, e.h1, e.h2, e.hneg1, e.chi, e.residual
            );
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub field: SpectralField,
    pub ledger: DissipationLedger,
}

#[derive(Debug, Clone, Copy, Default)]
struct Sums {
    e: f64,
    k2: f64,
    k4: f64,
    km2: f64,
}

/// One block in stage orientation: rows run over the advected coordinate's
/// modes, columns over the shearing coordinate.
struct Oriented {
    rows: usize,
    cols: usize,
    k_adv: Vec<f64>,
    k_sh: Vec<f64>,
}

fn orientation(layout: &Layout, b: usize, dir: Option<Direction>) -> Oriented {
    let (mx, my) = (layout.mx(), layout.my());
    match dir {
        Some(Direction::Vertical) => Oriented {
            rows: my,
            cols: mx,
            k_adv: layout.ky_values(b),
            k_sh: layout.kx_values(b),
        },
        _ => Oriented {
            rows: mx,
            cols: my,
            k_adv: layout.kx_values(b),
            k_sh: layout.ky_values(b),
        },
    }
}

/// Reusable transform plans and buffers for one layout.
pub struct Stepper {
    layout: Layout,
    plan_x: AxisPlan,
    plan_y: AxisPlan,
    scratch: Vec<Complex64>,
    buf: Vec<Complex64>,
}

impl Stepper {
    pub fn new(layout: &Layout) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            plan_x: AxisPlan::new(&mut planner, layout.mx()),
            plan_y: AxisPlan::new(&mut planner, layout.my()),
            layout: layout.clone(),
            scratch: Vec::new(),
            buf: vec![Complex64::default(); layout.block_len()],
        }
    }

    fn check_stage(&self, stage: &Stage) -> Result<()> {
        if !stage.active || stage.duration == 0.0 {
            return Ok(());
        }
        let l = &self.layout;
        let (n, p) = match stage.direction {
            Direction::Horizontal => (l.ny, l.py),
            Direction::Vertical => (l.nx, l.px),
        };
        if stage.frequency as usize > n / 8 {
            return Err(Error::Resolution(format!(
                "stage {} frequency {} exceeds a quarter of the Nyquist band of a {}-point grid",
                stage.j, stage.frequency, n
            )));
        }
        if !stage.frequency.is_multiple_of(p as u64) {
            return Err(Error::Config(format!(
                "stage {} frequency {} is not a multiple of the layout period {}",
                stage.j, stage.frequency, p
            )));
        }
        Ok(())
    }

    fn sums(&self, field: &SpectralField, dir: Option<Direction>, full: bool) -> Sums {
        let mut parts: Vec<Sums> = Vec::new();
        for (b, block) in field.blocks().iter().enumerate() {
            let o = orientation(&self.layout, b, dir);
            for r in 0..o.rows {
                let ka2 = o.k_adv[r] * o.k_adv[r];
                let mut s = Sums::default();
                for (c, v) in block[r * o.cols..(r + 1) * o.cols].iter().enumerate() {
                    let k2 = ka2 + o.k_sh[c] * o.k_sh[c];
                    let a = v.norm_sqr();
                    s.e += a;
                    s.k2 += k2 * a;
                    if full {
                        s.k4 += k2 * k2 * a;
                        if k2 > 0.0 {
                            s.km2 += a / k2;
                        }
                    }
                }
                parts.push(s);
            }
        }
        Sums {
            e: pairwise_sum(parts.iter().map(|s| s.e).collect()),
            k2: pairwise_sum(parts.iter().map(|s| s.k2).collect()),
            k4: pairwise_sum(parts.iter().map(|s| s.k4).collect()),
            km2: pairwise_sum(parts.iter().map(|s| s.km2).collect()),
        }
    }

    fn reorient(&mut self, field: &mut SpectralField, to_vertical: bool) {
        let (mx, my) = (self.layout.mx(), self.layout.my());
        let (r, c) = if to_vertical { (mx, my) } else { (my, mx) };
        for block in field.blocks_mut() {
            transpose(block, &mut self.buf, r, c);
            block.copy_from_slice(&self.buf);
        }
    }

    /// Advance `field` through `stage` in `substeps` Strang substeps.
    /// `sink` receives the substep index (1-based) and whether sums are full,
    /// and must return whether the next boundary needs full sums.
    fn advance(
        &mut self,
        field: &mut SpectralField,
        stage: &Stage,
        kappa: f64,
        substeps: usize,
        mut sink: impl FnMut(usize, Sums) -> Result<()>,
        mut want_full: impl FnMut(usize) -> bool,
    ) -> Result<()> {
        self.check_stage(stage)?;
        let moving = stage.active && stage.duration > 0.0;
        let dir = if moving { Some(stage.direction) } else { None };
        let vertical = dir == Some(Direction::Vertical);
        let delta = stage.duration / substeps as f64;
        if delta == 0.0 {
            return Ok(());
        }
        if vertical {
            self.reorient(field, true);
        }
        let nblocks = field.blocks().len();
        let orients: Vec<Oriented> = (0..nblocks)
            .map(|b| orientation(&self.layout, b, dir))
            .collect();
        // separable half-step heat multipliers
        let half = |k: &Vec<f64>| -> Vec<f64> {
            k.iter()
                .map(|k| (-kappa * k * k * 0.5 * delta).exp())
                .collect()
        };
        let dh: Vec<(Vec<f64>, Vec<f64>)> = orients
            .iter()
            .map(|o| (half(&o.k_adv), half(&o.k_sh)))
            .collect();
        let phases: Vec<Vec<Complex64>> = if moving {
            let profile = stage.profile();
            let n_sh = match stage.direction {
                Direction::Horizontal => self.layout.ny,
                Direction::Vertical => self.layout.nx,
            };
            orients
                .iter()
                .map(|o| {
                    let disp: Vec<f64> = (0..o.cols)
                        .map(|q| stage.shift(&profile, delta, TAU * q as f64 / n_sh as f64))
                        .collect();
                    let norm = 1.0 / o.cols as f64;
                    let mut t = Vec::with_capacity(o.rows * o.cols);
                    for r in 0..o.rows {
                        let k = o.k_adv[r];
                        t.extend(disp.iter().map(|d| Complex64::from_polar(norm, -k * d)));
                    }
                    t
                })
                .collect()
        } else {
            Vec::new()
        };
        let diffuse = kappa > 0.0;
        let plan = if vertical {
            self.plan_x.clone()
        } else {
            self.plan_y.clone()
        };

        if diffuse {
            for (b, block) in field.blocks_mut().iter_mut().enumerate() {
                apply_heat(block, &dh[b].0, &dh[b].1, orients[b].cols);
            }
        }
        for s in 0..substeps {
            if moving {
                for (b, block) in field.blocks_mut().iter_mut().enumerate() {
                    plan.inverse_rows(block, &mut self.scratch);
                    for (v, p) in block.iter_mut().zip(&phases[b]) {
                        *v *= p;
                    }
                    plan.forward_rows(block, &mut self.scratch);
                }
            }
            let last = s + 1 == substeps;
            let full = want_full(s + 1);
            if diffuse {
                let mut parts = Vec::with_capacity(nblocks);
                for (b, block) in field.blocks_mut().iter_mut().enumerate() {
                    let o = &orients[b];
                    parts.push(heat_and_sum(block, o, &dh[b].0, &dh[b].1, !last, full));
                }
                let sums = combine(parts);
                guard(&sums, stage, s)?;
                sink(s + 1, sums)?;
            } else if full || last {
                let sums = self.sums(field, dir, full);
                guard(&sums, stage, s)?;
                sink(s + 1, sums)?;
            }
        }
        if vertical {
            self.reorient(field, false);
        }
        Ok(())
    }
}

fn guard(s: &Sums, stage: &Stage, sub: usize) -> Result<()> {
    if !(s.e.is_finite() && s.k2.is_finite() && s.k4.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite field at stage {} substep {}",
            stage.j,
            sub + 1
        )));
    }
    Ok(())
}

fn apply_heat(block: &mut [Complex64], da: &[f64], ds: &[f64], cols: usize) {
    for (r, row) in block.chunks_mut(cols).enumerate() {
        let a = da[r];
        for (v, s) in row.iter_mut().zip(ds) {
            *v *= a * s;
        }
    }
}

/// Half-step heat, sums at the substep boundary, then (optionally) the next
/// substep's opening half-step.
fn heat_and_sum(
    block: &mut [Complex64],
    o: &Oriented,
    da: &[f64],
    ds: &[f64],
    second: bool,
    full: bool,
) -> Vec<Sums> {
    let mut out = Vec::with_capacity(o.rows);
    for (r, row) in block.chunks_mut(o.cols).enumerate() {
        let a = da[r];
        let ka2 = o.k_adv[r] * o.k_adv[r];
        let mut s = Sums::default();
        for (c, v) in row.iter_mut().enumerate() {
            let m = a * ds[c];
            *v *= m;
            let n = v.norm_sqr();
            let k2 = ka2 + o.k_sh[c] * o.k_sh[c];
            s.e += n;
            s.k2 += k2 * n;
            if full {
                s.k4 += k2 * k2 * n;
                if k2 > 0.0 {
                    s.km2 += n / k2;
                }
            }
            if second {
                *v *= m;
            }
        }
        out.push(s);
    }
    out
}

fn combine(parts: Vec<Vec<Sums>>) -> Sums {
    let flat: Vec<Sums> = parts.into_iter().flatten().collect();
    Sums {
        e: pairwise_sum(flat.iter().map(|s| s.e).collect()),
        k2: pairwise_sum(flat.iter().map(|s| s.k2).collect()),
        k4: pairwise_sum(flat.iter().map(|s| s.k4).collect()),
        km2: pairwise_sum(flat.iter().map(|s| s.km2).collect()),
    }
}

/// Advance `field` through one stage without bookkeeping.
pub fn step_stage(
    field: &mut SpectralField,
    stage: &Stage,
    kappa: f64,
    substeps: usize,
) -> Result<()> {
    if substeps == 0 {
        return Err(Error::Config("substeps must be positive".into()));
    }
    let mut st = Stepper::new(field.layout());
    st.advance(field, stage, kappa, substeps, |_, _| Ok(()), |_| false)
}

/// Solve along the whole program, recording the dissipation ledger.
pub fn run(
    theta0: &SpectralField,
    schedule: &StageSchedule,
    cfg: &SolverConfig,
) -> Result<RunOutput> {
    cfg.validate()?;
    if theta0.nx() != cfg.nx || theta0.ny() != cfg.ny {
        return Err(Error::Config(format!(
            "field is {}x{} but the solver is configured for {}x{}",
            theta0.nx(),
            theta0.ny(),
            cfg.nx,
            cfg.ny
        )));
    }
    let l0 = theta0.l2();
    if theta0.mean().abs() > 1e-12 * l0.max(f64::MIN_POSITIVE) {
        return Err(Error::Config("initial field must have zero mean".into()));
    }
    let mut stepper = Stepper::new(theta0.layout());
    for st in &schedule.stages {
        stepper.check_stage(st)?;
    }
    let mut field = theta0.clone();
    let w = TAU * TAU;
    let energy0 = l0 * l0;
    let kappa = cfg.kappa;
    let s0 = stepper.sums(&field, None, true);
    let entry = |t: f64, s: &Sums, chi: f64, stage_end| {
        let l2sq = w * s.e;
        LedgerEntry {
            t,
            l2: l2sq.sqrt(),
            h1: (w * s.k2).sqrt(),
            h2: (w * s.k4).sqrt(),
            hneg1: (w * s.km2).sqrt(),
            chi,
            residual: (0.5 * l2sq - 0.5 * energy0 + chi).abs() / energy0,
            stage_end,
        }
    };
    let mut entries = vec![entry(0.0, &s0, 0.0, None)];
    let mut chi = 0.0;
    let mut rate_prev = kappa * w * s0.k2;
    let stride = cfg.ledger_stride;
    let n = cfg.substeps_per_stage;
    for st in &schedule.stages {
        if st.duration == 0.0 {
            continue;
        }
        let delta = st.duration / n as f64;
        let t0 = st.start_time;
        let res = stepper.advance(
            &mut field,
            st,
            kappa,
            n,
            |s, sums| {
                let rate = kappa * w * sums.k2;
                chi += 0.5 * delta * (rate_prev + rate);
                rate_prev = rate;
                let end = s == n;
                if end || s % stride == 0 {
                    let t = if end {
                        st.end_time()
                    } else {
                        t0 + delta * s as f64
                    };
                    entries.push(entry(t, &sums, chi, end.then_some(st.j)));
                }
                Ok(())
            },
            |s| s == n || s % stride == 0,
        );
        if let Err(e) = res {
            if let Some(p) = &cfg.failure_dump {
                let _ = field.save(p);
            }
            return Err(e);
        }
    }
    Ok(RunOutput {
        field,
        ledger: DissipationLedger {
            kappa,
            energy0,
            entries,
        },
    })
}

/// |θ^κ(T_j)|_{H²} / |θ(T_j)|²_{H¹} (inhomogeneous norms) at each stage end
/// present in both inputs. `inviscid` holds (j, |θ_j|_{L²}, |θ_j|_{Ḣ¹}).
pub fn h2_ratio_trace(ledger: &DissipationLedger, inviscid: &[(u32, f64, f64)]) -> Vec<(u32, f64)> {
    let mut out = Vec::new();
    for &(j, l2, h1) in inviscid {
        if let Some(e) = ledger.entry_at_stage(j) {
            let h2_inhom = (e.l2 * e.l2 + 2.0 * e.h1 * e.h1 + e.h2 * e.h2).sqrt();
            let h1_inhom_sq = l2 * l2 + h1 * h1;
            out.push((j, h2_inhom / h1_inhom_sq));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inviscid::{sample_grid, HarmonicData, InitialData};

    fn setup(nx: usize, jmax: u32) -> (InitialData, StageSchedule, Layout) {
        let th = InitialData::Harmonic(HarmonicData::sinsin(1, 1));
        let s = StageSchedule::build_universal(0.5, jmax).unwrap();
        let modes: Vec<(i64, i64)> = th.modes().iter().map(|m| (m.0, m.1)).collect();
        let l = Layout::for_program(nx, nx, &s, modes).unwrap();
        (th, s, l)
    }

    #[test]
    fn inviscid_run_matches_pullback_samples() {
        let (th, s, l) = setup(512, 4);
        let f0 = th.to_field(l.clone()).unwrap();
        let out = run(&f0, &s, &SolverConfig::new(0.0, 8, 512, 512)).unwrap();
        let exact = sample_grid(&th, &s, 4, l, false).unwrap().field;
        let d = out.field.distance_l2(&exact).unwrap() / exact.l2();
        assert!(d < 1e-10, "relative difference {d}");
        assert!((out.field.l2() - f0.l2()).abs() < 1e-12 * f0.l2());
    }

    #[test]
    fn pure_diffusion_is_heat_kernel() {
        let (th, _, _) = setup(32, 2);
        let l = Layout::plain(32, 32).unwrap();
        let f0 = th.to_field(l).unwrap();
        let s = StageSchedule::build_universal(0.5, 2).unwrap();
        let kappa = 0.01;
        let out = run(&f0, &s, &SolverConfig::new(kappa, 16, 32, 32)).unwrap();
        let tt = s.total_time();
        let expect = -0.25 * (-2.0 * kappa * tt).exp();
        assert!((out.field.coeff(1, 1).re - expect).abs() < 1e-15);
        let chi_exact = 0.5 * f0.l2().powi(2) * (1.0 - (-4.0 * kappa * tt).exp());
        assert!((out.ledger.chi() - chi_exact).abs() < 1e-6 * chi_exact);
    }

    #[test]
    fn guard_rejects_unresolved_stage() {
        let (th, s, l) = setup(128, 5);
        let f0 = th.to_field(l).unwrap();
        let err = run(&f0, &s, &SolverConfig::new(1e-3, 8, 128, 128)).unwrap_err();
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn zero_length_stage_is_identity() {
        let (th, s, l) = setup(64, 3);
        let mut f = th.to_field(l).unwrap();
        let before = f.clone();
        let mut st = s.stage(3).unwrap().clone();
        st.duration = 0.0;
        step_stage(&mut f, &st, 1e-2, 8).unwrap();
        assert_eq!(f, before);
    }
}
