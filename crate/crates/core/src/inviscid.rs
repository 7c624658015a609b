//! Exact inviscid transport by pullback through the composed shear maps.

use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, Axis, Layout, SpectralField};
use crate::program::{Direction, Stage, StageSchedule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HarmonicKind {
    SinSin,
    SinCos,
    CosSin,
    CosCos,
}

impl HarmonicKind {
    fn parts(self) -> (bool, bool) {
        // true = sine factor
        match self {
            HarmonicKind::SinSin => (true, true),
            HarmonicKind::SinCos => (true, false),
            HarmonicKind::CosSin => (false, true),
            HarmonicKind::CosCos => (false, false),
        }
    }

    fn tag(self) -> &'static str {
        match self {
            HarmonicKind::SinSin => "sinsin",
            HarmonicKind::SinCos => "sincos",
            HarmonicKind::CosSin => "cossin",
            HarmonicKind::CosCos => "coscos",
        }
    }
}

/// λ · f(Mx) g(Ly) with f, g ∈ {sin, cos}.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HarmonicData {
    pub kind: HarmonicKind,
    pub m: u32,
    pub l: u32,
    pub amplitude: f64,
}

fn factor(sine: bool, k: u32, z: f64) -> (f64, f64) {
    let kz = k as f64 * z;
    if sine {
        (kz.sin(), k as f64 * kz.cos())
    } else {
        (kz.cos(), -(k as f64) * kz.sin())
    }
}

fn factor_modes(sine: bool, k: u32) -> Vec<(i64, Complex64)> {
    let k = k as i64;
    match (sine, k) {
        (false, 0) => vec![(0, Complex64::new(1.0, 0.0))],
        (true, _) => vec![
            (k, Complex64::new(0.0, -0.5)),
            (-k, Complex64::new(0.0, 0.5)),
        ],
        (false, _) => vec![
            (k, Complex64::new(0.5, 0.0)),
            (-k, Complex64::new(0.5, 0.0)),
        ],
    }
}

impl HarmonicData {
    pub fn new(kind: HarmonicKind, m: u32, l: u32, amplitude: f64) -> Result<Self> {
        let (sx, sy) = kind.parts();
        if (m == 0 && l == 0) || (sx && m == 0) || (sy && l == 0) {
            return Err(Error::Config(format!(
                "{}({m},{l}) is constant and not admissible data",
                kind.tag()
            )));
        }
        if !(amplitude.is_finite() && amplitude != 0.0) {
            return Err(Error::Config(
                "harmonic amplitude must be finite and nonzero".into(),
            ));
        }
        Ok(Self {
            kind,
            m,
            l,
            amplitude,
        })
    }

    pub fn sinsin(m: u32, l: u32) -> Self {
        Self::new(HarmonicKind::SinSin, m, l, 1.0).expect("sin(Mx)sin(Ly) with M, L >= 1")
    }

    /// Parses "kind:M,L" or "kind:M,L,amplitude".
    pub fn parse(spec: &str) -> Result<Self> {
        let (kind, rest) = spec
            .split_once(':')
            .ok_or_else(|| Error::Config(format!("harmonic spec {spec:?} lacks ':'")))?;
        let kind = match kind.trim() {
            "sinsin" => HarmonicKind::SinSin,
            "sincos" => HarmonicKind::SinCos,
            "cossin" => HarmonicKind::CosSin,
            "coscos" => HarmonicKind::CosCos,
            k => return Err(Error::Config(format!("unknown harmonic kind {k:?}"))),
        };
        let nums: Vec<&str> = rest.split(',').map(str::trim).collect();
        if nums.len() < 2 || nums.len() > 3 {
            return Err(Error::Config(format!(
                "harmonic spec {spec:?} needs M,L[,amplitude]"
            )));
        }
        let bad = || Error::Config(format!("bad number in {spec:?}"));
        let m = nums[0].parse().map_err(|_| bad())?;
        let l = nums[1].parse().map_err(|_| bad())?;
        let a = if nums.len() == 3 {
            nums[2].parse().map_err(|_| bad())?
        } else {
            1.0
        };
        Self::new(kind, m, l, a)
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        let (sx, sy) = self.kind.parts();
        self.amplitude * factor(sx, self.m, x).0 * factor(sy, self.l, y).0
    }

    #[inline]
    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        let (sx, sy) = self.kind.parts();
        let (fx, dfx) = factor(sx, self.m, x);
        let (fy, dfy) = factor(sy, self.l, y);
        (self.amplitude * dfx * fy, self.amplitude * fx * dfy)
    }

    pub fn modes(&self) -> Vec<(i64, i64, Complex64)> {
        let (sx, sy) = self.kind.parts();
        let mut out = Vec::new();
        for (kx, cx) in factor_modes(sx, self.m) {
            for (ky, cy) in factor_modes(sy, self.l) {
                out.push((kx, ky, cx * cy * self.amplitude));
            }
        }
        out
    }

    pub fn l2(&self) -> f64 {
        let s: f64 = self.modes().iter().map(|m| m.2.norm_sqr()).sum();
        TAU * s.sqrt()
    }
}

/// Initial data: a closed-form harmonic or a sparse trigonometric polynomial.
#[derive(Debug, Clone, PartialEq)]
pub enum InitialData {
    Harmonic(HarmonicData),
    Modes(Vec<(i64, i64, Complex64)>),
}

impl InitialData {
    /// Sparse data from a field, keeping coefficients above `tol`.
    pub fn from_field(f: &SpectralField, tol: f64) -> Self {
        InitialData::Modes(f.modes(tol))
    }

    /// Sum of several data sets, merged into one mode list.
    pub fn sum(parts: &[InitialData]) -> Self {
        let mut acc: BTreeMap<(i64, i64), Complex64> = BTreeMap::new();
        for p in parts {
            for (kx, ky, c) in p.modes() {
                *acc.entry((kx, ky)).or_default() += c;
            }
        }
        InitialData::Modes(
            acc.into_iter()
                .filter(|(_, c)| c.norm() > 0.0)
                .map(|((a, b), c)| (a, b, c))
                .collect(),
        )
    }

    /// Parse a '+'-separated list of harmonic specs, e.g. "sinsin:1,1+sinsin:3,2,0.5".
    pub fn parse_harmonics(spec: &str) -> Result<Self> {
        let parts: Vec<InitialData> = spec
            .split('+')
            .map(|s| HarmonicData::parse(s).map(InitialData::Harmonic))
            .collect::<Result<_>>()?;
        Ok(if parts.len() == 1 {
            parts[0].clone()
        } else {
            Self::sum(&parts)
        })
    }

    pub fn modes(&self) -> Vec<(i64, i64, Complex64)> {
        match self {
            InitialData::Harmonic(h) => h.modes(),
            InitialData::Modes(m) => m.clone(),
        }
    }

    pub fn mean(&self) -> f64 {
        self.modes()
            .iter()
            .filter(|m| m.0 == 0 && m.1 == 0)
            .map(|m| m.2.re)
            .sum()
    }

    pub fn l2(&self) -> f64 {
        match self {
            InitialData::Harmonic(h) => h.l2(),
            InitialData::Modes(m) => TAU * m.iter().map(|c| c.2.norm_sqr()).sum::<f64>().sqrt(),
        }
    }

    #[inline]
    pub fn eval(&self, x: f64, y: f64) -> f64 {
        match self {
            InitialData::Harmonic(h) => h.eval(x, y),
            InitialData::Modes(m) => m
                .iter()
                .map(|&(kx, ky, c)| {
                    let ph = kx as f64 * x + ky as f64 * y;
                    c.re * ph.cos() - c.im * ph.sin()
                })
                .sum(),
        }
    }

    #[inline]
    pub fn grad(&self, x: f64, y: f64) -> (f64, f64) {
        match self {
            InitialData::Harmonic(h) => h.grad(x, y),
            InitialData::Modes(m) => {
                let (mut gx, mut gy) = (0.0, 0.0);
                for &(kx, ky, c) in m {
                    let ph = kx as f64 * x + ky as f64 * y;
                    // d/dθ Re(c e^{iφ}) = −Re(c) sin φ − Im(c) cos φ
                    let d = -c.re * ph.sin() - c.im * ph.cos();
                    gx += kx as f64 * d;
                    gy += ky as f64 * d;
                }
                (gx, gy)
            }
        }
    }

    /// Spectral field on `layout` holding exactly these modes.
    pub fn to_field(&self, layout: Layout) -> Result<SpectralField> {
        SpectralField::from_modes(layout, &self.modes())
    }

    /// Largest |k| component, used in resolution estimates.
    pub fn max_wavenumber(&self) -> f64 {
        self.modes()
            .iter()
            .map(|m| m.0.abs().max(m.1.abs()) as f64)
            .fold(0.0, f64::max)
    }

    pub fn require_mean_zero(&self) -> Result<()> {
        let l2 = self.l2();
        if l2 == 0.0 {
            return Err(Error::Config("initial data is identically zero".into()));
        }
        if self.mean().abs() > 1e-12 * l2 {
            return Err(Error::Config(format!(
                "initial data has nonzero mean {}",
                self.mean()
            )));
        }
        Ok(())
    }
}

/// Index in `schedule.stages` of the stage labelled `j`, or of the last stage
/// with a smaller label when `j` is past the end.
fn prefix_len(schedule: &StageSchedule, j: u32) -> usize {
    match schedule.stages.iter().position(|s| s.j == j) {
        Some(p) => p + 1,
        None => schedule.stages.iter().filter(|s| s.j <= j).count(),
    }
}

#[inline]
fn pull_one(stage: &Stage, x: f64, y: f64) -> (f64, f64) {
    if !stage.active || stage.duration == 0.0 {
        return (x, y);
    }
    let p = stage.profile();
    match stage.direction {
        Direction::Horizontal => (x - stage.shift(&p, stage.duration, y), y),
        Direction::Vertical => (x, y - stage.shift(&p, stage.duration, x)),
    }
}

/// Composite backward map of stages `0..=j`: the latest stage is applied
/// first and the earliest last.
pub fn backward_map(schedule: &StageSchedule, j: u32, x: f64, y: f64) -> (f64, f64) {
    let n = prefix_len(schedule, j);
    schedule.stages[..n]
        .iter()
        .rev()
        .fold((x, y), |(x, y), s| pull_one(s, x, y))
}

/// Backward map together with its Jacobian matrix [[∂x'/∂x, ∂x'/∂y], [∂y'/∂x, ∂y'/∂y]].
pub fn backward_map_jacobian(
    schedule: &StageSchedule,
    j: u32,
    x: f64,
    y: f64,
) -> ((f64, f64), [[f64; 2]; 2]) {
    let n = prefix_len(schedule, j);
    let (mut x, mut y) = (x, y);
    let mut m = [[1.0, 0.0], [0.0, 1.0]];
    for s in schedule.stages[..n].iter().rev() {
        if !s.active || s.duration == 0.0 {
            continue;
        }
        let p = s.profile();
        let nf = s.frequency as f64;
        let c = s.sigma() * s.duration * nf;
        match s.direction {
            Direction::Horizontal => {
                let d = -c * p.eval_d1(nf * y);
                x -= s.shift(&p, s.duration, y);
                m[0][0] += d * m[1][0];
                m[0][1] += d * m[1][1];
            }
            Direction::Vertical => {
                let d = -c * p.eval_d1(nf * x);
                y -= s.shift(&p, s.duration, x);
                m[1][0] += d * m[0][0];
                m[1][1] += d * m[0][1];
            }
        }
    }
    ((x, y), m)
}

/// θ_j(x, y) = θ_0(U_j(x, y)).
pub fn evaluate(theta0: &InitialData, schedule: &StageSchedule, j: u32, x: f64, y: f64) -> f64 {
    let (u, v) = backward_map(schedule, j, x, y);
    theta0.eval(u, v)
}

/// ∇θ_j by the chain rule.
pub fn gradient(
    theta0: &InitialData,
    schedule: &StageSchedule,
    j: u32,
    x: f64,
    y: f64,
) -> (f64, f64) {
    let ((u, v), m) = backward_map_jacobian(schedule, j, x, y);
    let (gx, gy) = theta0.grad(u, v);
    (m[0][0] * gx + m[1][0] * gy, m[0][1] * gx + m[1][1] * gy)
}

/// Frequency estimate max(M, L) · Π (1 + t_i N_i) over the first `j` stages.
pub fn frequency_estimate(theta0: &InitialData, schedule: &StageSchedule, j: u32) -> f64 {
    let n = prefix_len(schedule, j);
    schedule.stages[..n]
        .iter()
        .filter(|s| s.active)
        .fold(theta0.max_wavenumber(), |acc, s| {
            acc * (1.0 + s.duration * s.frequency as f64)
        })
}

#[derive(Debug, Clone)]
pub struct Sampled {
    pub field: SpectralField,
    pub estimate: f64,
    pub resolved: bool,
}

/// Samples θ_j on the layout's grid and transforms to coefficients.
pub fn sample_grid(
    theta0: &InitialData,
    schedule: &StageSchedule,
    j: u32,
    layout: Layout,
    strict: bool,
) -> Result<Sampled> {
    theta0.require_mean_zero()?;
    let estimate = frequency_estimate(theta0, schedule, j);
    let nyquist = (layout.nx.min(layout.ny) / 2) as f64;
    let resolved = estimate < nyquist;
    if !resolved && strict {
        return Err(Error::Resolution(format!(
            "stage {j}: frequency estimate {estimate:.0} exceeds Nyquist {nyquist}"
        )));
    }
    let hx = TAU / layout.nx as f64;
    let hy = TAU / layout.ny as f64;
    let field = SpectralField::from_index_sampler(layout, |a, b| {
        evaluate(theta0, schedule, j, hx * a as f64, hy * b as f64)
    });
    let l2 = field.l2();
    if field.mean().abs() > 1e-12 * l2.max(1.0) {
        return Err(Error::Numerical(format!(
            "sampled field has mean {}",
            field.mean()
        )));
    }
    Ok(Sampled {
        field,
        estimate,
        resolved,
    })
}

/// Directional L² norms (|∂_xθ_j|, |∂_yθ_j|) by the midpoint rule on an
/// `n × n` grid of chain-rule gradients. Useful when θ_j is far too rough
/// for a spectral grid.
pub fn gradient_norms_quadrature(
    theta0: &InitialData,
    schedule: &StageSchedule,
    j: u32,
    n: usize,
) -> (f64, f64) {
    let h = TAU / n as f64;
    // irrational offsets keep sample points off the kink lines
    let ox = 0.5 * (5f64.sqrt() - 1.0);
    let oy = 2f64.sqrt() - 1.0;
    let mut sx = Vec::with_capacity(n);
    let mut sy = Vec::with_capacity(n);
    for a in 0..n {
        let x = h * (a as f64 + ox);
        let (mut rx, mut ry) = (0.0, 0.0);
        for b in 0..n {
            let (gx, gy) = gradient(theta0, schedule, j, x, h * (b as f64 + oy));
            rx += gx * gx;
            ry += gy * gy;
        }
        sx.push(rx);
        sy.push(ry);
    }
    let w = h * h;
    ((w * pairwise_sum(sx)).sqrt(), (w * pairwise_sum(sy)).sqrt())
}

/// Maximum of |∇θ_j| over an `n × n` offset grid; a lower bound for the sup.
pub fn gradient_sup(theta0: &InitialData, schedule: &StageSchedule, j: u32, n: usize) -> f64 {
    let h = TAU / n as f64;
    let mut best: f64 = 0.0;
    for a in 0..n {
        for b in 0..n {
            let (gx, gy) = gradient(
                theta0,
                schedule,
                j,
                h * (a as f64 + 0.37),
                h * (b as f64 + 0.61),
            );
            best = best.max(gx.hypot(gy));
        }
    }
    best
}

#[derive(Debug, Clone, Copy)]
pub struct TraceConfig {
    /// Effective grid for the spectral L² quantities.
    pub nx: usize,
    pub ny: usize,
    /// Side of the grid used for gradient quadrature and W^{1,∞} maxima.
    pub dense: usize,
    pub strict: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapRecord {
    pub j: u32,
    /// |∂_{g_j}θ_j| / |∂_{g_{j+1}}θ_{j+1}|, where g_j is the coordinate stage j
    /// shears along; absent for the last stage.
    pub a: Option<f64>,
    /// |θ_j|_{Ẇ^{1,∞}} / |∂_{g_j}θ_j|.
    pub r: f64,
    /// |θ_j|_{Ḣ¹} by gradient quadrature.
    pub h1: f64,
    /// |θ_j|_{Ḣ²} of the grid samples; a grid-dependent value once θ_j has kinks.
    pub h2: f64,
    pub w1inf: f64,
    /// |∂_{g_j}θ_j|.
    pub directional: f64,
    pub l2: f64,
    pub hneg1: f64,
    pub duration: f64,
    pub frequency: u64,
    pub direction: Direction,
    pub sign: u8,
    pub time: f64,
    pub resolved: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BootstrapTrace {
    pub records: Vec<BootstrapRecord>,
    pub h1_initial: f64,
    pub l2_initial: f64,
}

/// The derivative a stage amplifies.
pub fn growth_axis(direction: Direction) -> Axis {
    match direction {
        Direction::Horizontal => Axis::Y,
        Direction::Vertical => Axis::X,
    }
}

/// Runs the inviscid evolution from stage J(α)−1 (still θ_0) to j_max and
/// records the bootstrap quantities per stage.
pub fn bootstrap_trace(
    theta0: &InitialData,
    schedule: &StageSchedule,
    cfg: &TraceConfig,
) -> Result<BootstrapTrace> {
    theta0.require_mean_zero()?;
    let first = schedule.j_alpha.saturating_sub(1);
    let modes: Vec<(i64, i64)> = theta0.modes().iter().map(|m| (m.0, m.1)).collect();
    let layout = Layout::for_program(cfg.nx, cfg.ny, schedule, modes)?;
    let mut records: Vec<BootstrapRecord> = Vec::new();
    let field0 = theta0.to_field(layout.clone())?;
    for st in schedule.stages.iter().filter(|s| s.j >= first) {
        let j = st.j;
        let sampled = sample_grid(theta0, schedule, j, layout.clone(), cfg.strict)?;
        let f = &sampled.field;
        // Sharp kinks alias on any grid, so derivative norms come from the
        // chain-rule gradient rather than from the sampled coefficients.
        let (gx, gy) = gradient_norms_quadrature(theta0, schedule, j, cfg.dense);
        let directional = match growth_axis(st.direction) {
            Axis::X => gx,
            Axis::Y => gy,
        };
        let w1inf = gradient_sup(theta0, schedule, j, cfg.dense);
        if let Some(prev) = records.last_mut() {
            prev.a = Some(prev.directional / directional);
        }
        records.push(BootstrapRecord {
            j,
            a: None,
            r: w1inf / directional,
            h1: gx.hypot(gy),
            h2: f.sobolev(2.0)?,
            w1inf,
            directional,
            l2: f.l2(),
            hneg1: f.sobolev(-1.0)?,
            duration: st.duration,
            frequency: st.frequency,
            direction: st.direction,
            sign: st.sign,
            time: st.end_time(),
            resolved: sampled.resolved,
        });
    }
    for r in &records {
        let finite = [r.r, r.h1, r.h2, r.w1inf].iter().all(|v| v.is_finite())
            && r.a.is_none_or(f64::is_finite);
        if !finite {
            return Err(Error::Numerical(format!(
                "non-finite bootstrap entry at stage {}",
                r.j
            )));
        }
    }
    Ok(BootstrapTrace {
        records,
        h1_initial: field0.sobolev(1.0)?,
        l2_initial: field0.l2(),
    })
}

impl BootstrapTrace {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("j,A_j,R_j,H1,H2,W1inf,t_j,N_j,direction,sign,time,resolved\n");
        for r in &self.records {
            let a = r.a.map(|v| format!("{v:.12e}")).unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{},{:.12e},{:.12e},{:.12e},{:.12e},{:?},{},{},{},{:?},{}",
                r.j,
                a,
                r.r,
                r.h1,
                r.h2,
                r.w1inf,
                r.duration,
                r.frequency,
                if r.direction == Direction::Horizontal {
                    "h"
                } else {
                    "v"
                },
                r.sign,
                r.time,
                u8::from(r.resolved)
            );
        }
        s
    }

    /// The record of the stage preceding the first active one.
    pub fn first(&self) -> Option<&BootstrapRecord> {
        self.records.first()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sch() -> StageSchedule {
        StageSchedule::build_universal(0.5, 6).unwrap()
    }

    #[test]
    fn harmonic_modes_reproduce_values() {
        for kind in [
            HarmonicKind::SinSin,
            HarmonicKind::SinCos,
            HarmonicKind::CosSin,
            HarmonicKind::CosCos,
        ] {
            let h = HarmonicData::new(kind, 2, 3, 0.7).unwrap();
            let d = InitialData::Modes(h.modes());
            for &(x, y) in &[(0.3, 1.1), (2.0, -0.4), (5.5, 4.4)] {
                assert!((h.eval(x, y) - d.eval(x, y)).abs() < 1e-14);
                let (a, b) = h.grad(x, y);
                let (c, e) = d.grad(x, y);
                assert!((a - c).abs() < 1e-13 && (b - e).abs() < 1e-13);
            }
        }
        assert!(HarmonicData::new(HarmonicKind::SinSin, 0, 3, 1.0).is_err());
        assert!(HarmonicData::new(HarmonicKind::CosCos, 0, 0, 1.0).is_err());
        assert!(HarmonicData::new(HarmonicKind::CosCos, 0, 2, 1.0).is_ok());
    }

    #[test]
    fn identity_stages_leave_points() {
        let s = sch();
        assert_eq!(backward_map(&s, 2, 0.3, 0.4), (0.3, 0.4));
    }

    #[test]
    fn single_stage_map() {
        let s = StageSchedule::build_universal(0.5, 4).unwrap();
        let st = s.stage(3).unwrap().clone();
        let (x, y) = (0.9, 2.3);
        let p = st.profile();
        let (u, v) = backward_map(&s, 3, x, y);
        assert_eq!(u, x);
        assert_eq!(v, y - 0.125 * p.eval(32.0 * x));
        // flipped sign gives the forward-shift form
        let mut f = s.clone();
        for stage in &mut f.stages {
            stage.sign = 1;
        }
        assert_eq!(backward_map(&f, 3, x, y).1, y + 0.125 * p.eval(32.0 * x));
    }

    #[test]
    fn composition_with_sin_factor() {
        let s = StageSchedule::build_universal(0.5, 4).unwrap();
        let th = InitialData::Harmonic(HarmonicData::sinsin(1, 1));
        let p = s.stage(3).unwrap().profile();
        for &(x, y) in &[(0.2f64, 0.3f64), (1.7, 5.1)] {
            let expect = x.sin() * (y - 0.125 * p.eval(32.0 * x)).sin();
            assert!((evaluate(&th, &s, 3, x, y) - expect).abs() < 1e-15);
        }
    }

    #[test]
    fn jacobian_has_unit_determinant() {
        let s = sch();
        let ((_, _), m) = backward_map_jacobian(&s, 6, 1.234, 0.567);
        let det = m[0][0] * m[1][1] - m[0][1] * m[1][0];
        assert!((det - 1.0).abs() < 1e-9);
    }

    #[test]
    fn sample_grid_initial_has_four_modes() {
        let s = sch();
        let th = InitialData::Harmonic(HarmonicData::sinsin(1, 1));
        let f = sample_grid(&th, &s, 0, Layout::plain(64, 64).unwrap(), false)
            .unwrap()
            .field;
        assert_eq!(f.modes(1e-12).len(), 4);
        assert!((f.coeff(1, 1).re + 0.25).abs() < 1e-14);
    }
}
