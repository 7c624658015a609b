//! Finite-difference validation solver: central differences with RK4 for
//! advection, Crank–Nicolson ADI for diffusion, Strang-composed.

use std::f64::consts::{FRAC_PI_2, TAU};
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::field::{pairwise_sum, Layout, SpectralField};
use crate::inviscid::InitialData;
use crate::program::{Direction, Stage, StageSchedule};
use crate::viscous::{DissipationLedger, LedgerEntry};

/// Real samples on the uniform periodic grid, x-major (`values[a*ny + b]`).
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    pub nx: usize,
    pub ny: usize,
    pub values: Vec<f64>,
    /// Mean at construction; the schemes conserve it.
    pub mean: f64,
}

impl GridField {
    pub fn new(nx: usize, ny: usize, values: Vec<f64>) -> Result<Self> {
        if nx < 4 || ny < 4 || values.len() != nx * ny {
            return Err(Error::Config(format!(
                "grid {nx}x{ny} does not match {} samples",
                values.len()
            )));
        }
        let mean = pairwise_sum(values.clone()) / values.len() as f64;
        Ok(Self {
            nx,
            ny,
            values,
            mean,
        })
    }

    pub fn sample(nx: usize, ny: usize, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        let (hx, hy) = (TAU / nx as f64, TAU / ny as f64);
        let mut v = Vec::with_capacity(nx * ny);
        for a in 0..nx {
            for b in 0..ny {
                v.push(f(hx * a as f64, hy * b as f64));
            }
        }
        Self::new(nx, ny, v)
    }

    pub fn from_initial(theta0: &InitialData, n: usize) -> Result<Self> {
        Self::sample(n, n, |x, y| theta0.eval(x, y))
    }

    #[inline]
    fn at(&self, a: usize, b: usize) -> f64 {
        self.values[(a % self.nx) * self.ny + b % self.ny]
    }

    pub fn l2(&self) -> f64 {
        let w = TAU * TAU / (self.nx * self.ny) as f64;
        (w * pairwise_sum(self.values.iter().map(|v| v * v).collect())).sqrt()
    }

    pub fn current_mean(&self) -> f64 {
        pairwise_sum(self.values.clone()) / self.values.len() as f64
    }

    /// ∫|∇_h θ|² with central differences.
    pub fn grad_sq(&self) -> f64 {
        let (nx, ny) = (self.nx, self.ny);
        let (hx, hy) = (TAU / nx as f64, TAU / ny as f64);
        let mut rows = Vec::with_capacity(nx);
        for a in 0..nx {
            let mut s = 0.0;
            for b in 0..ny {
                let gx = (self.at(a + 1, b) - self.at(a + nx - 1, b)) / (2.0 * hx);
                let gy = (self.at(a, b + 1) - self.at(a, b + ny - 1)) / (2.0 * hy);
                s += gx * gx + gy * gy;
            }
            rows.push(s);
        }
        hx * hy * pairwise_sum(rows)
    }

    pub fn to_spectral(&self) -> Result<SpectralField> {
        SpectralField::from_grid(Layout::plain(self.nx, self.ny)?, &self.values)
    }

    /// Samples at the points of a grid coarser by `factor` in each direction.
    pub fn restrict(&self, factor: usize) -> Result<Self> {
        if factor == 0 || !self.nx.is_multiple_of(factor) || !self.ny.is_multiple_of(factor) {
            return Err(Error::Config(format!(
                "cannot restrict {}x{} by {factor}",
                self.nx, self.ny
            )));
        }
        let (nx, ny) = (self.nx / factor, self.ny / factor);
        let mut v = Vec::with_capacity(nx * ny);
        for a in 0..nx {
            for b in 0..ny {
                v.push(self.at(a * factor, b * factor));
            }
        }
        Ok(Self {
            nx,
            ny,
            values: v,
            mean: self.mean,
        })
    }

    pub fn distance_l2(&self, other: &Self) -> Result<f64> {
        if self.nx != other.nx || self.ny != other.ny {
            return Err(Error::Config("grid sizes differ".into()));
        }
        let w = TAU * TAU / (self.nx * self.ny) as f64;
        let d: Vec<f64> = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b) * (a - b))
            .collect();
        Ok((w * pairwise_sum(d)).sqrt())
    }
}

/// Constant-coefficient periodic tridiagonal system (1+2r)x_i − r(x_{i−1}+x_{i+1}) = d_i,
/// factored once and solved by Thomas plus a Sherman–Morrison correction.
#[derive(Debug, Clone)]
struct Cyclic {
    r: f64,
    cp: Vec<f64>,
    inv: Vec<f64>,
    z: Vec<f64>,
    gamma: f64,
    zfac: f64,
}

impl Cyclic {
    fn new(n: usize, r: f64) -> Self {
        let diag = 1.0 + 2.0 * r;
        let (lo, up) = (-r, -r);
        let gamma = -diag;
        let mut bb = vec![diag; n];
        bb[0] = diag - gamma;
        bb[n - 1] = diag - lo * up / gamma;
        let mut cp = vec![0.0; n];
        let mut inv = vec![0.0; n];
        inv[0] = 1.0 / bb[0];
        cp[0] = up * inv[0];
        for i in 1..n {
            inv[i] = 1.0 / (bb[i] - lo * cp[i - 1]);
            cp[i] = up * inv[i];
        }
        let mut me = Self {
            r,
            cp,
            inv,
            z: vec![0.0; n],
            gamma,
            zfac: 0.0,
        };
        let mut u = vec![0.0; n];
        u[0] = gamma;
        u[n - 1] = up;
        me.thomas(&mut u);
        me.zfac = 1.0 + u[0] + lo * u[n - 1] / gamma;
        me.z = u;
        me
    }

    fn thomas(&self, d: &mut [f64]) {
        let n = d.len();
        let lo = -self.r;
        d[0] *= self.inv[0];
        for i in 1..n {
            d[i] = (d[i] - lo * d[i - 1]) * self.inv[i];
        }
        for i in (0..n - 1).rev() {
            d[i] -= self.cp[i] * d[i + 1];
        }
    }

    fn solve(&self, d: &mut [f64]) {
        self.thomas(d);
        let n = d.len();
        let f = (d[0] + (-self.r) * d[n - 1] / self.gamma) / self.zfac;
        for (x, z) in d.iter_mut().zip(&self.z) {
            *x -= f * z;
        }
    }
}

/// Crank–Nicolson over `tau` in x then in y.
fn diffuse(f: &mut GridField, kappa: f64, tau: f64) {
    if kappa == 0.0 || tau == 0.0 {
        return;
    }
    let (nx, ny) = (f.nx, f.ny);
    let rx = kappa * tau / 2.0 / (TAU / nx as f64).powi(2);
    let ry = kappa * tau / 2.0 / (TAU / ny as f64).powi(2);
    let sx = Cyclic::new(nx, rx);
    let sy = Cyclic::new(ny, ry);
    let mut line = vec![0.0; nx];
    for b in 0..ny {
        for (a, out) in line.iter_mut().enumerate() {
            let l = f.values[((a + nx - 1) % nx) * ny + b];
            let c = f.values[a * ny + b];
            let r = f.values[((a + 1) % nx) * ny + b];
            *out = c + rx * (l - 2.0 * c + r);
        }
        sx.solve(&mut line);
        for (a, &v) in line.iter().enumerate() {
            f.values[a * ny + b] = v;
        }
    }
    let mut line = vec![0.0; ny];
    for a in 0..nx {
        let row = &mut f.values[a * ny..(a + 1) * ny];
        for b in 0..ny {
            line[b] = row[b] + ry * (row[(b + ny - 1) % ny] - 2.0 * row[b] + row[(b + 1) % ny]);
        }
        sy.solve(&mut line);
        row.copy_from_slice(&line);
    }
}

/// −u·∇_h θ with central differences for a steady shear.
fn advection_rhs(f: &GridField, vel: &[f64], dir: Direction, out: &mut [f64]) {
    let (nx, ny) = (f.nx, f.ny);
    match dir {
        Direction::Horizontal => {
            let c = 1.0 / (2.0 * TAU / nx as f64);
            for a in 0..nx {
                let (p, m) = ((a + 1) % nx, (a + nx - 1) % nx);
                for b in 0..ny {
                    out[a * ny + b] = -vel[b] * c * (f.values[p * ny + b] - f.values[m * ny + b]);
                }
            }
        }
        Direction::Vertical => {
            let c = 1.0 / (2.0 * TAU / ny as f64);
            for a in 0..nx {
                let row = &f.values[a * ny..(a + 1) * ny];
                for b in 0..ny {
                    out[a * ny + b] = -vel[a] * c * (row[(b + 1) % ny] - row[(b + ny - 1) % ny]);
                }
            }
        }
    }
}

fn stage_velocity(stage: &Stage, n: usize) -> Vec<f64> {
    let p = stage.profile();
    let h = TAU / n as f64;
    (0..n)
        .map(|i| stage.sigma() * p.eval(stage.frequency as f64 * h * i as f64))
        .collect()
}

fn advect(f: &mut GridField, stage: &Stage, dt: f64) {
    if !stage.active {
        return;
    }
    let n = match stage.direction {
        Direction::Horizontal => f.ny,
        Direction::Vertical => f.nx,
    };
    let vel = stage_velocity(stage, n);
    let len = f.values.len();
    let mut k = [
        vec![0.0; len],
        vec![0.0; len],
        vec![0.0; len],
        vec![0.0; len],
    ];
    let base = f.values.clone();
    let mut tmp = f.clone();
    for s in 0..4 {
        let (done, rest) = k.split_at_mut(s);
        if let Some(prev) = done.last() {
            let c = if s == 3 { dt } else { 0.5 * dt };
            for i in 0..len {
                tmp.values[i] = base[i] + c * prev[i];
            }
        }
        advection_rhs(
            if s == 0 { f } else { &tmp },
            &vel,
            stage.direction,
            &mut rest[0],
        );
    }
    for i in 0..len {
        f.values[i] = base[i] + dt / 6.0 * (k[0][i] + 2.0 * k[1][i] + 2.0 * k[2][i] + k[3][i]);
    }
}

fn check_cfl(f: &GridField, dt: f64) -> Result<()> {
    let h = TAU / f.nx.max(f.ny) as f64;
    let c = dt * FRAC_PI_2 / h;
    if c > 0.5 {
        return Err(Error::Config(format!("CFL number {c:.3} exceeds 0.5")));
    }
    Ok(())
}

/// One Strang step: half diffusion, advection, half diffusion.
pub fn fd_step(field: &GridField, stage: &Stage, kappa: f64, dt: f64) -> Result<GridField> {
    if dt.is_nan() || dt <= 0.0 || kappa < 0.0 {
        return Err(Error::Config("need dt > 0 and kappa >= 0".into()));
    }
    check_cfl(field, dt)?;
    let mut f = field.clone();
    diffuse(&mut f, kappa, 0.5 * dt);
    advect(&mut f, stage, dt);
    diffuse(&mut f, kappa, 0.5 * dt);
    Ok(f)
}

#[derive(Debug, Clone)]
pub struct FdOutput {
    pub field: GridField,
    /// Same schema as the spectral ledger; entries at t = 0 and every stage end.
    pub ledger: DissipationLedger,
}

fn ledger_entry(
    f: &GridField,
    t: f64,
    chi: f64,
    energy0: f64,
    stage_end: Option<u32>,
) -> Result<LedgerEntry> {
    let s = f.to_spectral()?;
    let l2 = f.l2();
    Ok(LedgerEntry {
        t,
        l2,
        h1: s.sobolev(1.0)?,
        h2: s.sobolev(2.0)?,
        hneg1: if s.mean().abs() > 1e-12 {
            f64::NAN
        } else {
            s.sobolev(-1.0)?
        },
        chi,
        residual: (0.5 * l2 * l2 - 0.5 * energy0 + chi).abs() / energy0,
        stage_end,
    })
}

/// Solves along the schedule with steps of at most `cfl·h/(π/2)`.
pub fn run_fd(
    theta0: &GridField,
    schedule: &StageSchedule,
    kappa: f64,
    cfl: f64,
) -> Result<FdOutput> {
    if !(cfl > 0.0 && cfl <= 0.5) {
        return Err(Error::Config(format!(
            "cfl must lie in (0, 0.5], got {cfl}"
        )));
    }
    if schedule.stages.len() > 8 || theta0.nx.max(theta0.ny) > 1024 {
        return Err(Error::Config(
            "the finite-difference oracle is for small validation runs".into(),
        ));
    }
    let h = TAU / theta0.nx.max(theta0.ny) as f64;
    let dt_max = cfl * h / FRAC_PI_2;
    let l0 = theta0.l2();
    let energy0 = l0 * l0;
    let mut f = theta0.clone();
    let mut entries = vec![ledger_entry(&f, 0.0, 0.0, energy0, None)?];
    let mut chi = 0.0;
    let mut rate = kappa * f.grad_sq();
    for st in &schedule.stages {
        if st.duration == 0.0 {
            continue;
        }
        let steps = (st.duration / dt_max).ceil().max(1.0) as usize;
        let dt = st.duration / steps as f64;
        for _ in 0..steps {
            f = fd_step(&f, st, kappa, dt)?;
            let next = kappa * f.grad_sq();
            chi += 0.5 * dt * (rate + next);
            rate = next;
        }
        if !f.values.iter().all(|v| v.is_finite()) {
            return Err(Error::Numerical(format!(
                "non-finite value after stage {}",
                st.j
            )));
        }
        entries.push(ledger_entry(&f, st.end_time(), chi, energy0, Some(st.j))?);
    }
    Ok(FdOutput {
        field: f,
        ledger: DissipationLedger {
            kappa,
            energy0,
            entries,
        },
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub n: usize,
    pub chi: f64,
    pub l2: f64,
    /// L² distance on the coarsest grid's points to the next finer solution.
    pub diff_to_finer: Option<f64>,
    /// L² error on the coarsest grid's points against the extrapolated reference.
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceTable {
    pub rows: Vec<ConvergenceRow>,
    /// log2 of successive differences.
    pub order: f64,
    pub chi_extrapolated: f64,
    pub chi_order: f64,
    /// Extrapolated reference on the coarsest grid.
    pub reference: GridField,
}

impl ConvergenceTable {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("n,chi,l2,diff_to_finer,error\n");
        for r in &self.rows {
            let d = r
                .diff_to_finer
                .map(|v| format!("{v:.12e}"))
                .unwrap_or_default();
            let _ = writeln!(
                s,
                "{},{:.12e},{:.12e},{},{:.12e}",
                r.n, r.chi, r.l2, d, r.error
            );
        }
        let _ = writeln!(s, "# order,{:.6}", self.order);
        let _ = writeln!(s, "# chi_extrapolated,{:.12e}", self.chi_extrapolated);
        s
    }
}

/// Runs the oracle on three nested grids and Richardson-extrapolates.
pub fn convergence_study(
    theta0: &InitialData,
    schedule: &StageSchedule,
    kappa: f64,
    grids: [usize; 3],
    cfl: f64,
) -> Result<ConvergenceTable> {
    if !(grids[1] == 2 * grids[0] && grids[2] == 2 * grids[1]) {
        return Err(Error::Config(format!(
            "grids {grids:?} are not nested by factors of two"
        )));
    }
    let mut outs = Vec::with_capacity(3);
    for &n in &grids {
        outs.push(run_fd(
            &GridField::from_initial(theta0, n)?,
            schedule,
            kappa,
            cfl,
        )?);
    }
    let coarse: Vec<GridField> = outs
        .iter()
        .zip([1, 2, 4])
        .map(|(o, k)| o.field.restrict(k))
        .collect::<Result<_>>()?;
    let d1 = coarse[0].distance_l2(&coarse[1])?;
    let d2 = coarse[1].distance_l2(&coarse[2])?;
    let order = (d1 / d2).log2();
    let fac = 2f64.powf(order) - 1.0;
    let mut reference = coarse[2].clone();
    for (r, c) in reference.values.iter_mut().zip(&coarse[1].values) {
        *r += (*r - c) / fac;
    }
    let chis: Vec<f64> = outs.iter().map(|o| o.ledger.chi()).collect();
    let (c1, c2) = (chis[0] - chis[1], chis[1] - chis[2]);
    let chi_order = if c1 * c2 > 0.0 { (c1 / c2).log2() } else { 2.0 };
    let chi_extrapolated = chis[2] + c2 / (2f64.powf(chi_order) - 1.0);
    let mut rows = Vec::new();
    for (i, o) in outs.iter().enumerate() {
        rows.push(ConvergenceRow {
            n: grids[i],
            chi: chis[i],
            l2: o.field.l2(),
            diff_to_finer: [Some(d1), Some(d2), None][i],
            error: coarse[i].distance_l2(&reference)?,
        });
    }
    Ok(ConvergenceTable {
        rows,
        order,
        chi_extrapolated,
        chi_order,
        reference,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inviscid::{evaluate, HarmonicData};

    #[test]
    fn cyclic_solver_inverts() {
        let n = 11;
        let r = 0.37;
        let sol = Cyclic::new(n, r);
        let x: Vec<f64> = (0..n)
            .map(|i| (i as f64 * 0.7).sin() + 0.1 * i as f64)
            .collect();
        let mut d: Vec<f64> = (0..n)
            .map(|i| (1.0 + 2.0 * r) * x[i] - r * (x[(i + n - 1) % n] + x[(i + 1) % n]))
            .collect();
        sol.solve(&mut d);
        for i in 0..n {
            assert!((d[i] - x[i]).abs() < 1e-13);
        }
    }

    #[test]
    fn identity_without_flow_or_diffusion() {
        let s = StageSchedule::custom(&[(Direction::Horizontal, 1, 0.1, 1.0, 0)]).unwrap();
        let mut st = s.stages[0].clone();
        st.active = false;
        let f = GridField::sample(16, 16, |x, y| x.sin() * y.cos()).unwrap();
        assert_eq!(fd_step(&f, &st, 0.0, 0.01).unwrap(), f);
        assert!(fd_step(&f, &st, 0.0, 1.0).is_err());
    }

    fn heat_error(n: usize) -> f64 {
        let kappa = 0.1;
        let s = StageSchedule::custom(&[(Direction::Horizontal, 1, 1.0, 1.0, 0)]).unwrap();
        let mut s = s;
        s.stages[0].active = false;
        let th = InitialData::Harmonic(
            HarmonicData::new(crate::inviscid::HarmonicKind::SinSin, 1, 1, 1.0).unwrap(),
        );
        let out = run_fd(&GridField::from_initial(&th, n).unwrap(), &s, kappa, 0.5).unwrap();
        let exact =
            GridField::sample(n, n, |x, y| (-2.0 * kappa).exp() * x.sin() * y.sin()).unwrap();
        out.field.distance_l2(&exact).unwrap()
    }

    #[test]
    fn heat_equation_second_order() {
        let e: Vec<f64> = [16, 32, 64].iter().map(|&n| heat_error(n)).collect();
        for w in e.windows(2) {
            let p = (w[0] / w[1]).log2();
            assert!((1.9..=2.1).contains(&p), "order {p}");
        }
    }

    #[test]
    fn shear_advection_converges() {
        let s = StageSchedule::custom(&[(Direction::Horizontal, 1, 0.5, 1.0, 0)]).unwrap();
        let th = InitialData::Harmonic(HarmonicData::sinsin(1, 1));
        let err = |n: usize| {
            let out = run_fd(&GridField::from_initial(&th, n).unwrap(), &s, 0.0, 0.4).unwrap();
            let exact = GridField::sample(n, n, |x, y| evaluate(&th, &s, 1, x, y)).unwrap();
            out.field.distance_l2(&exact).unwrap()
        };
        let e: Vec<f64> = [64, 128, 256].iter().map(|&n| err(n)).collect();
        assert!(e[0] / e[1] >= 3.5 && e[1] / e[2] >= 3.5, "{e:?}");
    }
}
