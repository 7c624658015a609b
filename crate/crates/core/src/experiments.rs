//! Experiment drivers: configuration, runs across κ, reports and output files.

use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::diagnostics::{
    bootstrap_norm_trace, criterion2_check, criterion3_check, holder_probes, max_increments,
    obukhov_corrsin_bound, oc_exponent, velocity_holder_norm,
};
use crate::error::{Error, Result};
use crate::field::{Layout, SpectralField};
use crate::inviscid::{bootstrap_trace, evaluate, growth_axis, InitialData, TraceConfig};
use crate::oracle::{convergence_study, run_fd, GridField};
use crate::program::{frequency_exponent, Direction, StageSchedule};
use crate::viscous::{run, step_stage, RunOutput, SolverConfig};

/// Everything that determines a run. Written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub experiment: String,
    pub alpha: f64,
    /// Harmonic spec such as "sinsin:1,1" ('+' joins several) or a coefficient file.
    pub theta0: String,
    /// Perturbation sizes ε, as fractions of |θ_0|.
    pub epsilon: Vec<f64>,
    /// Perturbations use wavenumbers with |k_x|, |k_y| ≤ band.
    pub band: u32,
    pub kappa: Vec<f64>,
    pub nx: usize,
    pub ny: usize,
    /// Truncation; defaults to the largest stage the grid guard admits.
    pub j_max: Option<u32>,
    pub substeps: usize,
    pub out: PathBuf,
    pub strict: bool,
    pub seed: u64,
    /// Hölder exponents probed by the Obukhov–Corrsin comparison.
    pub beta: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            experiment: "sweep".into(),
            alpha: 0.5,
            theta0: "sinsin:1,1".into(),
            epsilon: vec![0.0, 0.01],
            band: 2,
            kappa: default_kappas(),
            nx: 1024,
            ny: 1024,
            j_max: None,
            substeps: 64,
            out: PathBuf::from("out"),
            strict: false,
            seed: 0,
            beta: vec![0.25, 0.5, 0.75, 1.0],
        }
    }
}

/// The geometric ladder 1e-2, 3e-3, ..., 1e-5.
pub fn default_kappas() -> Vec<f64> {
    vec![1e-2, 3e-3, 1e-3, 3e-4, 1e-4, 3e-5, 1e-5]
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {}",
                self.alpha
            )));
        }
        if self.kappa.is_empty() || self.kappa.iter().any(|k| !(*k >= 0.0 && k.is_finite())) {
            return Err(Error::Config(
                "kappa list must be nonempty and nonnegative".into(),
            ));
        }
        for n in [self.nx, self.ny] {
            if n < 16 || !n.is_power_of_two() {
                return Err(Error::Config(format!(
                    "grid size {n} must be a power of two >= 16"
                )));
            }
        }
        if self.substeps < 4 {
            return Err(Error::Config("substeps must be at least 4".into()));
        }
        if self.epsilon.iter().any(|e| !(*e >= 0.0 && e.is_finite())) {
            return Err(Error::Config(
                "perturbation sizes must be nonnegative".into(),
            ));
        }
        if self.beta.iter().any(|b| !(*b > 0.0 && *b <= 1.0)) {
            return Err(Error::Config("probe exponents must lie in (0,1]".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("config: {e}")))
    }

    fn theta0_file(&self) -> Option<&Path> {
        let p = Path::new(&self.theta0);
        (!self.theta0.contains(':') || p.is_file()).then_some(p)
    }

    /// sha256 over a git-style blob of the inputs: the config without the
    /// output directory, then the coefficient file bytes if there is one.
    pub fn content_hash(&self) -> Result<String> {
        let mut c = self.clone();
        c.out = PathBuf::new();
        let mut body = c.to_json().into_bytes();
        if let Some(p) = self.theta0_file() {
            body.extend(fs::read(p)?);
        }
        let mut h = Sha256::new();
        h.update(format!("blob {}\0", body.len()).as_bytes());
        h.update(&body);
        Ok(h.finalize().iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        }))
    }

    /// Unperturbed initial data.
    pub fn load_theta0(&self) -> Result<InitialData> {
        let data = match self.theta0_file() {
            Some(p) => {
                let f = SpectralField::load(p)?;
                let l2 = f.l2();
                InitialData::from_field(&f, 1e-14 * l2.max(f64::MIN_POSITIVE))
            }
            None => InitialData::parse_harmonics(&self.theta0)?,
        };
        data.require_mean_zero()?;
        Ok(data)
    }

    /// Largest truncation whose frequencies stay within an eighth of the grid.
    pub fn resolved_j_max(&self) -> u32 {
        if let Some(j) = self.j_max {
            return j;
        }
        let cap = (self.nx.min(self.ny) / 8).trailing_zeros();
        (0..=40)
            .take_while(|&j| frequency_exponent(self.alpha, j) <= cap)
            .last()
            .unwrap_or(0)
    }

    pub fn schedule(&self) -> Result<StageSchedule> {
        StageSchedule::build_universal(self.alpha, self.resolved_j_max())
    }

    fn begin(&self) -> Result<Outputs> {
        self.validate()?;
        let o = Outputs {
            dir: self.out.clone(),
        };
        fs::create_dir_all(&o.dir)?;
        o.write("config.json", &self.to_json())?;
        o.write("hash.txt", &format!("sha256 {}\n", self.content_hash()?))?;
        Ok(o)
    }
}

struct Outputs {
    dir: PathBuf,
}

impl Outputs {
    fn write(&self, name: &str, text: &str) -> Result<()> {
        fs::write(self.dir.join(name), text)?;
        Ok(())
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<()> {
        self.write(
            name,
            &(serde_json::to_string_pretty(value).expect("report serializes") + "\n"),
        )
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.join(name)
    }
}

fn kappa_tag(k: f64) -> String {
    format!("{k:e}")
}

/// Runs `f` for every κ on scoped worker threads and returns the results in
/// input order.
fn fan_out<T: Send>(kappas: &[f64], f: impl Fn(f64) -> T + Sync) -> Vec<T> {
    let workers = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1)
        .min(kappas.len())
        .max(1);
    let mut out: Vec<Option<T>> = (0..kappas.len()).map(|_| None).collect();
    for (chunk_k, chunk_o) in kappas.chunks(workers).zip(out.chunks_mut(workers)) {
        std::thread::scope(|s| {
            let handles: Vec<_> = chunk_k
                .iter()
                .map(|&k| {
                    let f = &f;
                    s.spawn(move || f(k))
                })
                .collect();
            for (slot, h) in chunk_o.iter_mut().zip(handles) {
                *slot = Some(h.join().expect("worker panicked"));
            }
        });
    }
    out.into_iter().map(|v| v.expect("filled")).collect()
}

/// One viscous run on the storage layout the schedule needs.
pub fn viscous_run(
    theta0: &InitialData,
    schedule: &StageSchedule,
    kappa: f64,
    nx: usize,
    ny: usize,
    substeps: usize,
    dump: Option<PathBuf>,
) -> Result<RunOutput> {
    let modes: Vec<(i64, i64)> = theta0.modes().iter().map(|m| (m.0, m.1)).collect();
    let layout = Layout::for_program(nx, ny, schedule, modes)?;
    let f0 = theta0.to_field(layout)?;
    let mut cfg = SolverConfig::new(kappa, substeps, nx, ny);
    cfg.failure_dump = dump;
    run(&f0, schedule, &cfg)
}

/// ½ Σ|c_k|²(2π)²(1 − e^{−2κ|k|²T}): dissipation of pure heat flow.
pub fn heat_dissipation(theta0: &InitialData, kappa: f64, t: f64) -> f64 {
    0.5 * TAU
        * TAU
        * theta0
            .modes()
            .iter()
            .map(|&(kx, ky, c)| {
                let k2 = (kx * kx + ky * ky) as f64;
                c.norm_sqr() * -(-2.0 * kappa * k2 * t).exp_m1()
            })
            .sum::<f64>()
}

/// ∫_0^T |∇θ|² dt for pure heat flow, which stays below T|θ_0|²_{Ḣ¹}.
pub fn heat_gradient_integral(theta0: &InitialData, kappa: f64, t: f64) -> f64 {
    if kappa == 0.0 {
        return t
            * TAU
            * TAU
            * theta0
                .modes()
                .iter()
                .map(|&(kx, ky, c)| (kx * kx + ky * ky) as f64 * c.norm_sqr())
                .sum::<f64>();
    }
    heat_dissipation(theta0, kappa, t) / kappa
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub kappa: f64,
    pub chi: Option<f64>,
    pub chi_fraction: Option<f64>,
    pub residual: Option<f64>,
    pub final_l2: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContrastRow {
    pub kappa: f64,
    pub chi: f64,
    pub closed_form: f64,
    /// χ/κ against the closed form's χ/κ.
    pub slope_error: f64,
    /// χ/κ against T|θ_0|²_{Ḣ¹}, the small-κ slope.
    pub linear_slope_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepReport {
    pub j_max: u32,
    pub energy0: f64,
    pub rows: Vec<SweepRow>,
    pub chi_min: Option<f64>,
    pub chi_max: Option<f64>,
    pub plateau_ratio: Option<f64>,
    pub budget_respected: bool,
    pub contrast: Vec<ContrastRow>,
}

impl SweepReport {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("kappa,chi,chi_over_energy,residual,final_l2,status\n");
        let f = |v: Option<f64>| v.map(|x| format!("{x:.12e}")).unwrap_or_default();
        for r in &self.rows {
            let status = r.error.as_deref().unwrap_or("ok").replace(',', ";");
            let _ = writeln!(
                s,
                "{:e},{},{},{},{},{status}",
                r.kappa,
                f(r.chi),
                f(r.chi_fraction),
                f(r.residual),
                f(r.final_l2)
            );
        }
        s
    }

    fn contrast_csv(&self) -> String {
        let mut s = String::from("kappa,chi,closed_form,slope_error,linear_slope_error\n");
        for r in &self.contrast {
            let _ = writeln!(
                s,
                "{:e},{:.12e},{:.12e},{:.6e},{:.6e}",
                r.kappa, r.chi, r.closed_form, r.slope_error, r.linear_slope_error
            );
        }
        s
    }
}

const SWEEP_GP: &str = "set logscale xy
set xlabel 'kappa'
set ylabel 'chi'
set datafile separator ','
set key autotitle columnhead
plot 'sweep.csv' using 1:2 with linespoints title 'chi', \\
     'contrast.csv' using 1:2 with linespoints title 'u = 0', \\
     'contrast.csv' using 1:3 with lines title 'heat closed form'
";

/// Dissipation across κ for one schedule, plus the u ≡ 0 contrast when `contrast` is set.
fn sweep_with(
    cfg: &RunConfig,
    theta0: &InitialData,
    schedule: &StageSchedule,
    contrast: bool,
    out: Option<&Outputs>,
    prefix: &str,
) -> Result<SweepReport> {
    let l0 = theta0.l2();
    let e0 = l0 * l0;
    let results = fan_out(&cfg.kappa, |k| {
        let dump = out.map(|o| o.path(&format!("{prefix}failure_kappa_{}.bin", kappa_tag(k))));
        viscous_run(theta0, schedule, k, cfg.nx, cfg.ny, cfg.substeps, dump)
    });
    let mut rows = Vec::new();
    for (&k, r) in cfg.kappa.iter().zip(results) {
        match r {
            Ok(o) => {
                if let Some(out) = out {
                    out.write(
                        &format!("{prefix}ledger_kappa_{}.csv", kappa_tag(k)),
                        &o.ledger.to_csv(),
                    )?;
                }
                let chi = o.ledger.chi();
                rows.push(SweepRow {
                    kappa: k,
                    chi: Some(chi),
                    chi_fraction: Some(chi / e0),
                    residual: Some(o.ledger.max_residual()),
                    final_l2: o.ledger.entries.last().map(|e| e.l2),
                    error: None,
                });
            }
            Err(e) => {
                if cfg.strict {
                    return Err(e);
                }
                rows.push(SweepRow {
                    kappa: k,
                    chi: None,
                    chi_fraction: None,
                    residual: None,
                    final_l2: None,
                    error: Some(e.to_string()),
                });
            }
        }
    }
    let chis: Vec<f64> = rows.iter().filter_map(|r| r.chi).collect();
    let chi_min = chis.iter().copied().reduce(f64::min);
    let chi_max = chis.iter().copied().reduce(f64::max);
    let plateau_ratio = chi_min.zip(chi_max).map(|(a, b)| b / a);
    let budget_respected = chis.iter().all(|c| *c <= 0.5 * e0 * (1.0 + 1e-9));
    let mut contrast_rows = Vec::new();
    if contrast {
        let still = schedule.quiescent();
        let t = still.total_time();
        let slope0 = heat_gradient_integral(theta0, 0.0, t);
        let res = fan_out(&cfg.kappa, |k| {
            viscous_run(theta0, &still, k, cfg.nx, cfg.ny, cfg.substeps, None)
        });
        for (&k, r) in cfg.kappa.iter().zip(res) {
            let chi = r?.ledger.chi();
            let closed = heat_dissipation(theta0, k, t);
            contrast_rows.push(ContrastRow {
                kappa: k,
                chi,
                closed_form: closed,
                slope_error: if closed > 0.0 {
                    (chi / closed - 1.0).abs()
                } else {
                    chi.abs()
                },
                linear_slope_error: if k > 0.0 {
                    (chi / k / slope0 - 1.0).abs()
                } else {
                    0.0
                },
            });
        }
    }
    Ok(SweepReport {
        j_max: schedule.j_max,
        energy0: e0,
        rows,
        chi_min,
        chi_max,
        plateau_ratio,
        budget_respected,
        contrast: contrast_rows,
    })
}

/// χ(κ) on the universal schedule with the u ≡ 0 contrast.
pub fn exp_sweep(cfg: &RunConfig) -> Result<SweepReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let schedule = cfg.schedule()?;
    out.write("schedule.txt", &schedule.to_text())?;
    let rep = sweep_with(cfg, &theta0, &schedule, true, Some(&out), "")?;
    out.write("sweep.csv", &rep.to_csv())?;
    out.write("contrast.csv", &rep.contrast_csv())?;
    out.write("sweep.gp", SWEEP_GP)?;
    out.json("report.json", &rep)?;
    Ok(rep)
}

/// Seeded band-limited mean-zero noise with unit L² norm. Coefficients are
/// drawn from ChaCha8 in a fixed mode order (k_x from 0 to band, then k_y
/// from −band to band, upper half plane only, real then imaginary part,
/// each uniform on [−1, 1)); conjugate modes complete a real field.
pub fn band_noise(seed: u64, band: u32) -> Result<InitialData> {
    if band == 0 {
        return Err(Error::Config("perturbation band must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = band as i64;
    let mut modes = Vec::new();
    for kx in 0..=b {
        for ky in -b..=b {
            if kx == 0 && ky <= 0 {
                continue;
            }
            let c = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            modes.push((kx, ky, c));
            modes.push((-kx, -ky, c.conj()));
        }
    }
    let l2 = TAU * modes.iter().map(|m| m.2.norm_sqr()).sum::<f64>().sqrt();
    Ok(InitialData::Modes(
        modes.into_iter().map(|(a, b, c)| (a, b, c / l2)).collect(),
    ))
}

fn inner(a: &InitialData, b: &InitialData) -> f64 {
    let bm: std::collections::BTreeMap<(i64, i64), Complex64> =
        b.modes().into_iter().map(|m| ((m.0, m.1), m.2)).collect();
    TAU * TAU
        * a.modes()
            .iter()
            .filter_map(|m| bm.get(&(m.0, m.1)).map(|c| (m.2 * c.conj()).re))
            .sum::<f64>()
}

fn scaled(d: &InitialData, s: f64) -> InitialData {
    InitialData::Modes(
        d.modes()
            .into_iter()
            .map(|(a, b, c)| (a, b, c * s))
            .collect(),
    )
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Decomposition {
    pub total: f64,
    pub low: f64,
    pub high: f64,
    /// | |θ_0|² − |θ_0^L|² − |θ_0^H|² | / |θ_0|².
    pub defect: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedRow {
    pub epsilon: f64,
    pub kappa: f64,
    pub final_l2: f64,
    pub unperturbed_final_l2: f64,
    pub energy_deficit: f64,
    pub triangle_bound: f64,
    pub triangle_holds: bool,
    pub splitting_bound: f64,
    pub splitting_holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PerturbedReport {
    pub decompositions: Vec<(f64, Decomposition)>,
    pub rows: Vec<PerturbedRow>,
}

/// θ_0 = ψ + ε|ψ|η for each ε, against the unperturbed ψ run. θ_0^L is the
/// projection on ψ; by linearity and L² contraction
/// |θ^κ(T)| ≤ |λ||ψ^κ(T)| + |θ_0^H| where θ_0^L = λψ.
pub fn exp_perturbed(cfg: &RunConfig) -> Result<PerturbedReport> {
    let out = cfg.begin()?;
    let psi = cfg.load_theta0()?;
    let eta = band_noise(cfg.seed, cfg.band)?;
    let schedule = cfg.schedule()?;
    out.write("schedule.txt", &schedule.to_text())?;
    let lpsi = psi.l2();
    let base: Vec<RunOutput> = fan_out(&cfg.kappa, |k| {
        viscous_run(&psi, &schedule, k, cfg.nx, cfg.ny, cfg.substeps, None)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let mut rows = Vec::new();
    let mut decompositions = Vec::new();
    for &eps in &cfg.epsilon {
        let theta0 = InitialData::sum(&[psi.clone(), scaled(&eta, eps * lpsi)]);
        let total = theta0.l2();
        let lambda = inner(&theta0, &psi) / (lpsi * lpsi);
        let low = lambda.abs() * lpsi;
        let high_data = InitialData::sum(&[theta0.clone(), scaled(&psi, -lambda)]);
        let high = high_data.l2();
        decompositions.push((
            eps,
            Decomposition {
                total,
                low,
                high,
                defect: (total * total - low * low - high * high).abs() / (total * total),
            },
        ));
        let runs = fan_out(&cfg.kappa, |k| {
            viscous_run(&theta0, &schedule, k, cfg.nx, cfg.ny, cfg.substeps, None)
        });
        for ((&k, r), b) in cfg.kappa.iter().zip(runs).zip(&base) {
            let o = r?;
            let tag = format!("eps_{}_kappa_{}", kappa_tag(eps), kappa_tag(k));
            out.write(&format!("ledger_{tag}.csv"), &o.ledger.to_csv())?;
            let fl = o.ledger.entries.last().map(|e| e.l2).unwrap_or(total);
            let bl = b.ledger.entries.last().map(|e| e.l2).unwrap_or(lpsi);
            let triangle = bl + 2.0 * eps * total;
            let split = lambda.abs() * bl + high;
            let slack = 1e-9 * total;
            rows.push(PerturbedRow {
                epsilon: eps,
                kappa: k,
                final_l2: fl,
                unperturbed_final_l2: bl,
                energy_deficit: 1.0 - fl * fl / (total * total),
                triangle_bound: triangle,
                triangle_holds: fl <= triangle + slack,
                splitting_bound: split,
                splitting_holds: fl <= split + slack,
            });
        }
    }
    let mut csv = String::from("epsilon,kappa,final_l2,unperturbed_final_l2,energy_deficit,triangle_bound,splitting_bound\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{:e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.epsilon,
            r.kappa,
            r.final_l2,
            r.unperturbed_final_l2,
            r.energy_deficit,
            r.triangle_bound,
            r.splitting_bound
        );
    }
    out.write("perturbed.csv", &csv)?;
    out.write(
        "perturbed.gp",
        "set logscale x\nset xlabel 'kappa'\nset ylabel 'energy deficit'\nset datafile separator ','\nplot 'perturbed.csv' using 2:5 with points title 'deficit'\n",
    )?;
    let rep = PerturbedReport {
        decompositions,
        rows,
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AdaptiveReport {
    pub a0: f64,
    pub signs: Vec<u8>,
    pub first_ratio: f64,
    pub candidates: Vec<(u32, f64, f64)>,
    pub sweep: SweepReport,
}

/// Data-adaptive program, then the κ sweep on it.
pub fn exp_adaptive(cfg: &RunConfig) -> Result<AdaptiveReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let choice =
        StageSchedule::build_adaptive(&theta0, cfg.alpha, cfg.resolved_j_max(), cfg.nx.min(512))?;
    out.write("schedule.txt", &choice.schedule.to_text())?;
    let sweep = sweep_with(cfg, &theta0, &choice.schedule, false, Some(&out), "")?;
    out.write("sweep.csv", &sweep.to_csv())?;
    out.write("sweep.gp", "set logscale xy\nset datafile separator ','\nplot 'sweep.csv' using 1:2 with linespoints title 'chi'\n")?;
    let rep = AdaptiveReport {
        a0: choice.schedule.a0,
        signs: choice.schedule.signs(),
        first_ratio: choice.first_ratio,
        candidates: choice.candidates,
        sweep,
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonuniqRow {
    pub kappa: f64,
    pub energy_ratio: f64,
    pub gap: f64,
    pub heat_gap: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NonuniqReport {
    /// |θ̄(2T) − θ_0|/|θ_0| for the exact forward-then-inverse composition.
    pub reversible_error: f64,
    pub rows: Vec<NonuniqRow>,
    pub gap_min: Option<f64>,
    pub gap_max: Option<f64>,
}

/// The program followed by its time reversal −u(2T − t).
pub fn round_trip(schedule: &StageSchedule) -> StageSchedule {
    schedule.concat(&schedule.reversed())
}

/// Relative L² distance between the exact composition and θ_0 on an n × n grid.
pub fn reversible_error(theta0: &InitialData, trip: &StageSchedule, n: usize) -> f64 {
    let h = TAU / n as f64;
    let (mut num, mut den) = (Vec::with_capacity(n), Vec::with_capacity(n));
    for a in 0..n {
        let (mut s, mut d) = (0.0, 0.0);
        for b in 0..n {
            let (x, y) = (h * a as f64, h * b as f64);
            let v0 = theta0.eval(x, y);
            let v = evaluate(theta0, trip, trip.j_max, x, y);
            s += (v - v0) * (v - v0);
            d += v0 * v0;
        }
        num.push(s);
        den.push(d);
    }
    (crate::field::pairwise_sum(num) / crate::field::pairwise_sum(den)).sqrt()
}

pub fn exp_nonuniq(cfg: &RunConfig) -> Result<NonuniqReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let trip = round_trip(&cfg.schedule()?);
    out.write("schedule.txt", &trip.to_text())?;
    let reversible = reversible_error(&theta0, &trip, cfg.nx.min(256));
    let l0 = theta0.l2();
    let t = trip.total_time();
    let res = fan_out(&cfg.kappa, |k| {
        viscous_run(&theta0, &trip, k, cfg.nx, cfg.ny, cfg.substeps, None)
    });
    let mut rows = Vec::new();
    for (&k, r) in cfg.kappa.iter().zip(res) {
        let o = r?;
        out.write(
            &format!("ledger_kappa_{}.csv", kappa_tag(k)),
            &o.ledger.to_csv(),
        )?;
        let fl = o.ledger.entries.last().map(|e| e.l2).unwrap_or(l0);
        let ratio = fl * fl / (l0 * l0);
        rows.push(NonuniqRow {
            kappa: k,
            energy_ratio: ratio,
            gap: 1.0 - ratio,
            heat_gap: 2.0 * heat_dissipation(&theta0, k, t) / (l0 * l0),
        });
    }
    let mut csv = String::from("kappa,energy_ratio,gap,heat_gap\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{:.12e},{:.12e},{:.12e}",
            r.kappa, r.energy_ratio, r.gap, r.heat_gap
        );
    }
    out.write("nonuniq.csv", &csv)?;
    out.write(
        "nonuniq.gp",
        "set logscale x\nset xlabel 'kappa'\nset ylabel 'gap'\nset datafile separator ','\nplot 'nonuniq.csv' using 1:3 with linespoints title 'viscous', '' using 1:4 with lines title 'u = 0'\n",
    )?;
    let rep = NonuniqReport {
        reversible_error: reversible,
        gap_min: rows.iter().map(|r| r.gap).reduce(f64::min),
        gap_max: rows.iter().map(|r| r.gap).reduce(f64::max),
        rows,
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamoRow {
    pub kappa: f64,
    /// ∫_0^T |B|² dt = ∫_0^T |∇ψ^κ|² dt.
    pub magnetic: f64,
    pub chi: f64,
    /// κ ∫|B|² relative to the largest κ of the sweep.
    pub scaled: f64,
    pub still_magnetic: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DynamoReport {
    pub rows: Vec<DynamoRow>,
    /// T|ψ_0|²_{Ḣ¹}, the ceiling of the u ≡ 0 column.
    pub still_ceiling: f64,
}

pub fn exp_dynamo(cfg: &RunConfig) -> Result<DynamoReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let schedule = cfg.schedule()?;
    out.write("schedule.txt", &schedule.to_text())?;
    let t = schedule.total_time();
    let res = fan_out(&cfg.kappa, |k| {
        viscous_run(&theta0, &schedule, k, cfg.nx, cfg.ny, cfg.substeps, None)
    });
    let mut rows = Vec::new();
    let mut chi_ref = None;
    for (&k, r) in cfg.kappa.iter().zip(res) {
        if k == 0.0 {
            return Err(Error::Config("the dynamo report needs kappa > 0".into()));
        }
        let chi = r?.ledger.chi();
        let c0 = *chi_ref.get_or_insert(chi);
        rows.push(DynamoRow {
            kappa: k,
            magnetic: chi / k,
            chi,
            scaled: chi / c0,
            still_magnetic: heat_gradient_integral(&theta0, k, t),
        });
    }
    let mut csv = String::from("kappa,magnetic,chi,scaled,still_magnetic\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{:.12e},{:.12e},{:.12e},{:.12e}",
            r.kappa, r.magnetic, r.chi, r.scaled, r.still_magnetic
        );
    }
    out.write("dynamo.csv", &csv)?;
    out.write(
        "dynamo.gp",
        "set logscale xy\nset xlabel 'kappa'\nset ylabel 'int |B|^2 dt'\nset datafile separator ','\nplot 'dynamo.csv' using 1:2 with linespoints title 'sheared', '' using 1:5 with lines title 'u = 0'\n",
    )?;
    let rep = DynamoReport {
        rows,
        still_ceiling: heat_gradient_integral(&theta0, 0.0, t),
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcRow {
    pub kappa: f64,
    pub beta: f64,
    pub chi: f64,
    /// sup over stage ends of sup|θ| + max_ℓ |δ_ℓθ|/ℓ^β.
    pub holder_norm: f64,
    /// The quotient is resolved: its grid-scale value stays within 10% of
    /// the value at twice the spacing, at every stage end.
    pub finite: bool,
    pub bound: f64,
    pub holds: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OcReport {
    pub velocity_norm: f64,
    pub exponents: Vec<(f64, f64)>,
    pub rows: Vec<OcRow>,
    /// (j, β, max |δθ_j|/ℓ_j^β at ℓ_j = 2π/N_j) for the inviscid evolution.
    pub breakdown: Vec<(u32, f64, f64)>,
}

/// |δ_hθ|/h^β ≤ 1.1 |δ_{2h}θ|/(2h)^β for the two finest probe shifts.
pub fn quotient_resolved(increments: &[f64], steps: &[usize], h: f64, beta: f64) -> bool {
    match (increments, steps) {
        ([d1, d2, ..], [m1, m2, ..]) => {
            d1 / (*m1 as f64 * h).powf(beta) <= 1.1 * d2 / (*m2 as f64 * h).powf(beta)
        }
        _ => false,
    }
}

/// Probe shifts 1, 2, 4, ... grid steps up to a quarter period.
pub fn probe_steps(n: usize) -> Vec<usize> {
    std::iter::successors(Some(1usize), |m| Some(m * 2))
        .take_while(|m| *m <= n / 4)
        .collect()
}

/// max |θ_j(p + ℓ_j e) − θ_j(p)| over a `samples²` offset grid, with e the
/// axis stage j amplifies and ℓ_j = 2π/N_j.
pub fn stage_scale_increment(
    theta0: &InitialData,
    schedule: &StageSchedule,
    j: u32,
    samples: usize,
) -> Option<(f64, f64)> {
    let st = schedule.stage(j)?;
    let ell = TAU / st.frequency as f64;
    let (ex, ey) = match growth_axis(st.direction) {
        crate::field::Axis::X => (ell, 0.0),
        crate::field::Axis::Y => (0.0, ell),
    };
    let h = TAU / samples as f64;
    let mut best = 0.0f64;
    for a in 0..samples {
        for b in 0..samples {
            let (x, y) = (h * (a as f64 + 0.31), h * (b as f64 + 0.67));
            let d =
                evaluate(theta0, schedule, j, x + ex, y + ey) - evaluate(theta0, schedule, j, x, y);
            best = best.max(d.abs());
        }
    }
    Some((ell, best))
}

pub fn exp_oc_compare(cfg: &RunConfig) -> Result<OcReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let schedule = cfg.schedule()?;
    out.write("schedule.txt", &schedule.to_text())?;
    let unorm = velocity_holder_norm(&schedule, cfg.alpha);
    let t = schedule.total_time();
    let steps = probe_steps(cfg.nx.min(cfg.ny));
    let h = TAU / cfg.nx.max(cfg.ny) as f64;
    let per_kappa = fan_out(&cfg.kappa, |k| -> Result<(f64, Vec<(f64, bool)>)> {
        let chi = viscous_run(&theta0, &schedule, k, cfg.nx, cfg.ny, cfg.substeps, None)?
            .ledger
            .chi();
        let modes: Vec<(i64, i64)> = theta0.modes().iter().map(|m| (m.0, m.1)).collect();
        let mut f = theta0.to_field(Layout::for_program(cfg.nx, cfg.ny, &schedule, modes)?)?;
        // (largest C^β norm over the stage ends, quotient resolved at every one)
        let mut acc: Vec<(f64, bool)> = vec![(0.0, true); cfg.beta.len()];
        let mut probe = |f: &SpectralField| {
            let (sup, inc) = max_increments(&f.grid_view(), &steps);
            for (slot, p) in acc
                .iter_mut()
                .zip(holder_probes(sup, &inc, &steps, h, &cfg.beta))
            {
                slot.0 = slot.0.max(p.norm());
                slot.1 &= quotient_resolved(&inc, &steps, h, p.beta);
            }
        };
        probe(&f);
        for st in &schedule.stages {
            if st.duration > 0.0 {
                step_stage(&mut f, st, k, cfg.substeps)?;
                probe(&f);
            }
        }
        Ok((chi, acc))
    });
    let mut rows = Vec::new();
    for (&k, r) in cfg.kappa.iter().zip(per_kappa) {
        let (chi, probes) = r?;
        for (&beta, &(norm, finite)) in cfg.beta.iter().zip(&probes) {
            let bound = if k > 0.0 {
                obukhov_corrsin_bound(cfg.alpha, beta, k, norm, unorm, t)?
            } else {
                f64::INFINITY
            };
            rows.push(OcRow {
                kappa: k,
                beta,
                chi,
                holder_norm: norm,
                finite,
                bound,
                holds: chi <= bound,
            });
        }
    }
    let mut breakdown = Vec::new();
    for st in schedule.active_stages() {
        if let Some((ell, d)) = stage_scale_increment(&theta0, &schedule, st.j, 128) {
            for &beta in &cfg.beta {
                breakdown.push((st.j, beta, d / ell.powf(beta)));
            }
        }
    }
    let mut csv = String::from("kappa,beta,chi,holder_norm,finite,bound,holds\n");
    for r in &rows {
        let _ = writeln!(
            csv,
            "{:e},{},{:.12e},{:.12e},{},{:.12e},{}",
            r.kappa,
            r.beta,
            r.chi,
            r.holder_norm,
            u8::from(r.finite),
            r.bound,
            u8::from(r.holds)
        );
    }
    out.write("oc_compare.csv", &csv)?;
    let mut bcsv = String::from("j,beta,quotient\n");
    for (j, b, q) in &breakdown {
        let _ = writeln!(bcsv, "{j},{b},{q:.12e}");
    }
    out.write("holder_breakdown.csv", &bcsv)?;
    out.write(
        "oc_compare.gp",
        "set logscale xy\nset xlabel 'kappa'\nset datafile separator ','\nplot 'oc_compare.csv' using 1:3 with points title 'chi', '' using 1:6 with points title 'bound'\n",
    )?;
    let rep = OcReport {
        velocity_norm: unorm,
        exponents: cfg
            .beta
            .iter()
            .map(|&b| (b, oc_exponent(cfg.alpha, b)))
            .collect(),
        rows,
        breakdown,
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

/// Three gentle stages (ε = 0.5, N = 1, 2, 4) that both solvers resolve at 64².
pub fn gentle_three_stage() -> StageSchedule {
    StageSchedule::custom(&[
        (Direction::Horizontal, 1, 0.5, 0.5, 0),
        (Direction::Vertical, 2, 0.25, 0.5, 0),
        (Direction::Horizontal, 4, 0.125, 0.5, 0),
    ])
    .expect("valid stages")
}

/// Two smooth stages for the splitting-order study.
pub fn smooth_two_stage() -> StageSchedule {
    StageSchedule::custom(&[
        (Direction::Horizontal, 1, 0.5, 1.0, 0),
        (Direction::Vertical, 2, 0.5, 1.0, 0),
    ])
    .expect("valid stages")
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub n: usize,
    pub kappa: f64,
    /// |θ_spectral − θ_fd|/|θ_spectral| at the terminal time.
    pub relative_difference: f64,
    pub fd_order: f64,
    pub chi_spectral: f64,
    pub chi_extrapolated: f64,
    pub chi_relative_gap: f64,
    /// Distances to a 1024-substep reference for 4, 8, 16, 32 substeps.
    pub strang_deviation: Vec<(usize, f64)>,
    pub strang_ratios: Vec<f64>,
}

/// Spectral against finite differences on the gentle schedule, and the
/// splitting order of the spectral solver.
pub fn oracle_validate(
    theta0: &InitialData,
    kappa: f64,
    n: usize,
    substeps: usize,
) -> Result<OracleReport> {
    if n < 64 || !n.is_power_of_two() {
        return Err(Error::Config(format!(
            "oracle grid {n} must be a power of two >= 64"
        )));
    }
    let s = gentle_three_stage();
    let f0 = theta0.to_field(Layout::plain(n, n)?)?;
    let sp = run(&f0, &s, &SolverConfig::new(kappa, substeps, n, n))?;
    let fd = run_fd(&GridField::from_initial(theta0, n)?, &s, kappa, 0.4)?;
    let g = GridField::new(n, n, sp.field.to_grid())?;
    let rel = g.distance_l2(&fd.field)? / g.l2();
    let study = convergence_study(theta0, &s, kappa, [n / 4, n / 2, n], 0.4)?;
    let chi_sp = sp.ledger.chi();
    let two = smooth_two_stage();
    let m = n.min(128);
    let g0 = theta0.to_field(Layout::plain(m, m)?)?;
    let strang_kappa = kappa.max(1e-2);
    let reference = run(&g0, &two, &SolverConfig::new(strang_kappa, 1024, m, m))?.field;
    let mut dev = Vec::new();
    for sub in [4, 8, 16, 32] {
        let f = run(&g0, &two, &SolverConfig::new(strang_kappa, sub, m, m))?.field;
        dev.push((sub, f.distance_l2(&reference)?));
    }
    let ratios = dev.windows(2).map(|w| w[0].1 / w[1].1).collect();
    Ok(OracleReport {
        n,
        kappa,
        relative_difference: rel,
        fd_order: study.order,
        chi_spectral: chi_sp,
        chi_extrapolated: study.chi_extrapolated,
        chi_relative_gap: (study.chi_extrapolated - chi_sp).abs() / chi_sp,
        strang_deviation: dev,
        strang_ratios: ratios,
    })
}

pub fn exp_oracle_validate(cfg: &RunConfig) -> Result<OracleReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let n = cfg.nx.min(256);
    let kappa = cfg.kappa[0];
    let rep = oracle_validate(&theta0, kappa, n, cfg.substeps.max(256))?;
    let study = convergence_study(
        &theta0,
        &gentle_three_stage(),
        kappa,
        [n / 4, n / 2, n],
        0.4,
    )?;
    out.write("convergence.csv", &study.to_csv())?;
    out.write("schedule.txt", &gentle_three_stage().to_text())?;
    let mut csv = String::from("substeps,deviation\n");
    for (s, d) in &rep.strang_deviation {
        let _ = writeln!(csv, "{s},{d:.12e}");
    }
    out.write("strang.csv", &csv)?;
    out.write(
        "oracle.gp",
        "set logscale xy\nset datafile separator ','\nplot 'strang.csv' using 1:2 with linespoints title 'splitting deviation'\n",
    )?;
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSummary {
    pub path: PathBuf,
    pub nx: usize,
    pub ny: usize,
    pub l2: f64,
    pub modes: usize,
}

/// Writes θ_0 (perturbed by the first nonzero ε, if any) as a coefficient file.
pub fn exp_build_field(cfg: &RunConfig) -> Result<FieldSummary> {
    let out = cfg.begin()?;
    if cfg.nx * cfg.ny > 1 << 22 {
        return Err(Error::Config(
            "coefficient files are limited to 2^22 grid points".into(),
        ));
    }
    let psi = cfg.load_theta0()?;
    let theta0 = match cfg.epsilon.iter().find(|e| **e > 0.0) {
        Some(&eps) => InitialData::sum(&[
            psi.clone(),
            scaled(&band_noise(cfg.seed, cfg.band)?, eps * psi.l2()),
        ]),
        None => psi,
    };
    let f = theta0.to_field(Layout::plain(cfg.nx, cfg.ny)?)?;
    let path = out.path("theta0.bin");
    f.save(&path)?;
    let rep = FieldSummary {
        path,
        nx: cfg.nx,
        ny: cfg.ny,
        l2: f.l2(),
        modes: theta0.modes().len(),
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InviscidReport {
    pub stages: usize,
    pub growth_sup: f64,
    pub gradient_hypothesis_holds: bool,
}

/// Bootstrap trace and the inviscid criterion reports.
pub fn exp_run_inviscid(cfg: &RunConfig) -> Result<InviscidReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let schedule = cfg.schedule()?;
    out.write("schedule.txt", &schedule.to_text())?;
    let trace = bootstrap_trace(
        &theta0,
        &schedule,
        &TraceConfig {
            nx: cfg.nx,
            ny: cfg.ny,
            dense: 1024,
            strict: cfg.strict,
        },
    )?;
    out.write("bootstrap.csv", &trace.to_csv())?;
    let modes: Vec<(i64, i64)> = theta0.modes().iter().map(|m| (m.0, m.1)).collect();
    let f0 = theta0.to_field(Layout::for_program(cfg.nx, cfg.ny, &schedule, modes)?)?;
    let norms = bootstrap_norm_trace(&trace, &f0)?;
    let c2 = criterion2_check(&norms)?;
    let c3 = criterion3_check(&norms, &schedule)?;
    out.write("criterion2.csv", &c2.to_csv())?;
    out.write("criterion3.csv", &c3.to_csv())?;
    out.write(
        "bootstrap.gp",
        "set logscale y\nset xlabel 'j'\nset datafile separator ','\nplot 'bootstrap.csv' using 1:4 with linespoints title 'H1'\n",
    )?;
    let rep = InviscidReport {
        stages: trace.records.len(),
        growth_sup: c2.constant,
        gradient_hypothesis_holds: c3.notes.iter().any(|n| n.ends_with("true")),
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ViscousReport {
    pub kappa: f64,
    pub chi: f64,
    pub residual: f64,
    pub final_l2: f64,
}

/// One viscous run at the first κ of the list.
pub fn exp_run_viscous(cfg: &RunConfig) -> Result<ViscousReport> {
    let out = cfg.begin()?;
    let theta0 = cfg.load_theta0()?;
    let schedule = cfg.schedule()?;
    out.write("schedule.txt", &schedule.to_text())?;
    let k = cfg.kappa[0];
    let o = viscous_run(
        &theta0,
        &schedule,
        k,
        cfg.nx,
        cfg.ny,
        cfg.substeps,
        Some(out.path("failure.bin")),
    )?;
    out.write("ledger.csv", &o.ledger.to_csv())?;
    o.field.save(&out.path("theta_final.bin"))?;
    let rep = ViscousReport {
        kappa: k,
        chi: o.ledger.chi(),
        residual: o.ledger.max_residual(),
        final_l2: o.ledger.entries.last().map(|e| e.l2).unwrap_or(0.0),
    };
    out.json("report.json", &rep)?;
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_ignores_output_dir() {
        let a = RunConfig::default();
        let mut b = a.clone();
        b.out = PathBuf::from("elsewhere");
        assert_eq!(a.content_hash().unwrap(), b.content_hash().unwrap());
        b.seed = 1;
        assert_ne!(a.content_hash().unwrap(), b.content_hash().unwrap());
        assert_eq!(RunConfig::from_json(&a.to_json()).unwrap(), a);
    }

    #[test]
    fn noise_is_reproducible_and_normalized() {
        let a = band_noise(7, 2).unwrap();
        assert_eq!(a, band_noise(7, 2).unwrap());
        assert_ne!(a, band_noise(8, 2).unwrap());
        assert!((a.l2() - 1.0).abs() < 1e-14);
        assert_eq!(a.mean(), 0.0);
    }

    #[test]
    fn guard_picks_truncation() {
        let mut c = RunConfig {
            nx: 32768,
            ny: 32768,
            ..RunConfig::default()
        };
        assert_eq!(c.resolved_j_max(), 8);
        c.nx = 1024;
        c.ny = 1024;
        assert_eq!(c.resolved_j_max(), 4);
    }

    #[test]
    fn heat_closed_form_small_kappa() {
        let th = InitialData::parse_harmonics("sinsin:1,1").unwrap();
        let k = 1e-6;
        let lin = heat_gradient_integral(&th, 0.0, 1.0) * k;
        assert!((heat_dissipation(&th, k, 1.0) / lin - 1.0).abs() < 1e-5);
    }
}
