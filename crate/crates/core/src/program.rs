//! Alternating shear velocity programs.

use std::f64::consts::FRAC_PI_2;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::profile::SawtoothProfile;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    /// u = (±S(N y), 0): shifts x, amplifies ∂_y.
    Horizontal,
    /// u = (0, ±S(N x)): shifts y, amplifies ∂_x.
    Vertical,
}

impl Direction {
    pub fn for_index(j: u32) -> Self {
        if j.is_multiple_of(2) {
            Direction::Horizontal
        } else {
            Direction::Vertical
        }
    }

    fn tag(self) -> &'static str {
        match self {
            Direction::Horizontal => "h",
            Direction::Vertical => "v",
        }
    }

    fn from_tag(s: &str) -> Result<Self> {
        match s {
            "h" => Ok(Direction::Horizontal),
            "v" => Ok(Direction::Vertical),
            _ => Err(Error::Parse(format!("unknown direction tag {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Stage {
    pub j: u32,
    pub duration: f64,
    pub frequency: u64,
    pub epsilon: f64,
    pub direction: Direction,
    /// 0 keeps the profile sign, 1 flips it.
    pub sign: u8,
    /// Time at which the stage begins.
    pub start_time: f64,
    /// Identity stages carry no velocity.
    pub active: bool,
}

impl Stage {
    pub fn sigma(&self) -> f64 {
        if self.sign == 0 {
            1.0
        } else {
            -1.0
        }
    }

    pub fn end_time(&self) -> f64 {
        self.start_time + self.duration
    }

    pub fn profile(&self) -> SawtoothProfile {
        SawtoothProfile::new(self.epsilon).expect("stage widths are validated at construction")
    }

    /// Displacement along the advected coordinate after time `tau`, as a
    /// function of the shearing coordinate.
    #[inline]
    pub fn shift(&self, profile: &SawtoothProfile, tau: f64, coord: f64) -> f64 {
        self.sigma() * tau * profile.eval(self.frequency as f64 * coord)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleKind {
    Universal,
    Adaptive,
    Custom,
}

impl ScheduleKind {
    fn tag(self) -> &'static str {
        match self {
            ScheduleKind::Universal => "universal",
            ScheduleKind::Adaptive => "adaptive",
            ScheduleKind::Custom => "custom",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageSchedule {
    pub kind: ScheduleKind,
    pub alpha: f64,
    pub j_alpha: u32,
    pub a0: f64,
    pub j_max: u32,
    pub stages: Vec<Stage>,
}

/// ⌊1/α⌋ + 1.
pub fn first_active_index(alpha: f64) -> u32 {
    (1.0 / alpha + 1e-12).floor() as u32 + 1
}

/// Exponent ⌈(1+α)j⌉ with a tolerance so that exact products are not bumped up
/// by representation error.
pub fn frequency_exponent(alpha: f64, j: u32) -> u32 {
    let e = (1.0 + alpha) * j as f64;
    let r = e.round();
    if (e - r).abs() < 1e-9 {
        r as u32
    } else {
        e.ceil() as u32
    }
}

pub fn stage_width(alpha: f64, a0: f64, j: u32) -> f64 {
    let base = (-30.0 * (1.0 + 1.0 / (2f64.powf(alpha) - 1.0))).exp();
    a0 * base * 2f64.powi(-2 * j as i32)
}

/// Largest truncation index accepted, keeping N_j exactly representable.
const MAX_EXPONENT: u32 = 52;

impl StageSchedule {
    /// The universal program with all signs zero.
    pub fn build_universal(alpha: f64, j_max: u32) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        Self::assemble(ScheduleKind::Universal, alpha, j_max, 1.0, &[])
    }

    /// Same construction but accepting the closed range [0, 1]. Used to probe
    /// the boundary cases; α = 0 puts every stage from j = 1 on.
    pub fn build_test_mode(alpha: f64, j_max: u32) -> Result<Self> {
        if !(0.0..=1.0).contains(&alpha) {
            return Err(Error::Config(format!(
                "test-mode alpha must lie in [0,1], got {alpha}"
            )));
        }
        Self::assemble(ScheduleKind::Universal, alpha, j_max, 1.0, &[])
    }

    pub(crate) fn assemble(
        kind: ScheduleKind,
        alpha: f64,
        j_max: u32,
        a0: f64,
        signs: &[u8],
    ) -> Result<Self> {
        if !(a0 > 0.0 && a0 <= 1.0) {
            return Err(Error::Config(format!("a0 must lie in (0,1], got {a0}")));
        }
        let j_alpha = if alpha == 0.0 {
            1
        } else {
            first_active_index(alpha)
        };
        if frequency_exponent(alpha, j_max) > MAX_EXPONENT {
            return Err(Error::Config(format!(
                "j_max={j_max} overflows the frequency range"
            )));
        }
        let mut stages = Vec::with_capacity(j_max as usize + 1);
        let mut start = 0.0;
        for j in 0..=j_max {
            let duration = if j == 0 { 0.0 } else { 2f64.powi(-(j as i32)) };
            let epsilon = stage_width(alpha, a0, j).max(f64::MIN_POSITIVE);
            if epsilon >= FRAC_PI_2 {
                return Err(Error::Config(format!(
                    "stage {j} width {epsilon} is not below pi/2"
                )));
            }
            let active = j >= j_alpha;
            let sign = if active {
                signs.get((j - j_alpha) as usize).copied().unwrap_or(0)
            } else {
                0
            };
            stages.push(Stage {
                j,
                duration,
                frequency: 1u64 << frequency_exponent(alpha, j),
                epsilon,
                direction: Direction::for_index(j),
                sign,
                start_time: start,
                active,
            });
            start += duration;
        }
        Ok(Self {
            kind,
            alpha,
            j_alpha,
            a0,
            j_max,
            stages,
        })
    }

    /// A hand-built program, for validation runs that need gentle stages.
    /// Stages are numbered from 1 and start back to back at t = 0.
    pub fn custom(specs: &[(Direction, u64, f64, f64, u8)]) -> Result<Self> {
        let mut stages = Vec::with_capacity(specs.len());
        let mut start = 0.0;
        for (i, &(direction, frequency, duration, epsilon, sign)) in specs.iter().enumerate() {
            SawtoothProfile::new(epsilon)?;
            if !(duration >= 0.0 && duration.is_finite()) || frequency == 0 || sign > 1 {
                return Err(Error::Config(format!("invalid custom stage {i}")));
            }
            stages.push(Stage {
                j: i as u32 + 1,
                duration,
                frequency,
                epsilon,
                direction,
                sign,
                start_time: start,
                active: true,
            });
            start += duration;
        }
        Ok(Self {
            kind: ScheduleKind::Custom,
            alpha: 0.0,
            j_alpha: 1,
            a0: 1.0,
            j_max: specs.len() as u32,
            stages,
        })
    }

    pub fn stage(&self, j: u32) -> Option<&Stage> {
        self.stages.iter().find(|s| s.j == j)
    }

    pub fn active_stages(&self) -> impl Iterator<Item = &Stage> {
        self.stages.iter().filter(|s| s.active)
    }

    /// Time at which the program ends.
    pub fn total_time(&self) -> f64 {
        self.stages.last().map(|s| s.end_time()).unwrap_or(0.0)
    }

    /// Σ_{i≤j} t_i, the end of stage j.
    pub fn end_time(&self, j: u32) -> f64 {
        self.stages
            .iter()
            .filter(|s| s.j <= j)
            .map(|s| s.duration)
            .sum()
    }

    /// Signs of the active stages in order.
    pub fn signs(&self) -> Vec<u8> {
        self.active_stages().map(|s| s.sign).collect()
    }

    /// The same program with every active sign flipped and the stage order
    /// reversed, i.e. the velocity −u(T−t).
    pub fn reversed(&self) -> Self {
        let mut stages: Vec<Stage> = self.stages.iter().rev().cloned().collect();
        let mut start = 0.0;
        for s in &mut stages {
            s.sign ^= 1;
            s.start_time = start;
            start += s.duration;
        }
        let mut out = self.clone();
        out.kind = ScheduleKind::Custom;
        out.stages = stages;
        out
    }

    /// Append `other` after this program.
    pub fn concat(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.kind = ScheduleKind::Custom;
        let offset = self.total_time();
        let base = self.stages.len() as u32;
        for (i, s) in other.stages.iter().enumerate() {
            let mut s = s.clone();
            s.start_time += offset;
            s.j = base + i as u32;
            out.stages.push(s);
        }
        out.j_max = out.stages.last().map(|s| s.j).unwrap_or(0);
        out
    }

    /// Same timings with every stage switched off (u ≡ 0).
    pub fn quiescent(&self) -> Self {
        let mut out = self.clone();
        for s in &mut out.stages {
            s.active = false;
        }
        out
    }

    pub fn velocity_at(&self, t: f64, x: f64, y: f64) -> Result<(f64, f64)> {
        let total = self.total_time();
        if !(t >= 0.0 && t < total) {
            return Err(Error::Config(format!("time {t} outside [0, {total})")));
        }
        let stage = self
            .stages
            .iter()
            .find(|s| s.duration > 0.0 && t >= s.start_time && t < s.end_time())
            .ok_or_else(|| Error::Config(format!("no stage covers t={t}")))?;
        if !stage.active {
            return Ok((0.0, 0.0));
        }
        let p = stage.profile();
        let n = stage.frequency as f64;
        Ok(match stage.direction {
            Direction::Horizontal => (stage.sigma() * p.eval(n * y), 0.0),
            Direction::Vertical => (0.0, stage.sigma() * p.eval(n * x)),
        })
    }

    /// Σ t_j N_j^{α′} over active stages plus a geometric bound on the tail.
    pub fn holder_budget(&self, alpha_prime: f64) -> HolderBudget {
        let partial: f64 = self
            .active_stages()
            .map(|s| s.duration * (s.frequency as f64).powf(alpha_prime))
            .sum();
        let exponent = (1.0 + self.alpha) * alpha_prime - 1.0;
        let ratio = 2f64.powf(exponent);
        let finite = exponent < 0.0;
        let tail = if finite {
            // t_j N_j^{α′} ≤ 2^{α′} r^j since the frequency exponent is rounded up by < 1
            2f64.powf(alpha_prime) * ratio.powi(self.j_max as i32 + 1) / (1.0 - ratio)
        } else {
            f64::INFINITY
        };
        HolderBudget {
            partial,
            tail,
            ratio,
            finite,
        }
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        s.push_str("# shearlab schedule v1\n");
        let _ = writeln!(s, "kind = {}", self.kind.tag());
        let _ = writeln!(s, "alpha = {:?}", self.alpha);
        let _ = writeln!(s, "j_alpha = {}", self.j_alpha);
        let _ = writeln!(s, "a0 = {:?}", self.a0);
        let _ = writeln!(s, "j_max = {}", self.j_max);
        s.push_str("# stage = j duration frequency epsilon direction sign start active\n");
        for st in &self.stages {
            let _ = writeln!(
                s,
                "stage = {} {:?} {} {:?} {} {} {:?} {}",
                st.j,
                st.duration,
                st.frequency,
                st.epsilon,
                st.direction.tag(),
                st.sign,
                st.start_time,
                u8::from(st.active)
            );
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut kind = None;
        let mut alpha = None;
        let mut j_alpha = None;
        let mut a0 = None;
        let mut j_max = None;
        let mut stages = Vec::new();
        for (ln, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("line {}: expected key = value", ln + 1)))?;
            let value = value.trim();
            let bad = |what: &str| Error::Parse(format!("line {}: bad {what}", ln + 1));
            match key.trim() {
                "kind" => {
                    kind = Some(match value {
                        "universal" => ScheduleKind::Universal,
                        "adaptive" => ScheduleKind::Adaptive,
                        "custom" => ScheduleKind::Custom,
                        _ => return Err(bad("kind")),
                    })
                }
                "alpha" => alpha = Some(value.parse::<f64>().map_err(|_| bad("alpha"))?),
                "j_alpha" => j_alpha = Some(value.parse::<u32>().map_err(|_| bad("j_alpha"))?),
                "a0" => a0 = Some(value.parse::<f64>().map_err(|_| bad("a0"))?),
                "j_max" => j_max = Some(value.parse::<u32>().map_err(|_| bad("j_max"))?),
                "stage" => {
                    let f: Vec<&str> = value.split_whitespace().collect();
                    if f.len() != 8 {
                        return Err(bad("stage record"));
                    }
                    let epsilon: f64 = f[3].parse().map_err(|_| bad("epsilon"))?;
                    if !(epsilon > 0.0 && epsilon < FRAC_PI_2) {
                        return Err(bad("epsilon"));
                    }
                    stages.push(Stage {
                        j: f[0].parse().map_err(|_| bad("j"))?,
                        duration: f[1].parse().map_err(|_| bad("duration"))?,
                        frequency: f[2].parse().map_err(|_| bad("frequency"))?,
                        epsilon,
                        direction: Direction::from_tag(f[4])?,
                        sign: f[5].parse().map_err(|_| bad("sign"))?,
                        start_time: f[6].parse().map_err(|_| bad("start"))?,
                        active: f[7] == "1",
                    });
                }
                other => {
                    return Err(Error::Parse(format!(
                        "line {}: unknown key {other:?}",
                        ln + 1
                    )))
                }
            }
        }
        let missing = |k: &str| Error::Parse(format!("missing key {k}"));
        Ok(Self {
            kind: kind.ok_or_else(|| missing("kind"))?,
            alpha: alpha.ok_or_else(|| missing("alpha"))?,
            j_alpha: j_alpha.ok_or_else(|| missing("j_alpha"))?,
            a0: a0.ok_or_else(|| missing("a0"))?,
            j_max: j_max.ok_or_else(|| missing("j_max"))?,
            stages,
        })
    }

    /// Largest N over active stages shearing the given coordinate.
    pub fn max_frequency(&self, shearing: Direction) -> u64 {
        self.active_stages()
            .filter(|s| s.direction == shearing)
            .map(|s| s.frequency)
            .max()
            .unwrap_or(0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HolderBudget {
    pub partial: f64,
    pub tail: f64,
    /// Geometric ratio 2^{(1+α)α′−1} of the tail.
    pub ratio: f64,
    pub finite: bool,
}

impl HolderBudget {
    pub fn total(&self) -> f64 {
        self.partial + self.tail
    }
}

/// Outcome of the data-adaptive construction.
#[derive(Debug, Clone, PartialEq)]
pub struct AdaptiveChoice {
    pub schedule: StageSchedule,
    /// First bootstrap ratio at the accepted a0.
    pub first_ratio: f64,
    /// Directional norms for sign 0 and sign 1 at each active stage.
    pub candidates: Vec<(u32, f64, f64)>,
}

impl StageSchedule {
    /// Shrinks a0 from 1 by halving until the first bootstrap ratio is below 1,
    /// then picks each sign greedily by the amplified directional norm of θ_j,
    /// measured by quadrature of the analytic gradient on an `n × n` grid.
    /// Ties within a relative 1e-9 go to sign 0.
    pub fn build_adaptive(
        theta0: &crate::inviscid::InitialData,
        alpha: f64,
        j_max: u32,
        n: usize,
    ) -> Result<AdaptiveChoice> {
        use crate::inviscid::{gradient_norms_quadrature, growth_axis};
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::Config(format!(
                "alpha must lie in (0,1), got {alpha}"
            )));
        }
        if theta0.l2() == 0.0 {
            return Err(Error::Config("adaptive program needs nonzero data".into()));
        }
        theta0.require_mean_zero()?;
        let directional = |s: &StageSchedule, j: u32| {
            let (gx, gy) = gradient_norms_quadrature(theta0, s, j, n);
            let d = s
                .stage(j)
                .map(|st| st.direction)
                .unwrap_or(Direction::Horizontal);
            match growth_axis(d) {
                crate::field::Axis::X => gx,
                crate::field::Axis::Y => gy,
            }
        };
        let mut a0 = 1.0;
        let first_ratio = loop {
            let s = Self::assemble(ScheduleKind::Adaptive, alpha, j_max, a0, &[])?;
            let j = s.j_alpha;
            if j > j_max {
                break f64::NAN;
            }
            let r = directional(&s, j - 1) / directional(&s, j);
            if r < 1.0 {
                break r;
            }
            a0 *= 0.5;
            if a0 < 2f64.powi(-40) {
                return Err(Error::Numerical(format!(
                    "a0 underflow: first bootstrap ratio stays at {r}"
                )));
            }
        };
        let mut signs: Vec<u8> = Vec::new();
        let mut candidates = Vec::new();
        let j_alpha = first_active_index(alpha);
        for j in j_alpha..=j_max {
            let mut norms = [0.0; 2];
            for (s, norm) in norms.iter_mut().enumerate() {
                let mut trial = signs.clone();
                trial.push(s as u8);
                let sch = Self::assemble(ScheduleKind::Adaptive, alpha, j, a0, &trial)?;
                *norm = directional(&sch, j);
            }
            let pick = u8::from(norms[1] > norms[0] * (1.0 + 1e-9));
            signs.push(pick);
            candidates.push((j, norms[0], norms[1]));
        }
        let schedule = Self::assemble(ScheduleKind::Adaptive, alpha, j_max, a0, &signs)?;
        Ok(AdaptiveChoice {
            schedule,
            first_ratio,
            candidates,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn half_alpha_parameters() {
        let s = StageSchedule::build_universal(0.5, 7).unwrap();
        assert_eq!(s.j_alpha, 3);
        let st = s.stage(3).unwrap();
        assert_eq!(st.frequency, 32);
        assert_eq!(st.duration, 0.125);
        assert_eq!(st.direction, Direction::Vertical);
        assert!(st.active);
        assert!(!s.stage(2).unwrap().active);
        assert_eq!(s.stage(4).unwrap().frequency, 64);
        assert_eq!(s.stage(5).unwrap().frequency, 256);
        assert!((s.total_time() - (1.0 - 2f64.powi(-7))).abs() < 1e-15);
        assert_eq!(s.end_time(3), 0.875);
        assert_eq!(s.stage(3).unwrap().start_time, 0.75);
    }

    #[test]
    fn boundary_alpha_one() {
        let s = StageSchedule::build_test_mode(1.0, 4).unwrap();
        let st = s.stage(3).unwrap();
        assert_eq!(st.duration, 0.125);
        assert_eq!(st.frequency, 64);
        assert!(StageSchedule::build_universal(1.0, 4).is_err());
        assert!(StageSchedule::build_universal(0.0, 4).is_err());
    }

    #[test]
    fn truncated_below_first_stage_is_identity() {
        let s = StageSchedule::build_universal(0.5, 2).unwrap();
        assert_eq!(s.active_stages().count(), 0);
        assert_eq!(s.velocity_at(0.6, 1.0, 2.0).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn velocity_on_even_stage_is_horizontal() {
        let s = StageSchedule::build_universal(0.5, 6).unwrap();
        let st = s.stage(4).unwrap().clone();
        let t = st.start_time + 0.5 * st.duration;
        let y = 0.3;
        let (u, v) = s.velocity_at(t, 1.1, y).unwrap();
        assert_eq!(v, 0.0);
        assert_eq!(u, st.profile().eval(64.0 * y));
        assert!(s.velocity_at(1.5, 0.0, 0.0).is_err());
        assert!(s.velocity_at(-0.1, 0.0, 0.0).is_err());
    }

    #[test]
    fn holder_budget_flags() {
        let s = StageSchedule::build_universal(0.5, 10).unwrap();
        let b = s.holder_budget(0.6);
        assert!(b.finite);
        assert!((b.ratio - 2f64.powf(-0.1)).abs() < 1e-15);
        assert!(!s.holder_budget(0.7).finite);
    }

    #[test]
    fn holder_partial_sum_matches_direct_summation() {
        let s = StageSchedule::build_universal(0.25, 20).unwrap();
        let b = s.holder_budget(0.75);
        // independent summation: J = 5, N_j = 2^ceil(1.25 j)
        let mut direct = 0.0;
        for j in 5..=20u32 {
            let e = (5 * j).div_ceil(4);
            direct += 0.5f64.powi(j as i32) * 2f64.powf(0.75 * e as f64);
        }
        assert!((b.partial - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn text_round_trip_is_exact() {
        let s = StageSchedule::build_universal(0.5, 9).unwrap();
        let t = s.to_text();
        let back = StageSchedule::from_text(&t).unwrap();
        assert_eq!(s, back);
        assert_eq!(back.to_text(), t);
    }

    #[test]
    fn reversal_flips_signs_and_order() {
        let s = StageSchedule::build_universal(0.5, 5).unwrap();
        let r = s.reversed();
        assert_eq!(r.stages.first().unwrap().frequency, 256);
        assert!(r.stages.iter().all(|st| st.sign == 1));
        assert!((r.total_time() - s.total_time()).abs() < 1e-15);
    }

    #[test]
    fn adaptive_on_pure_harmonic() {
        use crate::inviscid::{HarmonicData, InitialData};
        let th = InitialData::Harmonic(HarmonicData::sinsin(1, 1));
        let c = StageSchedule::build_adaptive(&th, 0.5, 4, 256).unwrap();
        assert_eq!(c.schedule.a0, 1.0);
        assert!(c.first_ratio < 0.6);
        let (_, n0, n1) = c.candidates[0];
        assert!((n0 - n1).abs() < 1e-9 * n0);
        assert_eq!(c.schedule.stage(3).unwrap().sign, 0);
        assert!(StageSchedule::build_adaptive(&InitialData::Modes(vec![]), 0.5, 4, 64).is_err());
    }
}
