//! Fourier pseudo-spectral solver for the inviscid Burgers equation
//! `∂t u + u ∂x u = 0` on the periodic domain `[-1, 1)`, with the total
//! variation divergence test and the bisection search for the largest
//! stable time step.

use std::collections::VecDeque;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use realfft::{ComplexToReal, RealFftPlanner, RealToComplex};

use crate::error::{Error, Result};
use crate::scheme_algebra::{analyze, Regime, SchemeKind, SchemeSpec};

pub const MIN_N: usize = 16;
pub const MAX_N: usize = 8192;
pub const DEFAULT_DEALIAS: f64 = 2.0 / 3.0;
/// Mean of the initial profile, the transport speed of the linearization.
pub const MEAN_SPEED: f64 = 10.0;
pub const AMPLITUDE: f64 = 0.1;
/// Smooth solutions exist for `t < 10/π`.
pub const SHOCK_TIME: f64 = MEAN_SPEED / PI;
const EXACT_TOL: f64 = 1e-13;
const MAX_EXPANSIONS: usize = 20;

fn check_n(n: usize) -> Result<()> {
    if !n.is_power_of_two() || !(MIN_N..=MAX_N).contains(&n) {
        return Err(Error::InvalidGrid(format!(
            "n must be a power of two in [{MIN_N}, {MAX_N}], got {n}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub n: usize,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GridState {
    pub fn new(values: Vec<f64>, time: f64) -> Result<Self> {
        let n = values.len();
        check_n(n)?;
        if let Some(j) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid(format!("value {j} is not finite")));
        }
        Ok(Self { n, values, time })
    }

    pub fn x(&self, j: usize) -> f64 {
        grid_point(self.n, j)
    }

    pub fn total_variation(&self) -> f64 {
        total_variation(&self.values)
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.n as f64
    }

    /// Columns `x,u`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x,u\n");
        for (j, u) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{:.17e},{:.17e}", self.x(j), u);
        }
        out
    }
}

pub fn grid_point(n: usize, j: usize) -> f64 {
    -1.0 + 2.0 * j as f64 / n as f64
}

/// Periodic discrete total variation `Σ |u_{j+1} - u_j|`.
pub fn total_variation(u: &[f64]) -> f64 {
    let n = u.len();
    (0..n).map(|j| (u[(j + 1) % n] - u[j]).abs()).sum()
}

pub fn u0(x: f64) -> f64 {
    MEAN_SPEED - AMPLITUDE * (PI * x).sin()
}

/// `u_0(x) = 10 - 0.1 sin(πx)` on the grid.
pub fn initial_condition(n: usize) -> Result<GridState> {
    check_n(n)?;
    GridState::new((0..n).map(|j| u0(grid_point(n, j))).collect(), 0.0)
}

/// `u(x, t) = u_0(a)` with `a - x + u_0(a) t = 0`, valid before the shock.
pub fn exact_solution(x: f64, t: f64) -> Result<f64> {
    if !(0.0..SHOCK_TIME).contains(&t) {
        return Err(Error::OutOfRange(format!(
            "exact solution needs 0 ≤ t < 10/π, got t = {t}"
        )));
    }
    let mut a = x - MEAN_SPEED * t;
    for _ in 0..100 {
        let f = a - x + u0(a) * t;
        if f.abs() < EXACT_TOL {
            // the foot lies in [-1, 1) up to a whole number of periods
            return Ok(u0((a + 1.0).rem_euclid(2.0) - 1.0));
        }
        let df = 1.0 - AMPLITUDE * PI * t * (PI * a).cos();
        a -= f / df;
    }
    let residual = (a - x + u0(a) * t).abs();
    if residual < EXACT_TOL {
        return Ok(u0(a));
    }
    Err(Error::NoConvergence {
        what: "characteristic foot",
        iterations: 100,
        residual,
    })
}

pub fn exact_state(n: usize, t: f64) -> Result<GridState> {
    check_n(n)?;
    let values = (0..n)
        .map(|j| exact_solution(grid_point(n, j), t))
        .collect::<Result<Vec<_>>>()?;
    GridState::new(values, t)
}

/// Reusable transforms and buffers for `F(u) = -u ∂x u`.
pub struct BurgersOperator {
    n: usize,
    cutoff: usize,
    forward: Arc<dyn RealToComplex<f64>>,
    inverse: Arc<dyn ComplexToReal<f64>>,
    real_buf: Vec<f64>,
    deriv: Vec<f64>,
    spectrum: Vec<Complex64>,
    scratch_fwd: Vec<Complex64>,
    scratch_inv: Vec<Complex64>,
}

impl BurgersOperator {
    pub fn new(n: usize, dealias_fraction: f64) -> Result<Self> {
        check_n(n)?;
        if !(dealias_fraction > 0.0 && dealias_fraction <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "dealias fraction must lie in (0, 1], got {dealias_fraction}"
            )));
        }
        let mut planner = RealFftPlanner::<f64>::new();
        let forward = planner.plan_fft_forward(n);
        let inverse = planner.plan_fft_inverse(n);
        let scratch_fwd = forward.make_scratch_vec();
        let scratch_inv = inverse.make_scratch_vec();
        Ok(Self {
            n,
            cutoff: (dealias_fraction * (n / 2) as f64 + 1e-9).floor() as usize,
            forward,
            inverse,
            real_buf: vec![0.0; n],
            deriv: vec![0.0; n],
            spectrum: vec![Complex64::new(0.0, 0.0); n / 2 + 1],
            scratch_fwd,
            scratch_inv,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Highest retained wavenumber.
    pub fn cutoff(&self) -> usize {
        self.cutoff
    }

    fn forward(&mut self) {
        self.forward
            .process_with_scratch(&mut self.real_buf, &mut self.spectrum, &mut self.scratch_fwd)
            .expect("buffer sizes fixed at construction");
    }

    fn inverse_into(&mut self, out: &mut [f64]) {
        let nyq = self.n / 2;
        self.spectrum[0].im = 0.0;
        self.spectrum[nyq].im = 0.0;
        self.inverse
            .process_with_scratch(&mut self.spectrum, out, &mut self.scratch_inv)
            .expect("buffer sizes fixed at construction");
    }

    /// Writes `F(u)` into `out`.
    pub fn apply(&mut self, u: &[f64], out: &mut [f64]) {
        let n = self.n;
        let nyq = n / 2;
        let inv_n = 1.0 / n as f64;
        self.real_buf.copy_from_slice(u);
        self.forward();
        for (k, c) in self.spectrum.iter_mut().enumerate() {
            *c = if k == nyq {
                Complex64::new(0.0, 0.0)
            } else {
                *c * Complex64::new(0.0, PI * k as f64 * inv_n)
            };
        }
        let mut deriv = std::mem::take(&mut self.deriv);
        self.inverse_into(&mut deriv);
        for ((r, &uj), &dj) in self.real_buf.iter_mut().zip(u).zip(&deriv) {
            *r = -uj * dj;
        }
        self.deriv = deriv;
        self.forward();
        let cutoff = self.cutoff;
        for (k, c) in self.spectrum.iter_mut().enumerate() {
            *c = if k > cutoff { Complex64::new(0.0, 0.0) } else { *c * inv_n };
        }
        self.inverse_into(out);
    }

    /// Fourier coefficients of `v` (normalised by `n`), modes `0..=n/2`.
    pub fn spectrum_of(&mut self, v: &[f64]) -> Vec<Complex64> {
        self.real_buf.copy_from_slice(v);
        self.forward();
        self.spectrum.iter().map(|c| c / self.n as f64).collect()
    }
}

/// `F(u) = -u ∂x u` with sharp truncation of modes above
/// `dealias_fraction · n/2`.
pub fn burgers_rhs(u: &GridState, dealias_fraction: f64) -> Result<Vec<f64>> {
    let mut op = BurgersOperator::new(u.n, dealias_fraction)?;
    let mut out = vec![0.0; u.n];
    op.apply(&u.values, &mut out);
    Ok(out)
}

fn axpy(out: &mut [f64], base: &[f64], scale: f64, dir: &[f64]) {
    for ((o, b), d) in out.iter_mut().zip(base).zip(dir) {
        *o = b + scale * d;
    }
}

/// Steps a scheme with `F = burgers_rhs`, keeping the right-hand sides of
/// past states for multistep schemes.
pub struct Integrator {
    scheme: SchemeSpec,
    op: BurgersOperator,
    /// `F(u_n), F(u_{n-1}), …`, newest first.
    past_rhs: VecDeque<Vec<f64>>,
    stages: Vec<Vec<f64>>,
    stage_rhs: Vec<Vec<f64>>,
    work: Vec<f64>,
}

impl Integrator {
    pub fn new(scheme: &SchemeSpec, n: usize, dealias_fraction: f64) -> Result<Self> {
        if let SchemeKind::MultiplierMatrix { .. } = scheme.kind {
            return Err(Error::UnsupportedKind {
                kind: scheme.kind.label(),
                reason: "a multiplier matrix fixes only the linear behaviour, not a nonlinear update",
            });
        }
        let op = BurgersOperator::new(n, dealias_fraction)?;
        let s = match &scheme.kind {
            SchemeKind::Tableau { a, .. } => a.len().max(4),
            _ => 4,
        };
        Ok(Self {
            scheme: scheme.clone(),
            op,
            past_rhs: VecDeque::new(),
            stages: vec![vec![0.0; n]; s + 1],
            stage_rhs: vec![vec![0.0; n]; s + 1],
            work: vec![0.0; n],
        })
    }

    pub fn scheme(&self) -> &SchemeSpec {
        &self.scheme
    }

    pub fn operator(&mut self) -> &mut BurgersOperator {
        &mut self.op
    }

    fn required_history(&self) -> usize {
        self.scheme.history_len() + 1
    }

    /// Number of right-hand sides of past states currently held.
    pub fn history(&self) -> usize {
        self.past_rhs.len()
    }

    pub fn clear_history(&mut self) {
        self.past_rhs.clear();
    }

    fn record_rhs(&mut self, u: &[f64]) {
        let keep = self.required_history();
        let mut f = if self.past_rhs.len() >= keep {
            self.past_rhs.pop_back().expect("nonempty")
        } else {
            vec![0.0; u.len()]
        };
        self.op.apply(u, &mut f);
        self.past_rhs.push_front(f);
    }

    /// Records `F(u)` as the newest history entry without stepping, for
    /// externally supplied bootstrap states.
    pub fn push_state(&mut self, u: &[f64]) {
        self.record_rhs(u);
    }

    /// One step of the scheme. Multistep schemes error unless enough past
    /// right-hand sides were recorded.
    pub fn step(&mut self, u: &mut [f64], dt: f64) -> Result<()> {
        match self.scheme.kind.clone() {
            SchemeKind::RkChain { alphas } => {
                self.past_rhs.clear();
                // innermost first: w = u + α_p δt F(u), then w = u + α_k δt F(w)
                self.work.copy_from_slice(u);
                let mut f = std::mem::take(&mut self.stage_rhs[0]);
                for &alpha in alphas.iter().rev() {
                    self.op.apply(&self.work, &mut f);
                    axpy(&mut self.work, u, alpha * dt, &f);
                }
                self.stage_rhs[0] = f;
                u.copy_from_slice(&self.work);
                Ok(())
            }
            SchemeKind::Tableau { a, b } => {
                self.past_rhs.clear();
                self.tableau_step(u, dt, &a, &b, None);
                Ok(())
            }
            SchemeKind::AdamsBashforth { alphas } => {
                self.record_rhs(u);
                if self.past_rhs.len() < alphas.len() {
                    let available = self.past_rhs.len();
                    self.past_rhs.pop_front();
                    return Err(Error::InsufficientHistory {
                        available,
                        required: alphas.len(),
                    });
                }
                for (alpha, f) in alphas.iter().zip(&self.past_rhs) {
                    for (uj, fj) in u.iter_mut().zip(f) {
                        *uj += alpha * dt * fj;
                    }
                }
                Ok(())
            }
            SchemeKind::MultiplierMatrix { .. } => unreachable!("rejected at construction"),
        }
    }

    fn tableau_step(&mut self, u: &mut [f64], dt: f64, a: &[Vec<f64>], b: &[Vec<f64>], first_rhs: Option<&[f64]>) {
        let s = a.len();
        self.stages[0].copy_from_slice(u);
        match first_rhs {
            Some(f) => self.stage_rhs[0].copy_from_slice(f),
            None => {
                let (head, _) = self.stage_rhs.split_at_mut(1);
                self.op.apply(&self.stages[0], &mut head[0]);
            }
        }
        for l in 1..=s {
            let (done, rest) = self.stages.split_at_mut(l);
            let target = &mut rest[0];
            target.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..l {
                let (ai, bi) = (a[l - 1][i], b[l - 1][i] * dt);
                if ai == 0.0 && bi == 0.0 {
                    continue;
                }
                for ((t, s), f) in target.iter_mut().zip(&done[i]).zip(&self.stage_rhs[i]) {
                    *t += ai * s + bi * f;
                }
            }
            if l < s {
                let (_, rest) = self.stage_rhs.split_at_mut(l);
                self.op.apply(&self.stages[l], &mut rest[0]);
            }
        }
        u.copy_from_slice(&self.stages[s]);
    }

    /// Classical RK4 step; for multistep schemes the right-hand side of `u`
    /// is also recorded in the history.
    pub fn rk4_step(&mut self, u: &mut [f64], dt: f64) {
        let (a, b) = rk4_tableau();
        if matches!(self.scheme.kind, SchemeKind::AdamsBashforth { .. }) {
            self.record_rhs(u);
            let f = self.past_rhs[0].clone();
            self.tableau_step(u, dt, &a, &b, Some(&f));
        } else {
            self.tableau_step(u, dt, &a, &b, None);
        }
    }
}

fn rk4_tableau() -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let third = 1.0 / 3.0;
    (
        vec![vec![1.0], vec![1.0, 0.0], vec![1.0, 0.0, 0.0], vec![1.0, 0.0, 0.0, 0.0]],
        vec![
            vec![0.5],
            vec![0.0, 0.5],
            vec![0.0, 0.0, 1.0],
            vec![1.0 / 6.0, third, third, 1.0 / 6.0],
        ],
    )
}

/// One step from a history of states, newest last. One-step schemes use
/// only the last state; Adams-Bashforth with `K+1` coefficients needs the
/// last `K+1` states.
pub fn step(history: &[GridState], dt: f64, scheme: &SchemeSpec, dealias_fraction: f64) -> Result<GridState> {
    let current = history.last().ok_or(Error::InsufficientHistory {
        available: 0,
        required: 1,
    })?;
    if !(dt >= 0.0) {
        return Err(Error::OutOfRange(format!("time step must be nonnegative, got {dt}")));
    }
    let required = scheme.history_len() + 1;
    if history.len() < required {
        return Err(Error::InsufficientHistory {
            available: history.len(),
            required,
        });
    }
    if history.iter().any(|s| s.n != current.n) {
        return Err(Error::InvalidGrid("history states differ in size".into()));
    }
    let mut integ = Integrator::new(scheme, current.n, dealias_fraction)?;
    for past in &history[history.len() - required..history.len() - 1] {
        integ.push_state(&past.values);
    }
    let mut values = current.values.clone();
    integ.step(&mut values, dt)?;
    GridState::new(values, current.time + dt)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Bootstrap {
    /// Classical RK4 at the same time step.
    Rk4,
    /// Exact solution values; only meaningful for the standard initial
    /// condition.
    Exact,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BurgersConfig {
    pub t_final: f64,
    pub k_tv: f64,
    pub dealias_fraction: f64,
    pub n_list: Vec<usize>,
    /// Relative bracket width at which bisection stops.
    pub tolerance: f64,
    pub bootstrap: Bootstrap,
    /// Growth rate assumed by the first time-step guess.
    pub growth_rate: f64,
    /// Ratio between successive probes while bracketing.
    pub bracket_factor: f64,
    pub jobs: usize,
}

impl Default for BurgersConfig {
    fn default() -> Self {
        Self {
            t_final: 1.0,
            k_tv: 1.1,
            dealias_fraction: DEFAULT_DEALIAS,
            n_list: (4..=10).map(|p| 1 << p).collect(),
            tolerance: 0.005,
            bootstrap: Bootstrap::Rk4,
            growth_rate: 25.0,
            bracket_factor: 2.0,
            jobs: 1,
        }
    }
}

/// `16..1024` (powers of two) or a comma separated list.
pub fn parse_n_list(text: &str) -> Option<Vec<usize>> {
    if let Some((lo, hi)) = text.split_once("..") {
        let (lo, hi): (usize, usize) = (lo.trim().parse().ok()?, hi.trim().parse().ok()?);
        if !lo.is_power_of_two() || hi < lo {
            return None;
        }
        let mut out = vec![lo];
        while out.last().expect("nonempty") * 2 <= hi {
            out.push(out.last().expect("nonempty") * 2);
        }
        return Some(out);
    }
    text.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse().ok())
        .collect()
}

impl BurgersConfig {
    /// Plain `key = value` lines; `#` starts a comment. Keys: `T`, `K_tv`,
    /// `dealias_fraction`, `n_ladder`, `n_min`, `n_max`, `tolerance`,
    /// `bootstrap` (`rk4` or `exact`), `growth_rate`, `bracket_factor`, `jobs`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cfg = Self::default();
        let (mut n_min, mut n_max) = (None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let err = |message: String| Error::Parse { line: idx + 1, message };
            let (key, value) = line
                .split_once('=')
                .map(|(k, v)| (k.trim(), v.trim()))
                .ok_or_else(|| err(format!("expected `key = value`, got `{line}`")))?;
            let real = || value.parse::<f64>().map_err(|_| err(format!("`{value}` is not a number")));
            let int = || value.parse::<usize>().map_err(|_| err(format!("`{value}` is not an integer")));
            match key {
                "T" => cfg.t_final = real()?,
                "K_tv" => cfg.k_tv = real()?,
                "dealias_fraction" => cfg.dealias_fraction = real()?,
                "tolerance" => cfg.tolerance = real()?,
                "growth_rate" => cfg.growth_rate = real()?,
                "bracket_factor" => cfg.bracket_factor = real()?,
                "jobs" => cfg.jobs = int()?,
                "n_min" => n_min = Some(int()?),
                "n_max" => n_max = Some(int()?),
                "n_ladder" => {
                    cfg.n_list = parse_n_list(value).ok_or_else(|| err(format!("bad n ladder `{value}`")))?
                }
                "bootstrap" => {
                    cfg.bootstrap = match value {
                        "rk4" => Bootstrap::Rk4,
                        "exact" => Bootstrap::Exact,
                        _ => return Err(err(format!("bootstrap must be `rk4` or `exact`, got `{value}`"))),
                    }
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        if n_min.is_some() || n_max.is_some() {
            let lo = n_min.unwrap_or(cfg.n_list[0]);
            let hi = n_max.unwrap_or(*cfg.n_list.last().unwrap_or(&lo));
            cfg.n_list = parse_n_list(&format!("{lo}..{hi}"))
                .ok_or_else(|| Error::Parse { line: 0, message: format!("bad ladder {lo}..{hi}") })?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t_final > 0.0) {
            return Err(Error::OutOfRange(format!("T must be positive, got {}", self.t_final)));
        }
        if !(self.k_tv > 1.0) {
            return Err(Error::OutOfRange(format!("K_tv must exceed 1, got {}", self.k_tv)));
        }
        if !(self.dealias_fraction > 0.0 && self.dealias_fraction <= 1.0) {
            return Err(Error::OutOfRange(format!(
                "dealias fraction must lie in (0, 1], got {}",
                self.dealias_fraction
            )));
        }
        if !(self.tolerance > 0.0) || !(self.bracket_factor > 1.0) || !(self.growth_rate > 0.0) {
            return Err(Error::OutOfRange("tolerance, growth rate must be positive and bracket factor above 1".into()));
        }
        if self.n_list.is_empty() || self.n_list.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::OutOfRange("n ladder must be nonempty and strictly ascending".into()));
        }
        self.n_list.iter().try_for_each(|&n| check_n(n))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RunStatus {
    Stable,
    Diverged,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub status: RunStatus,
    pub steps_taken: usize,
    pub final_tv: f64,
    pub divergence_step: Option<usize>,
    /// Largest per-step change of the spatial mean relative to the mean.
    pub max_mean_drift: f64,
    pub final_state: Vec<f64>,
}

impl RunOutcome {
    pub fn is_stable(&self) -> bool {
        self.status == RunStatus::Stable
    }
}

/// Advances `ceil(T/dt)` steps, the last one shortened to land on `T`,
/// checking `TV(u_n) ≤ K_tv TV(u_0)` after every step.
pub fn run_until(u0: &GridState, t_final: f64, dt: f64, scheme: &SchemeSpec, k_tv: f64) -> Result<RunOutcome> {
    let cfg = BurgersConfig {
        t_final,
        k_tv,
        ..BurgersConfig::default()
    };
    run_with(u0, dt, scheme, &cfg)
}

pub fn run_with(u0: &GridState, dt: f64, scheme: &SchemeSpec, cfg: &BurgersConfig) -> Result<RunOutcome> {
    if !(cfg.t_final > 0.0) || !(dt > 0.0) {
        return Err(Error::OutOfRange(format!("need T > 0 and dt > 0, got T = {}, dt = {dt}", cfg.t_final)));
    }
    if !(cfg.k_tv > 1.0) {
        return Err(Error::OutOfRange(format!("K_tv must exceed 1, got {}", cfg.k_tv)));
    }
    let mut integ = Integrator::new(scheme, u0.n, cfg.dealias_fraction)?;
    let bootstrap_steps = scheme.history_len();
    let steps = (cfg.t_final / dt).ceil().max(1.0) as usize;
    let last_dt = cfg.t_final - (steps - 1) as f64 * dt;
    let limit = cfg.k_tv * u0.total_variation();
    let mut u = u0.values.clone();
    let mut mean = u0.mean();
    let mut max_mean_drift: f64 = 0.0;
    let mut tv = u0.total_variation();
    for k in 1..=steps {
        let h = if k == steps { last_dt } else { dt };
        if k <= bootstrap_steps || (h != dt && bootstrap_steps > 0) {
            match cfg.bootstrap {
                Bootstrap::Exact if k <= bootstrap_steps => {
                    integ.push_state(&u);
                    u = exact_state(u0.n, u0.time + k as f64 * dt)?.values;
                }
                _ => integ.rk4_step(&mut u, h),
            }
        } else {
            integ.step(&mut u, h)?;
        }
        tv = total_variation(&u);
        if !tv.is_finite() || tv > limit || u.iter().any(|v| !v.is_finite()) {
            return Ok(RunOutcome {
                status: RunStatus::Diverged,
                steps_taken: k,
                final_tv: tv,
                divergence_step: Some(k),
                max_mean_drift,
                final_state: u,
            });
        }
        let new_mean = u.iter().sum::<f64>() / u.len() as f64;
        max_mean_drift = max_mean_drift.max((new_mean - mean).abs() / mean.abs().max(f64::MIN_POSITIVE));
        mean = new_mean;
    }
    Ok(RunOutcome {
        status: RunStatus::Stable,
        steps_taken: steps,
        final_tv: tv,
        divergence_step: None,
        max_mean_drift,
        final_state: u,
    })
}

/// Predicted CFL exponent of a scheme (1 outside the shrinking regime).
pub fn predicted_exponent(scheme: &SchemeSpec) -> Result<f64> {
    Ok(analyze(scheme, 1.0, 24)?.prediction.exponent_f64())
}

/// First time-step guess from the linearized problem: the largest retained
/// mode has `|σ| = 10 π k_c`, and the thick-line condition gives
/// `δt = (2C/S_r)^{1/(2r-1)} |σ|^{-2r/(2r-1)}`; linear-CFL schemes get
/// `δt = 1/|σ|`.
pub fn predicted_dtmax(n: usize, scheme: &SchemeSpec, cfg: &BurgersConfig) -> Result<f64> {
    check_n(n)?;
    let cutoff = (cfg.dealias_fraction * (n / 2) as f64 + 1e-9).floor().max(1.0);
    let sigma = MEAN_SPEED * PI * cutoff;
    let pred = analyze(scheme, cfg.growth_rate, 24)?.prediction;
    Ok(match (pred.regime, pred.constant_factor) {
        (Regime::ShrinkingCfl, Some(c)) => c * sigma.powf(-pred.exponent_f64()),
        _ => 1.0 / sigma,
    })
}

/// Largest stable time step within the relative tolerance, starting from
/// the predicted value.
pub fn find_dtmax(n: usize, scheme: &SchemeSpec, cfg: &BurgersConfig) -> Result<f64> {
    find_dtmax_from(n, scheme, cfg, predicted_dtmax(n, scheme, cfg)?, cfg.bracket_factor)
}

/// Bracketing by geometric expansion from `guess` with ratio `factor`
/// (at most 20 expansions), then geometric bisection. Returns the
/// certified-stable end.
pub fn find_dtmax_from(n: usize, scheme: &SchemeSpec, cfg: &BurgersConfig, guess: f64, factor: f64) -> Result<f64> {
    cfg.validate()?;
    if !(guess > 0.0 && guess.is_finite()) || !(factor > 1.0) {
        return Err(Error::OutOfRange(format!("bad bracket guess {guess} or factor {factor}")));
    }
    let u0 = initial_condition(n)?;
    let stable = |dt: f64| run_with(&u0, dt, scheme, cfg).map(|o| o.is_stable());
    let (mut lo, mut hi);
    if stable(guess)? {
        lo = guess;
        hi = guess * factor;
        let mut tries = 0;
        while stable(hi)? {
            lo = hi;
            hi *= factor;
            tries += 1;
            if tries >= MAX_EXPANSIONS {
                return Err(Error::Bracketing(format!("still stable at dt = {lo:e} for n = {n}")));
            }
        }
    } else {
        hi = guess;
        lo = guess / factor;
        let mut tries = 0;
        while !stable(lo)? {
            hi = lo;
            lo /= factor;
            tries += 1;
            if tries >= MAX_EXPANSIONS {
                return Err(Error::Bracketing(format!("unstable down to dt = {hi:e} for n = {n}")));
            }
        }
    }
    while (hi - lo) / lo > cfg.tolerance {
        let mid = (lo * hi).sqrt();
        if stable(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRow {
    pub n: usize,
    pub dt_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub scheme: String,
    pub rows: Vec<SweepRow>,
    /// Grid sizes whose search failed.
    pub failures: Vec<(usize, Error)>,
    pub predicted_exponent: f64,
    pub fitted_slope: f64,
    pub fitted_log_constant: f64,
    pub fit_window: (usize, usize),
}

impl SweepResult {
    pub fn dt_at(&self, n: usize) -> Option<f64> {
        self.rows.iter().find(|r| r.n == n).map(|r| r.dt_max)
    }

    /// Columns `scheme,n,dt_max,predicted_exponent,fitted_slope`, then a
    /// `#` footer with the fit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("scheme,n,dt_max,predicted_exponent,fitted_slope\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{:.10e},{:.6},{:.6}",
                self.scheme, r.n, r.dt_max, self.predicted_exponent, self.fitted_slope
            );
        }
        for (n, e) in &self.failures {
            let _ = writeln!(out, "# failed n = {n}: {e}");
        }
        let _ = writeln!(
            out,
            "# fitted_slope = {:.6}, fitted_log_constant = {:.6}, fit window n = {}..{}",
            self.fitted_slope, self.fitted_log_constant, self.fit_window.0, self.fit_window.1
        );
        out
    }
}

/// Least-squares line through `(ln x, ln y)`: `(slope, intercept)`.
pub fn loglog_fit(points: &[(f64, f64)]) -> (f64, f64) {
    let m = points.len() as f64;
    let (sx, sy) = points.iter().fold((0.0, 0.0), |(a, b), (x, y)| (a + x.ln(), b + y.ln()));
    let (mx, my) = (sx / m, sy / m);
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for (x, y) in points {
        let dx = x.ln() - mx;
        sxx += dx * dx;
        sxy += dx * (y.ln() - my);
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { f64::NAN };
    (slope, my - slope * mx)
}

/// `δt_max` for every `n` of the ladder. From the second row on, the
/// search starts at the previous value extrapolated with the predicted
/// exponent and brackets with a ratio of 1.1. The slope is fitted over the
/// upper half of the successful rows.
pub fn sweep(scheme: &SchemeSpec, cfg: &BurgersConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let exponent = predicted_exponent(scheme)?;
    let mut rows: Vec<SweepRow> = Vec::new();
    let mut failures = Vec::new();
    for &n in &cfg.n_list {
        let found = match rows.last() {
            Some(prev) => {
                let guess = prev.dt_max * (prev.n as f64 / n as f64).powf(exponent);
                find_dtmax_from(n, scheme, cfg, guess, 1.1)
            }
            None => find_dtmax(n, scheme, cfg),
        };
        match found {
            Ok(dt_max) => rows.push(SweepRow { n, dt_max }),
            Err(e) => failures.push((n, e)),
        }
    }
    if rows.is_empty() {
        return Err(failures.into_iter().next().map(|(_, e)| e).expect("nonempty ladder"));
    }
    let tail = &rows[rows.len() / 2..];
    let tail = if tail.len() < 2 && rows.len() >= 2 { &rows[rows.len() - 2..] } else { tail };
    let points: Vec<(f64, f64)> = tail.iter().map(|r| (r.n as f64, r.dt_max)).collect();
    let (fitted_slope, fitted_log_constant) = loglog_fit(&points);
    Ok(SweepResult {
        scheme: scheme.name.clone(),
        rows: rows.clone(),
        failures,
        predicted_exponent: exponent,
        fitted_slope,
        fitted_log_constant,
        fit_window: (tail[0].n, tail[tail.len() - 1].n),
    })
}

/// Sweeps several schemes on `cfg.jobs` worker threads; results keep the
/// input order.
pub fn sweep_all(schemes: &[SchemeSpec], cfg: &BurgersConfig) -> Vec<Result<SweepResult>> {
    let pool = rayon::ThreadPoolBuilder::new().num_threads(cfg.jobs.max(1)).build();
    match pool {
        Ok(pool) => pool.install(|| schemes.par_iter().map(|s| sweep(s, cfg)).collect()),
        Err(_) => schemes.iter().map(|s| sweep(s, cfg)).collect(),
    }
}

/// Reference slopes drawn in sweep plots, as `(numerator, denominator)`.
pub const GUIDE_SLOPES: [(i64, i64); 5] = [(-2, 1), (-4, 3), (-6, 5), (-8, 7), (-1, 1)];

const SWEEP_PALETTE: [&str; 8] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#e377c2", "#17becf"];

/// Log-log plot of `δt_max` against `n` with dotted guide lines.
pub fn render_sweep_svg(results: &[SweepResult]) -> String {
    let (width, height, margin) = (800.0, 600.0, 60.0);
    let pts = results.iter().flat_map(|r| r.rows.iter());
    let (mut nmin, mut nmax, mut dmin, mut dmax) = (f64::INFINITY, 0.0f64, f64::INFINITY, 0.0f64);
    for r in pts {
        nmin = nmin.min(r.n as f64);
        nmax = nmax.max(r.n as f64);
        dmin = dmin.min(r.dt_max);
        dmax = dmax.max(r.dt_max);
    }
    if !nmin.is_finite() {
        (nmin, nmax, dmin, dmax) = (16.0, 1024.0, 1e-6, 1e-2);
    }
    let (lx0, lx1) = ((nmin / 1.2).log10(), (nmax * 1.2).log10());
    let (ly0, ly1) = ((dmin / 2.0).log10(), (dmax * 2.0).log10());
    let px = |n: f64| margin + (n.log10() - lx0) / (lx1 - lx0) * (width - 2.0 * margin);
    let py = |d: f64| height - margin - (d.log10() - ly0) / (ly1 - ly0) * (height - 2.0 * margin);

    let mut svg = String::new();
    let _ = writeln!(svg, r#"<?xml version="1.0" encoding="UTF-8" standalone="no"?>"#);
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>"#);
    let _ = writeln!(
        svg,
        r##"<rect x="{margin}" y="{margin}" width="{}" height="{}" fill="none" stroke="#888"/>"##,
        width - 2.0 * margin,
        height - 2.0 * margin
    );
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">n</text><text x="10" y="{:.2}" font-size="12" font-family="sans-serif">dt_max</text>"#,
        width / 2.0,
        height - 20.0,
        margin - 10.0
    );
    // guides through the upper-left corner of the data, clipped to the frame
    let anchor_n = nmin;
    let anchor_d = dmax;
    svg.push_str("<g class=\"guides\" stroke=\"#aaa\" stroke-width=\"1\" stroke-dasharray=\"2,3\">\n");
    for (p, q) in GUIDE_SLOPES {
        let slope = p as f64 / q as f64;
        let end_n = nmax * 1.2;
        let end_d = anchor_d * (end_n / anchor_n).powf(slope);
        let _ = writeln!(
            svg,
            r#"<line class="guide" data-slope="{p}/{q}" x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}"/>"#,
            px(anchor_n),
            py(anchor_d),
            px(end_n),
            py(end_d.max(10f64.powf(ly0)))
        );
    }
    svg.push_str("</g>\n");
    for (idx, r) in results.iter().enumerate() {
        let color = SWEEP_PALETTE[idx % SWEEP_PALETTE.len()];
        let line: Vec<String> = r.rows.iter().map(|row| format!("{:.2},{:.2}", px(row.n as f64), py(row.dt_max))).collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"/>"#,
            line.join(" ")
        );
        for row in &r.rows {
            let _ = writeln!(
                svg,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                px(row.n as f64),
                py(row.dt_max)
            );
        }
        let _ = writeln!(
            svg,
            r#"<g class="legend"><line x1="{:.2}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="{color}" stroke-width="2"/><text x="{:.2}" y="{:.2}" font-size="12" font-family="sans-serif">{} (slope {:.3})</text></g>"#,
            width - 250.0,
            width - 220.0,
            width - 212.0,
            margin + 18.0 * idx as f64 + 24.0,
            crate::stability_domain::xml_escape(&r.scheme),
            r.fitted_slope,
            y = margin + 18.0 * idx as f64 + 20.0
        );
    }
    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::catalog::builtin;
    use proptest::prelude::*;

    #[test]
    fn initial_condition_values() {
        let u = initial_condition(16).unwrap();
        assert_eq!(u.values[0], 10.0 - 0.1 * (-PI).sin());
        assert!((u.values[0] - 10.0).abs() < 1e-15);
        for n in [16, 64, 1024] {
            let u = initial_condition(n).unwrap();
            assert!((u.mean() - 10.0).abs() < 1e-12);
        }
        assert!((initial_condition(4096).unwrap().total_variation() - 0.4).abs() < 1e-3);
        assert!(initial_condition(100).is_err());
        assert!(initial_condition(8).is_err());
        assert!(GridState::new(vec![f64::NAN; 16], 0.0).is_err());
    }

    #[test]
    fn rhs_of_constant_vanishes() {
        let u = GridState::new(vec![3.5; 32], 0.0).unwrap();
        assert!(burgers_rhs(&u, DEFAULT_DEALIAS).unwrap().iter().all(|v| v.abs() < 1e-13));
    }

    #[test]
    fn rhs_of_sine() {
        let n = 64;
        let values = (0..n).map(|j| (PI * grid_point(n, j)).sin()).collect();
        let u = GridState::new(values, 0.0).unwrap();
        let f = burgers_rhs(&u, DEFAULT_DEALIAS).unwrap();
        let mut max: f64 = 0.0;
        for (j, fj) in f.iter().enumerate() {
            let x = grid_point(n, j);
            assert!((fj + (PI * x).sin() * PI * (PI * x).cos()).abs() < 1e-12);
            max = max.max(fj.abs());
        }
        assert!((max - PI / 2.0).abs() < 1e-10);
    }

    #[test]
    fn truncated_modes_are_zero() {
        let n = 64;
        let values = (0..n).map(|j| (3.0 * grid_point(n, j)).exp().sin()).collect();
        let u = GridState::new(values, 0.0).unwrap();
        let f = burgers_rhs(&u, DEFAULT_DEALIAS).unwrap();
        let mut op = BurgersOperator::new(n, DEFAULT_DEALIAS).unwrap();
        let spec = op.spectrum_of(&f);
        for (k, c) in spec.iter().enumerate() {
            if k > op.cutoff() {
                assert!(c.norm() < 1e-14, "mode {k} = {c}");
            }
        }
        let u0 = initial_condition(n).unwrap();
        let f0 = burgers_rhs(&u0, DEFAULT_DEALIAS).unwrap();
        assert!(op.spectrum_of(&f0)[0].norm() <= 1e-12 * 10.0);
    }

    #[test]
    fn zero_and_euler_steps() {
        let u0 = initial_condition(64).unwrap();
        for name in ["euler", "rk2", "rk4", "chain3"] {
            let s = builtin(name).unwrap();
            assert_eq!(step(&[u0.clone()], 0.0, &s, DEFAULT_DEALIAS).unwrap().values, u0.values);
        }
        let dt = 1e-5;
        let next = step(&[u0.clone()], dt, &builtin("euler").unwrap(), DEFAULT_DEALIAS).unwrap();
        let f = burgers_rhs(&u0, DEFAULT_DEALIAS).unwrap();
        for ((a, b), fj) in next.values.iter().zip(&u0.values).zip(&f) {
            assert_eq!(*a, b + dt * fj);
        }
    }

    #[test]
    fn rk2_matches_manual_composition() {
        let dt = 1e-4;
        let u0 = initial_condition(64).unwrap();
        let next = step(&[u0.clone()], dt, &builtin("rk2").unwrap(), DEFAULT_DEALIAS).unwrap();
        let f0 = burgers_rhs(&u0, DEFAULT_DEALIAS).unwrap();
        let half: Vec<f64> = u0.values.iter().zip(&f0).map(|(u, f)| u + 0.5 * dt * f).collect();
        let f1 = burgers_rhs(&GridState::new(half, 0.0).unwrap(), DEFAULT_DEALIAS).unwrap();
        for ((a, u), f) in next.values.iter().zip(&u0.values).zip(&f1) {
            assert!((a - (u + dt * f)).abs() < 1e-15 * 10.0);
        }
    }

    #[test]
    fn tableau_and_chain_agree_for_rk2() {
        let u0 = initial_condition(32).unwrap();
        let chain = builtin("rk2").unwrap();
        let tab = SchemeSpec::tableau("midpoint", vec![vec![1.0], vec![1.0, 0.0]], vec![vec![0.5], vec![0.0, 1.0]]).unwrap();
        let a = step(&[u0.clone()], 1e-3, &chain, DEFAULT_DEALIAS).unwrap();
        let b = step(&[u0], 1e-3, &tab, DEFAULT_DEALIAS).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert!((x - y).abs() < 1e-13);
        }
    }

    #[test]
    fn adams_bashforth_needs_history() {
        let u0 = initial_condition(32).unwrap();
        let ab2 = builtin("ab2").unwrap();
        assert!(matches!(
            step(&[u0.clone()], 1e-3, &ab2, DEFAULT_DEALIAS),
            Err(Error::InsufficientHistory { available: 1, required: 2 })
        ));
        let u1 = step(&[u0.clone()], 1e-3, &builtin("rk4").unwrap(), DEFAULT_DEALIAS).unwrap();
        let u2 = step(&[u0.clone(), u1.clone()], 1e-3, &ab2, DEFAULT_DEALIAS).unwrap();
        let f0 = burgers_rhs(&u0, DEFAULT_DEALIAS).unwrap();
        let f1 = burgers_rhs(&u1, DEFAULT_DEALIAS).unwrap();
        for j in 0..32 {
            let want = u1.values[j] + 1e-3 * (1.5 * f1[j] - 0.5 * f0[j]);
            assert!((u2.values[j] - want).abs() < 1e-14);
        }
        assert!(Integrator::new(&builtin("pseudo-leap-frog").unwrap(), 32, DEFAULT_DEALIAS).is_err());
    }

    #[test]
    fn exact_solution_properties() {
        for &x in &[-1.0, -0.3, 0.0, 0.7] {
            assert_eq!(exact_solution(x, 0.0).unwrap(), u0(x));
            for &t in &[0.1, 0.5, 1.0, 3.0] {
                let u = exact_solution(x, t).unwrap();
                assert!((u - 10.0).abs() <= 0.1 + 1e-15);
            }
        }
        assert!(exact_solution(0.0, 3.2).is_err());
        assert!(exact_solution(0.0, -0.1).is_err());
    }

    #[test]
    fn run_contract() {
        let u0 = initial_condition(32).unwrap();
        let rk4 = builtin("rk4").unwrap();
        assert!(run_until(&u0, 1.0, 1e-3, &rk4, 1.0).is_err());
        assert!(run_until(&u0, 1.0, 0.0, &rk4, 1.1).is_err());
        let out = run_until(&u0, 0.1, 0.03, &rk4, 1.1).unwrap();
        assert_eq!(out.steps_taken, 4);
        assert!(out.is_stable());
    }

    #[test]
    fn accurate_small_step_run() {
        let n = 64;
        let u0 = initial_condition(n).unwrap();
        let out = run_until(&u0, 1.0, 1e-4, &builtin("rk4").unwrap(), 1.1).unwrap();
        assert!(out.is_stable());
        let exact = exact_state(n, 1.0).unwrap();
        let err = out.final_state.iter().zip(&exact.values).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-4, "max error {err}");
        assert!(out.max_mean_drift < 1e-10);
    }

    #[test]
    fn oversized_steps_diverge() {
        let u0 = initial_condition(64).unwrap();
        let out = run_until(&u0, 1.0, 0.05, &builtin("euler").unwrap(), 1.1).unwrap();
        assert_eq!(out.status, RunStatus::Diverged);
        assert!(out.divergence_step.unwrap() <= out.steps_taken);
    }

    #[test]
    fn dtmax_search_small_grid() {
        let cfg = BurgersConfig::default();
        let rk2 = builtin("rk2").unwrap();
        let dt = find_dtmax(32, &rk2, &cfg).unwrap();
        let u0 = initial_condition(32).unwrap();
        assert!(run_with(&u0, dt, &rk2, &cfg).unwrap().is_stable());
        assert!(!run_with(&u0, dt * 1.03, &rk2, &cfg).unwrap().is_stable());
    }

    #[test]
    fn config_parsing() {
        let cfg = BurgersConfig::parse("T = 0.5\nK_tv=5 # snapshot\nn_ladder = 16..128\nbootstrap = exact\n").unwrap();
        assert_eq!(cfg.t_final, 0.5);
        assert_eq!(cfg.k_tv, 5.0);
        assert_eq!(cfg.n_list, vec![16, 32, 64, 128]);
        assert_eq!(cfg.bootstrap, Bootstrap::Exact);
        let cfg = BurgersConfig::parse("n_min = 32\nn_max = 64").unwrap();
        assert_eq!(cfg.n_list, vec![32, 64]);
        assert!(matches!(BurgersConfig::parse("T = 1\nbogus = 2"), Err(Error::Parse { line: 2, .. })));
        assert!(BurgersConfig::parse("K_tv = 1.0").is_err());
        assert_eq!(parse_n_list("16, 64"), Some(vec![16, 64]));
    }

    #[test]
    fn sweep_svg_has_guides() {
        let result = SweepResult {
            scheme: "a<b".into(),
            rows: vec![SweepRow { n: 16, dt_max: 1e-3 }, SweepRow { n: 32, dt_max: 4e-4 }],
            failures: vec![],
            predicted_exponent: 4.0 / 3.0,
            fitted_slope: -1.3,
            fitted_log_constant: 0.0,
            fit_window: (16, 32),
        };
        let svg = render_sweep_svg(&[result]);
        for g in ["-2/1", "-4/3", "-6/5", "-8/7", "-1/1"] {
            assert!(svg.contains(&format!("data-slope=\"{g}\"")));
        }
        assert!(svg.contains("a&lt;b"));
        assert_eq!(svg.matches("<circle").count(), 2);
    }

    #[test]
    fn loglog_fit_recovers_power_law() {
        let pts: Vec<(f64, f64)> = [16.0, 32.0, 64.0].iter().map(|&n: &f64| (n, 3.0 * n.powf(-1.5))).collect();
        let (s, c) = loglog_fit(&pts);
        assert!((s + 1.5).abs() < 1e-12 && (c - 3f64.ln()).abs() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn mean_is_conserved(coeffs in proptest::collection::vec(-1.0..1.0f64, 1..6), dt in 1e-4..2e-3f64) {
            let n = 64;
            let values: Vec<f64> = (0..n)
                .map(|j| {
                    let x = grid_point(n, j);
                    5.0 + coeffs.iter().enumerate().map(|(k, c)| c * (PI * (k + 1) as f64 * x).sin()).sum::<f64>()
                })
                .collect();
            let u = GridState::new(values, 0.0).unwrap();
            let next = step(&[u.clone()], dt, &builtin("rk4").unwrap(), DEFAULT_DEALIAS).unwrap();
            prop_assert!((next.mean() - u.mean()).abs() <= 1e-10 * u.mean().abs());
        }

        #[test]
        fn exact_solution_satisfies_characteristics(x in -1.0..1.0f64, t in 0.0..3.0f64) {
            let u = exact_solution(x, t).unwrap();
            // the foot a = x - u t must carry the same value
            prop_assert!((u0(x - u * t) - u).abs() < 1e-12);
        }
    }
}
