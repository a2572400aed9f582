//! Constrained steepest descent on the manifold `|w|^2 = 2` of the weighted
//! H1 space: clipping, shift normalisation, one backtracking step and the
//! full minimisation loop.

use crate::energy::{energy_jc, mu_multiplier, EnergyBreakdown};
use crate::error::{Error, Result};
use crate::grid::{norm_h1exp_sq, shift_grid, Grid, Profile};
use crate::model::ModelParams;
use crate::nonlocal::NonlocalSolver;
use crate::scalar::{max_abs, Real};

/// Step-size control and stopping tolerances.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DescentConfig<T> {
    /// Backtracking reduction factor.
    pub theta: T,
    /// Initial (and maximal) normalised step.
    pub alpha1_init: T,
    /// Relative energy tolerance.
    pub delta1: T,
    /// Absolute energy tolerance.
    pub delta2: T,
    /// Sup-norm tolerance on the change of the samples.
    pub delta3: T,
    pub max_iters: usize,
    pub max_backtracks: usize,
}

impl<T: Real> DescentConfig<T> {
    /// Defaults used for pulses on the line.
    pub fn line() -> Self {
        Self {
            theta: T::lit(0.5),
            alpha1_init: T::lit(1e-3),
            delta1: T::lit(1e-8),
            delta2: T::lit(1e-14),
            delta3: T::lit(1e-3),
            max_iters: 200_000,
            max_backtracks: 60,
        }
    }

    /// Defaults used on the strip.
    pub fn strip() -> Self {
        Self {
            delta1: T::lit(1e-6),
            delta2: T::lit(1e-12),
            ..Self::line()
        }
    }

    pub fn for_dim(dim: usize) -> Self {
        if dim == 2 {
            Self::strip()
        } else {
            Self::line()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (zero, one) = (T::zero(), T::one());
        let open_unit = |key: &str, x: T| {
            if x > zero && x < one {
                Ok(())
            } else {
                Err(Error::validation(key, format!("must lie in (0, 1), got {x}")))
            }
        };
        open_unit("theta", self.theta)?;
        open_unit("alpha1_init", self.alpha1_init)?;
        open_unit("delta1", self.delta1)?;
        open_unit("delta2", self.delta2)?;
        open_unit("delta3", self.delta3)?;
        if self.delta2 >= self.delta1 {
            return Err(Error::validation("delta2", "must be smaller than delta1"));
        }
        if self.max_iters == 0 {
            return Err(Error::validation("max_iters", "must be positive"));
        }
        Ok(())
    }
}

/// One point of the descent: `v = L_c w`, the multiplier and the energy.
#[derive(Clone, Debug)]
pub struct DescentState<T> {
    pub w: Profile<T>,
    pub v: Profile<T>,
    pub mu: T,
    pub energy: EnergyBreakdown<T>,
    pub alpha1: T,
    pub iter: usize,
}

/// Per-iteration diagnostics.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRecord<T> {
    pub iter: usize,
    pub energy: EnergyBreakdown<T>,
    pub alpha1: T,
    pub backtracks: usize,
    pub sup_step: T,
    /// `max |Q - (d c^2 + mu) w|`, the update for a unit step.
    pub direction_sup: T,
}

/// Result of one call to [`Descent::step`].
#[derive(Clone, Debug)]
pub enum StepOutcome<T> {
    Accepted { state: DescentState<T>, record: TraceRecord<T> },
    /// The tangent direction vanished: `w` is a constrained critical point.
    Critical(DescentState<T>),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum StopReason {
    /// Both the energy and the profile tolerances were met.
    Converged,
    /// The descent direction vanished.
    CriticalPoint,
    IterationCap,
    BacktrackFailure,
}

#[derive(Clone, Debug)]
pub struct MinimizeResult<T> {
    pub w: Profile<T>,
    pub v: Profile<T>,
    pub energy: EnergyBreakdown<T>,
    pub iters: usize,
    pub converged: bool,
    pub reason: StopReason,
}

impl<T: Real> MinimizeResult<T> {
    /// The minimal energy `J(c)`.
    pub fn j(&self) -> T {
        self.energy.total
    }
}

// positive run around the rightmost global maximum, if max > 0
fn principal_interval<T: Real>(s: &[T]) -> Option<(usize, usize)> {
    let top = s.iter().fold(T::neg_infinity(), |m, &x| m.max(x));
    if top <= T::zero() {
        return None;
    }
    let peak = s.iter().rposition(|&x| x == top)?;
    let mut lo = peak;
    while lo > 0 && s[lo - 1] > T::zero() {
        lo -= 1;
    }
    let mut hi = peak;
    while hi + 1 < s.len() && s[hi + 1] > T::zero() {
        hi += 1;
    }
    Some((lo, hi))
}

/// Zeroes every positive sample outside the positive interval around the
/// rightmost global maximum. Profiles on a strip are returned unchanged.
pub fn clip<T: Real>(w: &Profile<T>) -> Profile<T> {
    if w.grid().dim() != 1 {
        return w.clone();
    }
    let s = w.samples();
    let Some((lo, hi)) = principal_interval(s) else {
        return w.clone();
    };
    let out = s
        .iter()
        .enumerate()
        .map(|(j, &x)| if x > T::zero() && (j < lo || j > hi) { T::zero() } else { x })
        .collect();
    Profile::from_parts(w.grid().clone(), out)
}

/// Sets the samples of the rightmost column to zero. Descent directions
/// vanish there, so the column stays zero for the whole run.
pub fn pin_right_end<T: Real>(w: &Profile<T>) -> Profile<T> {
    let g = w.grid();
    let mut out = w.samples().to_vec();
    for k in 0..g.rows() {
        out[g.index(g.n_x(), k)] = T::zero();
    }
    Profile::from_parts(g.clone(), out)
}

/// Translates `w` so that its squared weighted H1 norm becomes 2.
pub fn shift_normalize<T: Real>(w: &Profile<T>) -> Result<Profile<T>> {
    let omega = T::lit(0.5) * norm_h1exp_sq(w)?;
    if !(omega > T::zero() && omega.is_finite()) {
        return Err(Error::invalid(format!("cannot normalise a profile with norm^2 = {}", omega + omega)));
    }
    shift_grid(w, -omega.ln())
}

/// Width of the ambient region kept ahead of the initial square wave.
pub const FRONT_MARGIN: f64 = 20.0;

/// Edge width of the smoothed square wave. A one-cell jump dominates the
/// weighted norm and pins the descent at an energy close to `d c^2`.
pub const EDGE_WIDTH: f64 = 1.0;

/// Cold start on the line: a square wave equal to 1 on `[-5, 5]` with
/// `tanh` edges, on a grid of `n_x` cells of width `h` ending
/// [`FRONT_MARGIN`] past the pulse.
pub fn square_wave<T: Real>(h: T, n_x: usize) -> Result<Profile<T>> {
    let right = T::lit(5.0 + FRONT_MARGIN);
    let grid = Grid::line(right - h * T::of_usize(n_x), h, n_x)?;
    Profile::from_fn(grid, |x, _| plateau(x))
}

/// Cold start on a strip of half-width `half_width`: the square wave times
/// the first transverse mode.
pub fn mode_product<T: Real>(h: T, n_x: usize, half_width: T, n_y: usize) -> Result<Profile<T>> {
    let right = T::lit(5.0 + FRONT_MARGIN);
    let grid = Grid::strip(right - h * T::of_usize(n_x), h, n_x, half_width, n_y)?;
    let two_l = half_width + half_width;
    Profile::from_fn(grid, |x, y| plateau(x) * (T::PI() * (y + half_width) / two_l).sin())
}

fn plateau<T: Real>(x: T) -> T {
    let (five, width) = (T::lit(5.0), T::lit(EDGE_WIDTH));
    T::lit(0.5) * (((x + five) / width).tanh() - ((x - five) / width).tanh())
}

/// The descent engine for one speed: factored solvers plus configuration.
#[derive(Clone, Debug)]
pub struct Descent<T> {
    solver: NonlocalSolver<T>,
    cfg: DescentConfig<T>,
}

impl<T: Real> Descent<T> {
    pub fn new(params: &ModelParams<T>, grid: &Grid<T>, cfg: DescentConfig<T>) -> Result<Self> {
        cfg.validate()?;
        Ok(Self {
            solver: NonlocalSolver::new(params, grid)?,
            cfg,
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        self.solver.params()
    }

    pub fn config(&self) -> &DescentConfig<T> {
        &self.cfg
    }

    /// Evaluates `v`, the multiplier and the energy at `w`.
    pub fn state_at(&self, w: Profile<T>, alpha1: T, iter: usize) -> Result<DescentState<T>> {
        let p = self.solver.params();
        let v = self.solver.apply_lc(&w)?;
        let mu = mu_multiplier(&w, &v, p)?;
        let energy = energy_jc(&w, &v, p)?;
        Ok(DescentState {
            w,
            v,
            mu,
            energy,
            alpha1,
            iter,
        })
    }

    /// Clips and normalises `w0`, then evaluates the starting state.
    pub fn initial_state(&self, w0: &Profile<T>) -> Result<DescentState<T>> {
        if !self.solver.matches(w0.grid()) {
            return Err(Error::GridMismatch);
        }
        if w0.max_value() <= T::zero() {
            return Err(Error::invalid("initial profile must be positive somewhere"));
        }
        let w = shift_normalize(&clip(&pin_right_end(w0)))?;
        self.state_at(w, self.cfg.alpha1_init, 0)
    }

    /// One descent iteration with backtracking on the energy.
    pub fn step(&self, state: &DescentState<T>) -> Result<StepOutcome<T>> {
        let p = self.solver.params();
        let q = self.solver.solve_wstar_pinned(&state.w, &state.v)?;
        let direction = q.lin_comb(T::one(), &state.w, -(p.dc2() + state.mu))?;
        let scale = max_abs(direction.samples());
        let floor = T::lit(1e-14) * T::one().max(state.w.sup_norm());
        if scale <= floor {
            return Ok(StepOutcome::Critical(state.clone()));
        }
        let mut alpha1 = state.alpha1;
        for backtracks in 0..=self.cfg.max_backtracks {
            let trial = state.w.lin_comb(T::one(), &direction, alpha1 / scale)?;
            let candidate = shift_normalize(&clip(&trial))?;
            let next_alpha = (T::lit(1.1) * alpha1).min(self.cfg.alpha1_init);
            let next = self.state_at(candidate, next_alpha, state.iter + 1)?;
            if next.energy.total <= state.energy.total {
                let record = TraceRecord {
                    iter: next.iter,
                    energy: next.energy,
                    alpha1,
                    backtracks,
                    sup_step: next.w.sup_diff(&state.w)?,
                    direction_sup: scale,
                };
                return Ok(StepOutcome::Accepted { state: next, record });
            }
            alpha1 = alpha1 * self.cfg.theta;
        }
        Err(Error::BacktrackFailure {
            iter: state.iter,
            backtracks: self.cfg.max_backtracks,
            alpha1: alpha1.to_f64_lossy(),
        })
    }

    /// Whether the step from `prev` to `next` meets both stopping clauses.
    pub fn stop_test(&self, prev: &EnergyBreakdown<T>, next: &EnergyBreakdown<T>, sup_step: T) -> bool {
        let slack = (self.cfg.delta1 * next.total.abs()).max(self.cfg.delta2);
        prev.total <= next.total + slack && sup_step <= self.cfg.delta3
    }

    pub fn minimize(&self, w0: &Profile<T>) -> Result<MinimizeResult<T>> {
        self.minimize_traced(w0, |_| {})
    }

    /// Runs the descent loop, reporting every accepted step to `observer`.
    pub fn minimize_traced(&self, w0: &Profile<T>, mut observer: impl FnMut(&TraceRecord<T>)) -> Result<MinimizeResult<T>> {
        let mut state = self.initial_state(w0)?;
        let finish = |s: DescentState<T>, reason: StopReason| MinimizeResult {
            iters: s.iter,
            converged: matches!(reason, StopReason::Converged | StopReason::CriticalPoint),
            reason,
            w: s.w,
            v: s.v,
            energy: s.energy,
        };
        while state.iter < self.cfg.max_iters {
            match self.step(&state) {
                Ok(StepOutcome::Accepted { state: next, record }) => {
                    observer(&record);
                    let done = self.stop_test(&state.energy, &next.energy, record.sup_step);
                    state = next;
                    if done {
                        return Ok(finish(state, StopReason::Converged));
                    }
                }
                Ok(StepOutcome::Critical(s)) => return Ok(finish(s, StopReason::CriticalPoint)),
                Err(Error::BacktrackFailure { iter, backtracks, alpha1 }) => {
                    log::warn!("backtracking failed at iteration {iter} ({backtracks} reductions, alpha1 = {alpha1:e})");
                    return Ok(finish(state, StopReason::BacktrackFailure));
                }
                Err(e) => return Err(e),
            }
        }
        Ok(finish(state, StopReason::IterationCap))
    }
}

/// One descent iteration from `state` (builds the solvers for this call).
pub fn descent_step<T: Real>(state: &DescentState<T>, params: &ModelParams<T>, cfg: &DescentConfig<T>) -> Result<StepOutcome<T>> {
    Descent::new(params, state.w.grid(), *cfg)?.step(state)
}

/// Minimises the energy at speed `params.c` starting from `w0`.
pub fn minimize<T: Real>(w0: &Profile<T>, params: &ModelParams<T>, cfg: &DescentConfig<T>) -> Result<MinimizeResult<T>> {
    Descent::new(params, w0.grid(), *cfg)?.minimize(w0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(n: usize) -> Grid<f64> {
        Grid::line(-2.0, 0.5, n).unwrap()
    }

    #[test]
    fn clip_keeps_nonpositive_profiles() {
        let w = Profile::new(line(6), vec![0.0, -1.0, -0.5, 0.0, -2.0, -0.1, 0.0]).unwrap();
        assert_eq!(clip(&w), w);
    }

    #[test]
    fn clip_removes_secondary_bump() {
        // grid x = -2, -1.5, ..., 8 (h = 0.5); main bump on (0, 2), secondary on (4, 6)
        let g = Grid::line(-2.0, 0.5, 20).unwrap();
        let w = Profile::from_fn(g, |x: f64, _| {
            if x > 0.0 && x < 2.0 {
                1.0 - (x - 1.0).abs()
            } else if x > 4.0 && x < 6.0 {
                0.3 * (1.0 - (x - 5.0).abs())
            } else if x < 0.0 {
                -0.2
            } else {
                0.0
            }
        })
        .unwrap();
        let clipped = clip(&w);
        for j in 0..=20 {
            let x = w.grid().x(j);
            let expected = if x > 4.0 && x < 6.0 { 0.0 } else { w.samples()[j] };
            assert_eq!(clipped.samples()[j], expected, "x = {x}");
        }
    }

    #[test]
    fn clip_uses_rightmost_maximum() {
        let w = Profile::new(line(8), vec![0.0, 1.0, 0.5, -0.1, 0.2, 1.0, 0.4, 0.0, 0.0]).unwrap();
        let c = clip(&w);
        assert_eq!(c.samples(), &[0.0, 0.0, 0.0, -0.1, 0.2, 1.0, 0.4, 0.0, 0.0]);
    }

    #[test]
    fn shift_normalize_reaches_unit_manifold() {
        let g = Grid::line(-10.0, 0.01, 1000).unwrap();
        let w = Profile::from_fn(g, |x: f64, _| (-(x + 5.0).powi(2)).exp()).unwrap();
        let n2 = norm_h1exp_sq(&w).unwrap();
        let scaled = w.map(|x| x * (8.0 / n2).sqrt());
        let s = shift_normalize(&scaled).unwrap();
        assert!((s.grid().origin() - (-10.0 - 4f64.ln())).abs() < 1e-12);
        assert!((norm_h1exp_sq(&s).unwrap() - 2.0).abs() < 1e-13);
        let again = shift_normalize(&s).unwrap();
        assert!((again.grid().origin() - s.grid().origin()).abs() < 1e-13);
        assert!(shift_normalize(&Profile::zeros(w.grid().clone())).is_err());
    }

    #[test]
    fn config_validation() {
        assert!(DescentConfig::<f64>::line().validate().is_ok());
        assert!(DescentConfig::<f64>::strip().validate().is_ok());
        let bad = DescentConfig { theta: 1.0, ..DescentConfig::<f64>::line() };
        assert!(bad.validate().is_err());
        let swapped = DescentConfig { delta2: 1e-6, delta1: 1e-8, ..DescentConfig::<f64>::line() };
        assert!(swapped.validate().is_err());
    }

    #[test]
    fn square_wave_is_placed_ahead_of_margin() {
        let w = square_wave(0.01f64, 4000).unwrap();
        assert!((w.grid().right_end() - 25.0).abs() < 1e-9);
        let peak = w.max_value();
        assert!(peak > 0.9999 && peak <= 1.0);
        let above = w.samples().iter().filter(|&&x| x > 0.5).count();
        assert!((999..=1001).contains(&above), "{above}");
    }
}
