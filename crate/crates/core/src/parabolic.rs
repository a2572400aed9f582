//! Stability test for computed pulses: the time-dependent system is evolved
//! in a window that moves one grid cell per time step, so a correct pulse
//! stays put.

use crate::error::{Error, Result};
use crate::grid::{check_same_grid, Grid, Profile};
use crate::model::{eigen_nu, f_cubic, f_cubic_prime, ModelParams};
use crate::nonlocal::{apply_lc, sine_table, sine_transform, Tridiagonal};
use crate::scalar::{max_abs, Real};

/// `u` and `v` in physical coordinates at one instant.
#[derive(Clone, Debug)]
pub struct PhysicalState<T> {
    pub u: Profile<T>,
    pub v: Profile<T>,
    pub time: T,
}

impl<T: Real> PhysicalState<T> {
    pub fn new(u: Profile<T>, v: Profile<T>, time: T) -> Result<Self> {
        check_same_grid(&u, &v)?;
        if !time.is_finite() {
            return Err(Error::invalid("state time must be finite"));
        }
        Ok(Self { u, v, time })
    }

    pub fn zeros(grid: Grid<T>) -> Self {
        Self {
            u: Profile::zeros(grid.clone()),
            v: Profile::zeros(grid),
            time: T::zero(),
        }
    }

    pub fn grid(&self) -> &Grid<T> {
        self.u.grid()
    }

    pub fn window_origin(&self) -> T {
        self.u.grid().origin()
    }
}

/// Turns a minimizer in the co-moving variable `z = c x` into the physical
/// pulse: `u(x) = w(c x)`, `v` the inhibitor, both on the relabelled grid.
pub fn rescale_to_physical<T: Real>(w: &Profile<T>, params: &ModelParams<T>) -> Result<PhysicalState<T>> {
    let v = apply_lc(w, params)?;
    let grid = w.grid().rescaled(params.c)?;
    PhysicalState::new(w.with_grid(grid.clone())?, v.with_grid(grid)?, T::zero())
}

/// Reaction term of the activator equation (before division by `d`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Reaction {
    Cubic,
    /// `-beta u`, the linearisation at rest; used for convergence studies.
    Linear,
}

/// Closure at the outflow (left) edge of the window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Outflow {
    /// Robin conditions built from the decaying mode of the inhibitor.
    Asymptotic,
    /// Homogeneous Neumann for both fields.
    Neumann,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EvolveOptions<T> {
    pub newton_tol: T,
    pub newton_max_iters: usize,
    /// Relative residual of the preconditioned Krylov solve in 2D.
    pub linear_tol: T,
    pub reaction: Reaction,
    pub outflow: Outflow,
    /// Advance the window origin by one cell after each step.
    pub move_window: bool,
    /// Stop early once `max u` falls below this fraction of its initial value.
    pub collapse_fraction: Option<T>,
}

impl<T: Real> Default for EvolveOptions<T> {
    fn default() -> Self {
        Self {
            newton_tol: T::lit(1e-10),
            newton_max_iters: 25,
            linear_tol: T::lit(1e-10),
            reaction: Reaction::Cubic,
            outflow: Outflow::Asymptotic,
            move_window: true,
            collapse_fraction: None,
        }
    }
}

/// Source terms `(g_u, g_v)` at `(x, y, t)`, added to the right-hand sides.
pub type Forcing<'a, T> = &'a dyn Fn(T, T, T) -> (T, T);

/// Result of a run that may stop early.
#[derive(Clone, Debug)]
pub struct Evolution<T> {
    pub state: PhysicalState<T>,
    pub steps: usize,
    pub collapsed: bool,
}

/// Factored `a I - b Lap` on the unknowns of one window shape (every row,
/// columns `0..n_x`; the last column is the zero inflow value).
struct Implicit<T> {
    modes: Vec<Tridiagonal<T>>,
    sine: Vec<T>,
    rows: usize,
    n: usize,
}

impl<T: Real> Implicit<T> {
    fn new(a: T, b: T, lap: &Laplacian<T>, shift: Option<&[T]>) -> Self {
        let n = lap.n;
        let inv_h2 = (lap.h * lap.h).recip();
        let mut lower = vec![-b * inv_h2; n];
        let mut upper = vec![-b * inv_h2; n];
        lower[0] = T::zero();
        upper[0] = -T::lit(2.0) * b * inv_h2;
        upper[n - 1] = T::zero();
        let mut diag = vec![a + T::lit(2.0) * b * inv_h2; n];
        diag[0] = a + b * (T::lit(2.0) + T::lit(2.0) * lap.h * lap.sigma) * inv_h2;
        if let Some(extra) = shift {
            for (d, &e) in diag.iter_mut().zip(extra) {
                *d = *d + e;
            }
        }
        match lap.n_y {
            None => Self {
                modes: vec![Tridiagonal::factor(lower, &diag, &upper)],
                sine: Vec::new(),
                rows: 1,
                n,
            },
            Some(ny) => {
                let hy = lap.h_y;
                let modes = (1..ny)
                    .map(|m| {
                        let s = (T::PI() * T::of_usize(m) / T::of_usize(2 * ny)).sin();
                        let mu = -T::lit(4.0) * s * s / (hy * hy);
                        let shifted: Vec<T> = diag.iter().map(|&d| d - b * mu).collect();
                        Tridiagonal::factor(lower.clone(), &shifted, &upper)
                    })
                    .collect();
                Self {
                    modes,
                    sine: sine_table(ny),
                    rows: ny - 1,
                    n,
                }
            }
        }
    }

    fn solve(&self, rhs: &mut Vec<T>) {
        if self.rows == 1 && self.sine.is_empty() {
            self.modes[0].solve_in_place(rhs);
            return;
        }
        let (r, n) = (self.rows, self.n);
        let mut modes = sine_transform(&self.sine, rhs, r, n);
        for (m, fac) in self.modes.iter().enumerate() {
            fac.solve_in_place(&mut modes[m * n..(m + 1) * n]);
        }
        let back = sine_transform(&self.sine, &modes, r, n);
        let scale = T::lit(2.0) / T::of_usize(r + 1);
        for (o, b) in rhs.iter_mut().zip(back) {
            *o = scale * b;
        }
    }
}

/// Discrete Laplacian on the unknowns, with the left ghost value eliminated
/// through `u_x - sigma u = g` and zero at the right edge and strip walls.
struct Laplacian<T> {
    h: T,
    h_y: T,
    sigma: T,
    n: usize,
    n_y: Option<usize>,
}

impl<T: Real> Laplacian<T> {
    fn rows(&self) -> usize {
        self.n_y.map_or(1, |ny| ny - 1)
    }

    fn apply(&self, u: &[T], out: &mut [T]) {
        let n = self.n;
        let inv_h2 = (self.h * self.h).recip();
        let two = T::lit(2.0);
        let rows = self.rows();
        for r in 0..rows {
            let row = &u[r * n..(r + 1) * n];
            let dst = &mut out[r * n..(r + 1) * n];
            dst[0] = (two * row[1] - (two + two * self.h * self.sigma) * row[0]) * inv_h2;
            for j in 1..n - 1 {
                dst[j] = (row[j + 1] - two * row[j] + row[j - 1]) * inv_h2;
            }
            dst[n - 1] = (row[n - 2] - two * row[n - 1]) * inv_h2;
        }
        if self.n_y.is_some() {
            let inv_hy2 = (self.h_y * self.h_y).recip();
            for r in 0..rows {
                for j in 0..n {
                    let up = if r + 1 < rows { u[(r + 1) * n + j] } else { T::zero() };
                    let down = if r > 0 { u[(r - 1) * n + j] } else { T::zero() };
                    out[r * n + j] = out[r * n + j] + (up - two * u[r * n + j] + down) * inv_hy2;
                }
            }
        }
    }

    // contribution of the Robin data g to the first column
    fn data_weight(&self) -> T {
        -T::lit(2.0) / self.h
    }
}

/// Staggered Crank-Nicolson stepper for one window shape.
pub struct MovingWindow<T> {
    d: T,
    gamma: T,
    beta: T,
    dt: T,
    // v_x - sigma v = v_data * u at the left edge
    v_data: T,
    opts: EvolveOptions<T>,
    lap: Laplacian<T>,
    v_solve: Implicit<T>,
    u_precond: Option<Implicit<T>>,
    grid_shape: Grid<T>,
}

impl<T: Real> MovingWindow<T> {
    /// `params` supplies `d, gamma, beta` (and `L` in 2D); `c` sets the
    /// window speed and `dt = h_x / c`.
    pub fn new(params: &ModelParams<T>, c: T, grid: &Grid<T>, opts: EvolveOptions<T>) -> Result<Self> {
        if !(c > T::zero() && c.is_finite()) {
            return Err(Error::invalid(format!("window speed must be positive, got {c}")));
        }
        if grid.n_x() < 4 {
            return Err(Error::invalid("window needs n_x >= 4"));
        }
        if opts.newton_max_iters == 0 || !(opts.newton_tol > T::zero()) || !(opts.linear_tol > T::zero()) {
            return Err(Error::invalid("newton and linear tolerances must be positive"));
        }
        let at_speed = params.with_speed(c)?;
        let (sigma, v_data) = match opts.outflow {
            Outflow::Asymptotic => {
                let nu = eigen_nu(&at_speed);
                (c * nu.nu2, (nu.nu1 * c).recip())
            }
            Outflow::Neumann => (T::zero(), T::zero()),
        };
        let strip = grid.strip_info();
        let lap = Laplacian {
            h: grid.h(),
            h_y: grid.h_y().unwrap_or(T::one()),
            sigma,
            n: grid.n_x(),
            n_y: strip.map(|s| s.n_y),
        };
        let dt = grid.h() / c;
        let half_dt = T::lit(0.5) * dt;
        let v_solve = Implicit::new(T::one() + params.gamma * half_dt, half_dt, &lap, None);
        let u_precond = strip.map(|_| Implicit::new(T::one(), half_dt, &lap, None));
        Ok(Self {
            d: params.d,
            gamma: params.gamma,
            beta: params.beta,
            dt,
            v_data,
            opts,
            lap,
            v_solve,
            u_precond,
            grid_shape: grid.clone(),
        })
    }

    pub fn dt(&self) -> T {
        self.dt
    }

    fn reaction(&self, u: T) -> T {
        match self.opts.reaction {
            Reaction::Cubic => f_cubic(u, self.beta),
            Reaction::Linear => -self.beta * u,
        }
    }

    fn reaction_prime(&self, u: T) -> T {
        match self.opts.reaction {
            Reaction::Cubic => f_cubic_prime(u, self.beta),
            Reaction::Linear => -self.beta,
        }
    }

    fn unknowns(&self, p: &Profile<T>) -> Vec<T> {
        let n = self.lap.n;
        let mut out = Vec::with_capacity(self.lap.rows() * n);
        for k in self.row_indices() {
            out.extend((0..n).map(|j| p.at(j, k)));
        }
        out
    }

    fn row_indices(&self) -> std::ops::Range<usize> {
        match self.lap.n_y {
            Some(ny) => 1..ny,
            None => 0..1,
        }
    }

    fn to_profile(&self, grid: &Grid<T>, x: &[T]) -> Profile<T> {
        let n = self.lap.n;
        let mut samples = vec![T::zero(); grid.len()];
        for (r, k) in self.row_indices().enumerate() {
            for j in 0..n {
                samples[grid.index(j, k)] = x[r * n + j];
            }
        }
        Profile::from_parts(grid.clone(), samples)
    }

    fn forcing_values(&self, grid: &Grid<T>, t: T, forcing: Option<Forcing<'_, T>>) -> Option<(Vec<T>, Vec<T>)> {
        let f = forcing?;
        let n = self.lap.n;
        let mut gu = Vec::with_capacity(self.lap.rows() * n);
        let mut gv = Vec::with_capacity(self.lap.rows() * n);
        for k in self.row_indices() {
            for j in 0..n {
                let (a, b) = f(grid.x(j), grid.y(k), t);
                gu.push(a);
                gv.push(b);
            }
        }
        Some((gu, gv))
    }

    // v at t + dt/2 from v at t by one backward-Euler half step
    fn bootstrap_v(&self, u: &[T], v: &[T], grid: &Grid<T>, t: T, forcing: Option<Forcing<'_, T>>) -> Vec<T> {
        let half_dt = T::lit(0.5) * self.dt;
        let src = self.forcing_values(grid, t + half_dt, forcing);
        let mut rhs: Vec<T> = v
            .iter()
            .zip(u)
            .enumerate()
            .map(|(i, (&vi, &ui))| {
                let g = src.as_ref().map_or(T::zero(), |s| s.1[i]);
                vi + half_dt * (ui + g)
            })
            .collect();
        self.add_v_data(&mut rhs, u, half_dt);
        self.v_solve.solve(&mut rhs);
        rhs
    }

    fn add_v_data(&self, rhs: &mut [T], u: &[T], scale: T) {
        let n = self.lap.n;
        let w = self.lap.data_weight();
        for r in 0..self.lap.rows() {
            rhs[r * n] = rhs[r * n] + scale * w * self.v_data * u[r * n];
        }
    }

    // v at t + 3dt/2 from v at t + dt/2, with u at t + dt
    fn advance_v(&self, v_half: &[T], u_mid: &[T], grid: &Grid<T>, t_mid: T, forcing: Option<Forcing<'_, T>>) -> Vec<T> {
        let half_dt = T::lit(0.5) * self.dt;
        let mut lap_v = vec![T::zero(); v_half.len()];
        self.lap.apply(v_half, &mut lap_v);
        let src = self.forcing_values(grid, t_mid, forcing);
        let keep = T::one() - self.gamma * half_dt;
        let mut rhs: Vec<T> = (0..v_half.len())
            .map(|i| {
                let g = src.as_ref().map_or(T::zero(), |s| s.1[i]);
                keep * v_half[i] + half_dt * lap_v[i] + self.dt * (u_mid[i] + g)
            })
            .collect();
        self.add_v_data(&mut rhs, u_mid, self.dt);
        self.v_solve.solve(&mut rhs);
        rhs
    }

    // u at t + dt from u at t, with v at t + dt/2
    fn advance_u(&self, u: &[T], v_half: &[T], grid: &Grid<T>, t: T, forcing: Option<Forcing<'_, T>>) -> Result<Vec<T>> {
        let dt = self.dt;
        let half_dt = T::lit(0.5) * dt;
        let k = half_dt / self.d;
        let mut lap_u = vec![T::zero(); u.len()];
        self.lap.apply(u, &mut lap_u);
        let src = self.forcing_values(grid, t + half_dt, forcing);
        // everything in the residual that does not depend on the new u
        let fixed: Vec<T> = (0..u.len())
            .map(|i| {
                let g = src.as_ref().map_or(T::zero(), |s| s.0[i]);
                u[i] + half_dt * lap_u[i] + k * self.reaction(u[i]) - dt / self.d * v_half[i] + dt * g
            })
            .collect();
        let mut next = u.to_vec();
        let mut lap_next = vec![T::zero(); u.len()];
        let tol = self.opts.newton_tol.max(T::epsilon() * T::lit(16.0));
        let mut residual_norm = T::infinity();
        for _ in 0..self.opts.newton_max_iters {
            self.lap.apply(&next, &mut lap_next);
            let residual: Vec<T> = (0..u.len())
                .map(|i| next[i] - half_dt * lap_next[i] - k * self.reaction(next[i]) - fixed[i])
                .collect();
            residual_norm = max_abs(&residual);
            let scale = T::one().max(max_abs(&next));
            if residual_norm <= tol * scale {
                return Ok(next);
            }
            let jac_shift: Vec<T> = next.iter().map(|&x| -k * self.reaction_prime(x)).collect();
            let mut delta: Vec<T> = residual.iter().map(|&r| -r).collect();
            match &self.u_precond {
                None => Implicit::new(T::one(), half_dt, &self.lap, Some(&jac_shift)).solve(&mut delta),
                Some(pre) => {
                    delta = self.krylov(pre, &jac_shift, &delta)?;
                }
            }
            for (x, dx) in next.iter_mut().zip(&delta) {
                *x = *x + *dx;
            }
            if !next.iter().all(|x| x.is_finite()) {
                return Err(Error::BlowUp { time: (t + dt).to_f64_lossy() });
            }
            if max_abs(&delta) <= tol * scale {
                return Ok(next);
            }
        }
        Err(Error::NewtonFailure {
            time: (t + dt).to_f64_lossy(),
            residual: residual_norm.to_f64_lossy(),
            iterations: self.opts.newton_max_iters,
        })
    }

    // (I - dt/2 Lap + diag(shift)) x = b by BiCGSTAB, right-preconditioned
    // with the constant-coefficient part
    fn krylov(&self, pre: &Implicit<T>, shift: &[T], b: &[T]) -> Result<Vec<T>> {
        let half_dt = T::lit(0.5) * self.dt;
        let apply = |x: &[T]| -> Vec<T> {
            let mut lx = vec![T::zero(); x.len()];
            self.lap.apply(x, &mut lx);
            (0..x.len()).map(|i| x[i] - half_dt * lx[i] + shift[i] * x[i]).collect()
        };
        let precond = |x: &[T]| -> Vec<T> {
            let mut y = x.to_vec();
            pre.solve(&mut y);
            y
        };
        let dot = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x * y).sum::<T>();
        let norm = |a: &[T]| dot(a, a).sqrt();
        let b_norm = norm(b);
        let mut x = vec![T::zero(); b.len()];
        if b_norm == T::zero() {
            return Ok(x);
        }
        let tol = self.opts.linear_tol.max(T::epsilon() * T::lit(64.0)) * b_norm;
        let mut r = b.to_vec();
        let r0 = r.clone();
        let (mut rho, mut alpha, mut omega) = (T::one(), T::one(), T::one());
        let mut v = vec![T::zero(); b.len()];
        let mut p = vec![T::zero(); b.len()];
        for _ in 0..200 {
            let rho_new = dot(&r0, &r);
            if rho_new == T::zero() {
                break;
            }
            let beta = (rho_new / rho) * (alpha / omega);
            for i in 0..p.len() {
                p[i] = r[i] + beta * (p[i] - omega * v[i]);
            }
            let p_hat = precond(&p);
            v = apply(&p_hat);
            alpha = rho_new / dot(&r0, &v);
            let s: Vec<T> = r.iter().zip(&v).map(|(&ri, &vi)| ri - alpha * vi).collect();
            if norm(&s) <= tol {
                for i in 0..x.len() {
                    x[i] = x[i] + alpha * p_hat[i];
                }
                return Ok(x);
            }
            let s_hat = precond(&s);
            let t = apply(&s_hat);
            omega = dot(&t, &s) / dot(&t, &t);
            for i in 0..x.len() {
                x[i] = x[i] + alpha * p_hat[i] + omega * s_hat[i];
                r[i] = s[i] - omega * t[i];
            }
            rho = rho_new;
            if norm(&r) <= tol {
                return Ok(x);
            }
        }
        let res = norm(&r) / b_norm;
        Err(Error::SolverFailure {
            residual: res.to_f64_lossy(),
            tolerance: self.opts.linear_tol.to_f64_lossy(),
        })
    }

    fn shift_left(&self, x: &mut [T]) {
        let n = self.lap.n;
        for r in 0..self.lap.rows() {
            let row = &mut x[r * n..(r + 1) * n];
            row.copy_within(1.., 0);
            row[n - 1] = T::zero();
        }
    }

    /// Runs `steps` steps (or fewer if collapse detection fires).
    pub fn run(&self, state: &PhysicalState<T>, steps: usize, forcing: Option<Forcing<'_, T>>) -> Result<Evolution<T>> {
        if !state.grid().same_shape(&self.grid_shape) {
            return Err(Error::GridMismatch);
        }
        let mut grid = state.grid().clone();
        let mut t = state.time;
        let mut u = self.unknowns(&state.u);
        let v0 = self.unknowns(&state.v);
        let initial_max = state.u.max_value();
        let mut v_prev = v0.clone();
        let mut v_half = self.bootstrap_v(&u, &v0, &grid, t, forcing);
        let mut collapsed = false;
        let mut taken = 0;
        for step in 0..steps {
            let u_next = self.advance_u(&u, &v_half, &grid, t, forcing)?;
            let v_next = self.advance_v(&v_half, &u_next, &grid, t + self.dt, forcing);
            u = u_next;
            v_prev = v_half;
            v_half = v_next;
            t = t + self.dt;
            if self.opts.move_window {
                self.shift_left(&mut u);
                self.shift_left(&mut v_prev);
                self.shift_left(&mut v_half);
                // origin from the step count, never by repeated addition
                let origin = state.window_origin() + T::of_usize(step + 1) * grid.h();
                grid = grid.with_origin(origin)?;
            }
            taken = step + 1;
            let peak = max_abs(&u);
            if !peak.is_finite() || peak > T::lit(1e6) {
                return Err(Error::BlowUp { time: t.to_f64_lossy() });
            }
            if let Some(frac) = self.opts.collapse_fraction {
                if initial_max > T::zero() && u.iter().fold(T::neg_infinity(), |m, &x| m.max(x)) < frac * initial_max {
                    collapsed = true;
                    break;
                }
            }
        }
        // v back at the integer level: mean of the two half levels
        let v_now: Vec<T> = if taken == 0 {
            v0
        } else {
            v_prev.iter().zip(&v_half).map(|(&a, &b)| T::lit(0.5) * (a + b)).collect()
        };
        Ok(Evolution {
            state: PhysicalState {
                u: self.to_profile(&grid, &u),
                v: self.to_profile(&grid, &v_now),
                time: t,
            },
            steps: taken,
            collapsed,
        })
    }
}

/// Evolves for `duration` (rounded to whole steps of `dt = h_x / c`).
pub fn evolve_moving_window<T: Real>(
    state: &PhysicalState<T>,
    params: &ModelParams<T>,
    c: T,
    duration: T,
) -> Result<PhysicalState<T>> {
    if !(duration > T::zero() && duration.is_finite()) {
        return Err(Error::invalid(format!("duration must be positive, got {duration}")));
    }
    let stepper = MovingWindow::new(params, c, state.grid(), EvolveOptions::default())?;
    let steps = (duration / stepper.dt()).round().to_usize().unwrap_or(0).max(1);
    Ok(stepper.run(state, steps, None)?.state)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Stable,
    Unstable,
    Inconclusive,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct StabilityReport {
    pub sup_deviation: f64,
    pub l2_deviation: f64,
    pub distance_propagated: f64,
    pub initial_max: f64,
    pub final_max: f64,
    pub collapsed: bool,
    pub verdict: Verdict,
}

/// Default sup-deviation threshold, as a fraction of the initial peak.
pub fn default_threshold(dim: usize) -> f64 {
    if dim == 2 {
        0.10
    } else {
        0.05
    }
}

/// Compares `u` before and after, with the final window moved back onto the
/// initial one. `threshold` is a fraction of the initial `max u`.
pub fn stability_verdict<T: Real>(initial: &PhysicalState<T>, last: &PhysicalState<T>, threshold: T) -> Result<StabilityReport> {
    if !initial.grid().same_shape(last.grid()) {
        return Err(Error::GridMismatch);
    }
    let distance = last.window_origin() - initial.window_origin();
    let back = last.u.with_grid(initial.grid().clone())?;
    let sup = back.sup_diff(&initial.u)?;
    let g = initial.grid();
    let cell = g.h() * g.h_y().unwrap_or(T::one());
    let l2 = (back
        .samples()
        .iter()
        .zip(initial.u.samples())
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum::<T>()
        * cell)
        .sqrt();
    let initial_max = initial.u.max_value();
    let final_max = last.u.max_value();
    let collapsed = initial_max > T::zero() && final_max < T::lit(0.1) * initial_max;
    let limit = threshold * initial_max.abs().max(T::min_positive_value());
    let verdict = if collapsed || sup >= T::lit(10.0) * limit {
        Verdict::Unstable
    } else if sup <= limit {
        Verdict::Stable
    } else {
        Verdict::Inconclusive
    };
    Ok(StabilityReport {
        sup_deviation: sup.to_f64_lossy(),
        l2_deviation: l2.to_f64_lossy(),
        distance_propagated: distance.to_f64_lossy(),
        initial_max: initial_max.to_f64_lossy(),
        final_max: final_max.to_f64_lossy(),
        collapsed,
        verdict,
    })
}

/// Rescales a minimizer, propagates it one window length (stopping early on
/// collapse) and classifies the outcome with the default threshold.
pub fn test_pulse<T: Real>(w: &Profile<T>, params: &ModelParams<T>) -> Result<(StabilityReport, PhysicalState<T>, PhysicalState<T>)> {
    let initial = rescale_to_physical(w, params)?;
    let opts = EvolveOptions {
        collapse_fraction: Some(T::lit(0.1)),
        ..EvolveOptions::default()
    };
    let stepper = MovingWindow::new(params, params.c, initial.grid(), opts)?;
    let run = stepper.run(&initial, initial.grid().n_x(), None)?;
    let threshold = T::lit(default_threshold(params.dim()));
    let report = stability_verdict(&initial, &run.state, threshold)?;
    Ok((report, initial, run.state))
}
