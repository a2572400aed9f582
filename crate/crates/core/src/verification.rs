//! Independent cross-checks of the discretisation: a dense solver assembled
//! from scratch, a finite-difference test of the energy derivative, the
//! weighted symmetry of `L_c` and observed orders of convergence.

use crate::energy::{djc_dir, energy_jc};
use crate::error::{Error, Result};
use crate::grid::{inner_l2exp, Grid, Profile};
use crate::model::ModelParams;
use crate::nonlocal::{BandedSystem, NonlocalSolver, RobinOperator};
use crate::parabolic::{EvolveOptions, MovingWindow, Outflow, PhysicalState, Reaction};
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

/// Dense factorisation becomes impractical beyond this many unknowns.
pub const DENSE_LIMIT: usize = 4000;

/// Outcome of one check; `pass` is `measured <= tolerance`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub pass: bool,
    /// Grid and parameters the check ran on.
    pub context: String,
}

impl OracleReport {
    pub fn new(name: impl Into<String>, measured: f64, tolerance: f64, context: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            measured,
            tolerance,
            pass: measured <= tolerance,
            context: context.into(),
        }
    }
}

impl std::fmt::Display for OracleReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{} {}: {:.3e} (tolerance {:.1e}) [{}]",
            if self.pass { "PASS" } else { "FAIL" },
            self.name,
            self.measured,
            self.tolerance,
            self.context
        )
    }
}

/// Solves `sys` with a dense LU factorisation of a matrix assembled directly
/// from the finite-volume balance of every node.
pub fn dense_oracle_solve(sys: &BandedSystem<f64>) -> Result<Profile<f64>> {
    let g = &sys.grid;
    let RobinOperator {
        alpha,
        kappa,
        nu_left,
        nu_right,
        right_dirichlet,
    } = sys.operator;
    let n = g.n_x();
    let h = g.h();
    let rows: Vec<usize> = match g.strip_info() {
        Some(s) => (1..s.n_y).collect(),
        None => vec![0],
    };
    let unknowns = rows.len() * (n + 1);
    if unknowns > DENSE_LIMIT {
        return Err(Error::invalid(format!("{unknowns} unknowns exceed the dense limit {DENSE_LIMIT}")));
    }
    let id = |r: usize, j: usize| r * (n + 1) + j;
    let y_weight = g.h_y().map(|hy| alpha / (hy * hy));

    // edge weights e^(x -/+ h/2) relative to the node weight e^x
    let (e_minus, e_plus) = ((-0.5 * h).exp(), (0.5 * h).exp());
    let mut a = DMatrix::<f64>::zeros(unknowns, unknowns);
    let mut b = DVector::<f64>::zeros(unknowns);
    for (r, &k) in rows.iter().enumerate() {
        for j in 0..=n {
            let i = id(r, j);
            if j == n && right_dirichlet {
                a[(i, i)] = 1.0;
                continue;
            }
            let mut rhs = sys.rhs[g.index(j, k)];
            let mass = match j {
                0 => 0.5 * h * e_plus,
                _ if j == n => 0.5 * h * e_minus,
                _ => 0.5 * h * (e_minus + e_plus),
            };
            if j > 0 {
                let w = alpha * e_minus / (h * mass);
                a[(i, id(r, j - 1))] += w;
                a[(i, i)] -= w;
            }
            if j < n {
                let w = alpha * e_plus / (h * mass);
                a[(i, id(r, j + 1))] += w;
                a[(i, i)] -= w;
            }
            // boundary fluxes u_x = nu u + data
            if j == 0 {
                a[(i, i)] -= alpha * nu_left / mass;
                rhs += alpha * sys.left_data[r] / mass;
            }
            if j == n {
                a[(i, i)] += alpha * nu_right / mass;
                rhs -= alpha * sys.right_data[r] / mass;
            }
            a[(i, i)] -= kappa;
            if let Some(wy) = y_weight {
                a[(i, i)] -= 2.0 * wy;
                if r > 0 {
                    a[(i, id(r - 1, j))] += wy;
                }
                if r + 1 < rows.len() {
                    a[(i, id(r + 1, j))] += wy;
                }
            }
            b[i] = rhs;
        }
    }
    let x = a.lu().solve(&b).ok_or(Error::SolverFailure {
        residual: f64::INFINITY,
        tolerance: 0.0,
    })?;
    let mut samples = vec![0.0; g.len()];
    for (r, &k) in rows.iter().enumerate() {
        for j in 0..=n {
            samples[g.index(j, k)] = x[id(r, j)];
        }
    }
    Profile::new(g.clone(), samples)
}

/// Max-norm gap between the banded and the dense solution of `sys`.
pub fn dense_agreement(name: &str, sys: &BandedSystem<f64>, tolerance: f64) -> Result<OracleReport> {
    let banded = sys.solve()?;
    let dense = dense_oracle_solve(sys)?;
    let gap = banded.sup_diff(&dense)?;
    let scale = dense.sup_norm().max(1.0);
    Ok(OracleReport::new(name, gap / scale, tolerance, grid_context(&sys.grid)))
}

fn grid_context(g: &Grid<f64>) -> String {
    match g.strip_info() {
        Some(s) => format!("n_x={}, n_y={}, h={}", g.n_x(), s.n_y, g.h()),
        None => format!("n_x={}, h={}", g.n_x(), g.h()),
    }
}

fn energy_of(w: &Profile<f64>, solver: &NonlocalSolver<f64>) -> Result<f64> {
    Ok(energy_jc(w, &solver.apply_lc(w)?, solver.params())?.total)
}

/// Central-difference error of the energy derivative at `w` along `phi`,
/// relative to the larger of the two derivative values.
pub fn gradient_error(w: &Profile<f64>, phi: &Profile<f64>, params: &ModelParams<f64>, eps: f64) -> Result<f64> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::invalid(format!("eps must lie in [1e-7, 1e-3], got {eps}")));
    }
    let solver = NonlocalSolver::new(params, w.grid())?;
    let analytic = djc_dir(w, &solver.apply_lc(w)?, phi, params)?;
    let plus = energy_of(&w.lin_comb(1.0, phi, eps)?, &solver)?;
    let minus = energy_of(&w.lin_comb(1.0, phi, -eps)?, &solver)?;
    let numeric = (plus - minus) / (2.0 * eps);
    let scale = analytic.abs().max(numeric.abs());
    Ok(if scale == 0.0 { 0.0 } else { (analytic - numeric).abs() / scale })
}

pub fn fd_gradient_check(w: &Profile<f64>, phi: &Profile<f64>, params: &ModelParams<f64>, eps: f64) -> Result<OracleReport> {
    let err = gradient_error(w, phi, params, eps)?;
    Ok(OracleReport::new(
        "energy derivative vs central difference",
        err,
        1e-6,
        format!("{}, eps={eps}, d={}, c={}", grid_context(w.grid()), params.d, params.c),
    ))
}

/// Ratio of central-difference errors at `eps` and `eps / 2`; about 4 for a
/// consistent derivative. Passes when the ratio lies in `[3, 5]`.
pub fn fd_error_ratio(w: &Profile<f64>, phi: &Profile<f64>, params: &ModelParams<f64>, eps: f64) -> Result<OracleReport> {
    let ratio = gradient_error(w, phi, params, eps)? / gradient_error(w, phi, params, 0.5 * eps)?;
    Ok(OracleReport::new(
        "central difference error ratio",
        (ratio - 4.0).abs(),
        1.0,
        format!("ratio={ratio:.3}, eps={eps}"),
    ))
}

/// `|<u1, L u2> - <L u1, u2>| / (|u1| |u2|)` in the weighted L2 product.
pub fn selfadjoint_residual(u1: &Profile<f64>, u2: &Profile<f64>, params: &ModelParams<f64>) -> Result<OracleReport> {
    let solver = NonlocalSolver::new(params, u1.grid())?;
    let (l1, l2) = (solver.apply_lc(u1)?, solver.apply_lc(u2)?);
    let gap = (inner_l2exp(u1, &l2)? - inner_l2exp(&l1, u2)?).abs();
    let norms = (inner_l2exp(u1, u1)? * inner_l2exp(u2, u2)?).sqrt();
    let res = if norms == 0.0 { 0.0 } else { gap / norms };
    Ok(OracleReport::new("weighted symmetry of L_c", res, 1e-6, grid_context(u1.grid())))
}

/// Manufactured problems with known smooth solutions.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ManufacturedCase {
    /// The inhibitor solve with both Robin closures.
    Inhibitor,
    /// The auxiliary solve behind the descent direction.
    Auxiliary,
    /// The linearised parabolic system, time step proportional to `h`.
    Parabolic,
}

/// Least-squares slope of `log(error)` against `log(h)`.
pub fn observed_order(samples: &[(f64, f64)]) -> f64 {
    let pts: Vec<(f64, f64)> = samples.iter().map(|&(h, e)| (h.ln(), e.ln())).collect();
    let m = pts.len() as f64;
    let (sx, sy) = pts.iter().fold((0.0, 0.0), |(a, b), &(x, y)| (a + x, b + y));
    let (mx, my) = (sx / m, sy / m);
    let (num, den) = pts
        .iter()
        .fold((0.0, 0.0), |(n, d), &(x, y)| (n + (x - mx) * (y - my), d + (x - mx) * (x - mx)));
    num / den
}

fn oracle_params() -> ModelParams<f64> {
    ModelParams::line(5e-4, 1.0 / 16.0, 0.25, 5.0).expect("valid oracle parameters")
}

// smooth decaying profile and its first two derivatives
fn exact_profile(x: f64) -> (f64, f64, f64) {
    let s = x + 2.0;
    let g = (-s * s / 8.0).exp();
    let p = 1.0 + 0.3 * x;
    let g1 = -s / 4.0 * g;
    let g2 = (s * s / 16.0 - 0.25) * g;
    (p * g, 0.3 * g + p * g1, 0.6 * g1 + p * g2)
}

fn robin_error(op: RobinOperator<f64>, n: usize) -> Result<(f64, f64)> {
    let (a, length) = (-9.0, 14.0);
    let h = length / n as f64;
    let grid = Grid::line(a, h, n)?;
    let rhs = (0..=n)
        .map(|j| {
            let (u, u1, u2) = exact_profile(grid.x(j));
            op.alpha * (u2 + u1) - op.kappa * u
        })
        .collect();
    let data = |x: f64, nu: f64| {
        let (u, u1, _) = exact_profile(x);
        vec![u1 - nu * u]
    };
    let sys = BandedSystem {
        operator: op,
        rhs,
        left_data: data(grid.x(0), op.nu_left),
        right_data: data(grid.x(n), op.nu_right),
        grid: grid.clone(),
    };
    let exact = Profile::from_fn(grid, |x, _| exact_profile(x).0)?;
    Ok((h, sys.solve()?.sup_diff(&exact)?))
}

fn parabolic_error(n: usize) -> Result<(f64, f64)> {
    let (d, gamma, beta) = (0.5, 1.0 / 16.0, 0.25);
    let p = ModelParams::line(d, gamma, beta, 1.0)?;
    let k = std::f64::consts::FRAC_PI_2;
    let shape = move |x: f64| (k * x).cos();
    let exact_u = move |x: f64, t: f64| shape(x) * (-t).exp();
    let exact_v = move |x: f64, t: f64| shape(x) * 0.5 * (1.0 + t);
    let forcing = move |x: f64, _y: f64, t: f64| {
        let (u, v) = (exact_u(x, t), exact_v(x, t));
        let gu = -u + k * k * u - (-beta * u - v) / d;
        let gv = 0.5 * shape(x) + k * k * v - u + gamma * v;
        (gu, gv)
    };
    let opts = EvolveOptions {
        reaction: Reaction::Linear,
        outflow: Outflow::Neumann,
        move_window: false,
        ..EvolveOptions::default()
    };
    let h = 1.0 / n as f64;
    let g = Grid::line(0.0, h, n)?;
    let u0 = Profile::from_fn(g.clone(), |x, _| exact_u(x, 0.0))?;
    let v0 = Profile::from_fn(g.clone(), |x, _| exact_v(x, 0.0))?;
    let out = MovingWindow::new(&p, 1.0, &g, opts)?.run(&PhysicalState::new(u0, v0, 0.0)?, n / 2, Some(&forcing))?;
    let t = out.state.time;
    let eu = out.state.u.sup_diff(&Profile::from_fn(g.clone(), |x, _| exact_u(x, t))?)?;
    let ev = out.state.v.sup_diff(&Profile::from_fn(g, |x, _| exact_v(x, t))?)?;
    Ok((h, eu.max(ev)))
}

/// Observed order on the refinement chain `cells` (at least three grids).
/// Passes when it lies within 0.1 of 2.
pub fn convergence_order(case: ManufacturedCase, cells: &[usize]) -> Result<OracleReport> {
    if cells.len() < 3 {
        return Err(Error::invalid("an order estimate needs at least three grids"));
    }
    let solver = NonlocalSolver::new(&oracle_params(), &Grid::line(0.0, 0.1, 4)?)?;
    let zero = Profile::zeros(Grid::line(0.0, 0.1, 4)?);
    let errors = cells
        .iter()
        .map(|&n| match case {
            ManufacturedCase::Inhibitor => robin_error(solver.lc_system(&zero).operator, n),
            ManufacturedCase::Auxiliary => robin_error(solver.wstar_system(&zero, &zero)?.operator, n),
            ManufacturedCase::Parabolic => parabolic_error(n),
        })
        .collect::<Result<Vec<_>>>()?;
    let order = observed_order(&errors);
    let name = match case {
        ManufacturedCase::Inhibitor => "order of the inhibitor solve",
        ManufacturedCase::Auxiliary => "order of the auxiliary solve",
        ManufacturedCase::Parabolic => "order of the parabolic scheme",
    };
    Ok(OracleReport::new(
        name,
        (order - 2.0).abs(),
        0.1,
        format!("order={order:.4}, cells={cells:?}"),
    ))
}

fn bump(g: &Grid<f64>, center: f64, width: f64, height: f64) -> Result<Profile<f64>> {
    Profile::from_fn(g.clone(), |x, _| {
        let s = (x - center) / width;
        height * (-s * s).exp()
    })
}

/// Every check on its default small grid (well under a minute in total).
pub fn run_all() -> Result<Vec<OracleReport>> {
    let params = oracle_params();
    let line = Grid::line(-1.5, 0.01, 200)?;
    let solver = NonlocalSolver::new(&params, &line)?;
    let w = Profile::from_fn(line.clone(), |x: f64, _| (3.0 * x).sin() * (-x * x).exp() + 0.2)?;
    let v = solver.apply_lc(&w)?;

    let strip_params = ModelParams::strip(5e-4, 1.0 / 16.0, 0.25, 5.0, 1.0)?;
    let strip = Grid::strip(-4.0, 0.05, 80, 5.0, 16)?;
    let strip_solver = NonlocalSolver::new(&strip_params, &strip)?;
    let ws = Profile::from_fn(strip.clone(), |x: f64, y: f64| (-(x + 2.0) * (x + 2.0)).exp() * (1.0 - y * y / 25.0))?;

    let wide = Grid::line(-15.0, 0.05, 400)?;
    let wg = bump(&wide, -4.0, 1.5, 0.9)?.lin_comb(1.0, &bump(&wide, -8.0, 2.0, -0.2)?, 1.0)?;
    let phi = bump(&wide, -5.0, 1.0, 1.0)?;
    let (u1, u2) = (bump(&wide, -6.0, 0.8, 1.0)?, bump(&wide, -3.5, 1.2, 0.7)?);

    Ok(vec![
        dense_agreement("dense oracle vs inhibitor solve", &solver.lc_system(&w), 1e-10)?,
        dense_agreement("dense oracle vs auxiliary solve", &solver.wstar_system(&w, &v)?, 1e-10)?,
        dense_agreement("dense oracle vs strip inhibitor solve", &strip_solver.lc_system(&ws), 1e-10)?,
        fd_gradient_check(&wg, &phi, &params, 1e-5)?,
        fd_error_ratio(&wg, &phi, &params, 1e-3)?,
        selfadjoint_residual(&u1, &u2, &params)?,
        convergence_order(ManufacturedCase::Inhibitor, &[100, 200, 400])?,
        convergence_order(ManufacturedCase::Auxiliary, &[100, 200, 400])?,
        convergence_order(ManufacturedCase::Parabolic, &[20, 40, 80])?,
    ])
}
