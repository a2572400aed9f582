//! Linear elliptic solves with asymptotic Robin closures.
//!
//! Both linear problems of a descent iteration have the form
//!
//! ```text
//! alpha (u_xx + u_yy + u_x) - kappa u = f          on [a, b] (x [-l, l])
//! u_x - nu_left  u = g_a                           at x = a
//! u_x - nu_right u = g_b                           at x = b
//! u = 0                                            at y = -l, l
//! ```
//!
//! The x-part is discretised in flux form, `u_xx + u_x = e^-x (e^x u_x)_x`,
//! with edge weights `e^(x_j+1/2)` and the lumped node masses of the weighted
//! quadrature. The discrete operator is then symmetric in the discrete
//! weighted product, so the energy and its derivative agree to round-off.
//! The Robin conditions enter through the boundary flux of the end cells.
//!
//! On a strip the y-operator is the Dirichlet second difference, which the
//! discrete sine transform diagonalises exactly. Since the Robin closure is the
//! same on every row, each sine mode decouples into one tridiagonal system in x.

use crate::error::{Error, Result};
use crate::grid::{Grid, Profile, Strip};
use crate::model::{eigen_nu, eigen_nu_star, f_cubic, EigenPair, ModelParams};
use crate::scalar::Real;

/// Coefficients of `alpha (Laplacian + d_x) - kappa` and its Robin closures.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobinOperator<T> {
    pub alpha: T,
    pub kappa: T,
    pub nu_left: T,
    pub nu_right: T,
    /// Replace the right Robin closure by `u = 0` (the right data is ignored).
    pub right_dirichlet: bool,
}

/// A fully specified discrete problem: operator, grid, interior right-hand
/// side (one value per grid point) and Robin data (one value per grid row).
///
/// Dirichlet rows of a strip carry no unknowns; their `rhs` entries are ignored.
#[derive(Clone, Debug)]
pub struct BandedSystem<T> {
    pub operator: RobinOperator<T>,
    pub grid: Grid<T>,
    pub rhs: Vec<T>,
    pub left_data: Vec<T>,
    pub right_data: Vec<T>,
}

impl<T: Real> BandedSystem<T> {
    /// Number of unknowns (grid points minus Dirichlet rows).
    pub fn unknowns(&self) -> usize {
        self.grid.nx_points() * interior_rows(&self.grid).len()
    }

    pub fn solve(&self) -> Result<Profile<T>> {
        let solver = RobinSolver::new(self.operator, &self.grid)?;
        let out = solver.solve(&self.rhs, &self.left_data, &self.right_data);
        let profile = Profile::new(self.grid.clone(), out)
            .map_err(|_| Error::SolverFailure {
                residual: f64::INFINITY,
                tolerance: T::residual_floor().to_f64_lossy(),
            })?;
        self.check_residual(&profile)?;
        Ok(profile)
    }

    /// Residual of `solution` in every unknown's equation, normalised as a
    /// normwise backward error `|r| / (|A| |u| + |b|)` (max norms).
    pub fn relative_residual(&self, solution: &Profile<T>) -> T {
        let (r, a_norm, b_norm) = self.residual_parts(solution.samples());
        let scale = a_norm * solution.sup_norm() + b_norm;
        if scale == T::zero() {
            r
        } else {
            r / scale
        }
    }

    /// Residual relative to the right-hand side alone.
    pub fn rhs_relative_residual(&self, solution: &Profile<T>) -> T {
        let (r, _, b_norm) = self.residual_parts(solution.samples());
        if b_norm == T::zero() {
            r
        } else {
            r / b_norm
        }
    }

    fn check_residual(&self, solution: &Profile<T>) -> Result<()> {
        let res = self.relative_residual(solution);
        let tol = T::residual_floor();
        if res.is_finite() && res <= tol {
            Ok(())
        } else {
            Err(Error::SolverFailure {
                residual: res.to_f64_lossy(),
                tolerance: tol.to_f64_lossy(),
            })
        }
    }

    /// `(max |r|, max row sum of |A|, max |b|)` with the ghost points eliminated.
    fn residual_parts(&self, u: &[T]) -> (T, T, T) {
        let g = &self.grid;
        let st = Stencil::new(&self.operator, g);
        let n = g.n_x();
        let (mut r_max, mut a_max, mut b_max) = (T::zero(), T::zero(), T::zero());
        for (row, k) in interior_rows(g).into_iter().enumerate() {
            let at = |j: usize, kk: usize| u[g.index(j, kk)];
            for j in 0..=n {
                let mut diag = st.diag;
                let mut b = self.rhs[g.index(j, k)];
                // (neighbour index, coefficient) pairs after ghost elimination
                let (left_nb, right_nb) = if j == 0 {
                    diag = diag - st.left_flux * self.operator.nu_left;
                    b = b + st.left_flux * self.left_data[row];
                    (None, Some((1, st.end_nb)))
                } else if j == n && self.operator.right_dirichlet {
                    let un = at(n, k);
                    r_max = r_max.max(un.abs());
                    a_max = a_max.max(T::one());
                    continue;
                } else if j == n {
                    diag = diag + st.right_flux * self.operator.nu_right;
                    b = b - st.right_flux * self.right_data[row];
                    (Some((n - 1, st.end_nb)), None)
                } else {
                    (Some((j - 1, st.sub)), Some((j + 1, st.sup)))
                };
                let mut au = diag * at(j, k);
                let mut a_row = diag.abs();
                for (jj, coef) in left_nb.into_iter().chain(right_nb) {
                    au = au + coef * at(jj, k);
                    a_row = a_row + coef.abs();
                }
                if g.dim() == 2 {
                    // Dirichlet neighbours are exactly zero in the stored samples
                    au = au + st.y_coef * (at(j, k - 1) + at(j, k + 1));
                    a_row = a_row + (st.y_coef + st.y_coef).abs();
                }
                r_max = r_max.max((au - b).abs());
                a_max = a_max.max(a_row);
                b_max = b_max.max(b.abs());
            }
        }
        (r_max, a_max, b_max)
    }
}

fn interior_rows<T: Real>(g: &Grid<T>) -> Vec<usize> {
    match g.strip_info() {
        Some(s) => (1..s.n_y).collect(),
        None => vec![0],
    }
}

/// Row weights after division by the node mass.
struct Stencil<T> {
    sub: T,
    diag: T,
    sup: T,
    y_coef: T,
    // neighbour weight in the two end rows
    end_nb: T,
    // boundary flux weights multiplying u_x at a and b
    left_flux: T,
    right_flux: T,
}

impl<T: Real> Stencil<T> {
    fn new(op: &RobinOperator<T>, g: &Grid<T>) -> Self {
        let h = g.h();
        let inv_h2 = (h * h).recip();
        let half_h = T::lit(0.5) * h;
        let tilt = half_h.tanh();
        let two = T::lit(2.0);
        let y_coef = match g.h_y() {
            Some(hy) => op.alpha / (hy * hy),
            None => T::zero(),
        };
        let flux = two * op.alpha / h;
        Self {
            sub: op.alpha * (T::one() - tilt) * inv_h2,
            diag: -two * op.alpha * inv_h2 - op.kappa - two * y_coef,
            sup: op.alpha * (T::one() + tilt) * inv_h2,
            y_coef,
            end_nb: two * op.alpha * inv_h2,
            left_flux: flux * (-half_h).exp(),
            right_flux: flux * half_h.exp(),
        }
    }
}

/// LU factors of one tridiagonal system (Thomas algorithm).
#[derive(Clone, Debug)]
pub(crate) struct Tridiagonal<T> {
    lower: Vec<T>,
    upper_mod: Vec<T>,
    inv_pivot: Vec<T>,
}

impl<T: Real> Tridiagonal<T> {
    pub(crate) fn factor(lower: Vec<T>, diag: &[T], upper: &[T]) -> Self {
        let n = diag.len();
        let mut upper_mod = vec![T::zero(); n];
        let mut inv_pivot = vec![T::zero(); n];
        let mut prev = T::zero();
        for i in 0..n {
            let pivot = diag[i] - lower[i] * prev;
            inv_pivot[i] = pivot.recip();
            upper_mod[i] = upper[i] * inv_pivot[i];
            prev = upper_mod[i];
        }
        Self {
            lower,
            upper_mod,
            inv_pivot,
        }
    }

    pub(crate) fn solve_in_place(&self, x: &mut [T]) {
        let n = x.len();
        let mut prev = T::zero();
        for i in 0..n {
            x[i] = (x[i] - self.lower[i] * prev) * self.inv_pivot[i];
            prev = x[i];
        }
        for i in (0..n - 1).rev() {
            x[i] = x[i] - self.upper_mod[i] * x[i + 1];
        }
    }
}

/// Factored operator for one grid shape. Translation invariant: any profile
/// whose grid has the same shape (origin arbitrary) can be solved.
#[derive(Clone, Debug)]
pub struct RobinSolver<T> {
    op: RobinOperator<T>,
    h: T,
    n_x: usize,
    strip: Option<Strip<T>>,
    modes: Vec<Tridiagonal<T>>,
    // sin(pi m k / n_y), m, k = 1..n_y-1, row-major in m
    sine: Vec<T>,
}

impl<T: Real> RobinSolver<T> {
    pub fn new(op: RobinOperator<T>, grid: &Grid<T>) -> Result<Self> {
        if grid.n_x() < 4 {
            return Err(Error::invalid(format!(
                "elliptic solve needs n_x >= 4, got {}",
                grid.n_x()
            )));
        }
        let st = Stencil::new(&op, grid);
        let n = grid.nx_points();
        let mut lower = vec![st.sub; n];
        let mut upper = vec![st.sup; n];
        lower[0] = T::zero();
        upper[0] = st.end_nb;
        lower[n - 1] = if op.right_dirichlet { T::zero() } else { st.end_nb };
        upper[n - 1] = T::zero();
        // x-part of the diagonal (without the y second difference)
        let base = st.diag + T::lit(2.0) * st.y_coef;
        let mut diag_x = vec![base; n];
        diag_x[0] = base - st.left_flux * op.nu_left;
        diag_x[n - 1] = if op.right_dirichlet {
            T::one()
        } else {
            base + st.right_flux * op.nu_right
        };

        let strip = grid.strip_info();
        let (modes, sine) = match strip {
            None => (vec![Tridiagonal::factor(lower, &diag_x, &upper)], Vec::new()),
            Some(s) => {
                let ny = s.n_y;
                let hy = s.h_y();
                let mut modes = Vec::with_capacity(ny - 1);
                for m in 1..ny {
                    let sn = (T::PI() * T::of_usize(m) / T::of_usize(2 * ny)).sin();
                    let lambda = -T::lit(4.0) * sn * sn / (hy * hy);
                    let mut shifted: Vec<T> = diag_x.iter().map(|&d| d + op.alpha * lambda).collect();
                    if op.right_dirichlet {
                        shifted[n - 1] = T::one();
                    }
                    modes.push(Tridiagonal::factor(lower.clone(), &shifted, &upper));
                }
                (modes, sine_table(ny))
            }
        };
        Ok(Self {
            op,
            h: grid.h(),
            n_x: grid.n_x(),
            strip,
            modes,
            sine,
        })
    }

    pub fn operator(&self) -> &RobinOperator<T> {
        &self.op
    }

    pub fn matches(&self, grid: &Grid<T>) -> bool {
        self.h == grid.h() && self.n_x == grid.n_x() && self.strip == grid.strip_info()
    }

    /// Solves for all grid samples; Dirichlet rows of the output are zero.
    pub fn solve(&self, rhs: &[T], left: &[T], right: &[T]) -> Vec<T> {
        let n = self.n_x + 1;
        let half_h = T::lit(0.5) * self.h;
        let flux = T::lit(2.0) * self.op.alpha / self.h;
        let (left_flux, right_flux) = (flux * (-half_h).exp(), flux * half_h.exp());
        // right-hand side with the Robin data folded into the end rows
        let fold = |row: &mut [T], ga: T, gb: T| {
            row[0] = row[0] + left_flux * ga;
            row[n - 1] = if self.op.right_dirichlet {
                T::zero()
            } else {
                row[n - 1] - right_flux * gb
            };
        };
        match self.strip {
            None => {
                let mut x = rhs.to_vec();
                fold(&mut x, left[0], right[0]);
                self.modes[0].solve_in_place(&mut x);
                x
            }
            Some(s) => {
                let ny = s.n_y;
                let inner = ny - 1;
                let mut rows = vec![T::zero(); inner * n];
                for r in 0..inner {
                    let k = r + 1;
                    let dst = &mut rows[r * n..(r + 1) * n];
                    dst.copy_from_slice(&rhs[k * n..(k + 1) * n]);
                    fold(dst, left[r], right[r]);
                }
                let mut modes = sine_transform(&self.sine, &rows, inner, n);
                for (m, fac) in self.modes.iter().enumerate() {
                    fac.solve_in_place(&mut modes[m * n..(m + 1) * n]);
                }
                let back = sine_transform(&self.sine, &modes, inner, n);
                let scale = T::lit(2.0) / T::of_usize(ny);
                let mut out = vec![T::zero(); (ny + 1) * n];
                for r in 0..inner {
                    let k = r + 1;
                    for (o, &b) in out[k * n..(k + 1) * n].iter_mut().zip(&back[r * n..(r + 1) * n]) {
                        *o = scale * b;
                    }
                }
                out
            }
        }
    }

}

/// `sin(pi m k / ny)` for `m, k = 1..ny-1`, row-major in `m`.
pub(crate) fn sine_table<T: Real>(ny: usize) -> Vec<T> {
    let mut sine = Vec::with_capacity((ny - 1) * (ny - 1));
    for m in 1..ny {
        for k in 1..ny {
            sine.push((T::PI() * T::of_usize(m * k) / T::of_usize(ny)).sin());
        }
    }
    sine
}

// out[m] = sum_k sin(pi (m+1)(k+1)/ny) * input[k], each entry a row of length n
pub(crate) fn sine_transform<T: Real>(sine: &[T], input: &[T], inner: usize, n: usize) -> Vec<T> {
    let mut out = vec![T::zero(); inner * n];
    for m in 0..inner {
        let dst = &mut out[m * n..(m + 1) * n];
        for k in 0..inner {
            let s = sine[m * inner + k];
            let src = &input[k * n..(k + 1) * n];
            for (d, &x) in dst.iter_mut().zip(src) {
                *d = *d + s * x;
            }
        }
    }
    out
}

/// Factored solvers for `L_c` and the auxiliary update map on one grid shape.
#[derive(Clone, Debug)]
pub struct NonlocalSolver<T> {
    params: ModelParams<T>,
    nu: EigenPair<T>,
    nu_star: EigenPair<T>,
    lc: RobinSolver<T>,
    qstar: RobinSolver<T>,
    pinned: RobinSolver<T>,
}

impl<T: Real> NonlocalSolver<T> {
    pub fn new(params: &ModelParams<T>, grid: &Grid<T>) -> Result<Self> {
        params.validate()?;
        check_strip(params, grid)?;
        let nu = eigen_nu(params);
        let nu_star = eigen_nu_star(params);
        let c2 = params.c * params.c;
        let lc = RobinSolver::new(
            RobinOperator {
                alpha: c2,
                kappa: params.gamma,
                nu_left: nu.nu2,
                nu_right: nu.nu1,
                right_dirichlet: false,
            },
            grid,
        )?;
        let qstar = RobinSolver::new(
            RobinOperator {
                alpha: T::one(),
                kappa: T::one(),
                nu_left: nu_star.nu2,
                nu_right: nu_star.nu1,
                right_dirichlet: false,
            },
            grid,
        )?;
        let pinned = RobinSolver::new(
            RobinOperator {
                alpha: T::one(),
                kappa: T::one(),
                nu_left: nu_star.nu2,
                nu_right: T::zero(),
                right_dirichlet: true,
            },
            grid,
        )?;
        Ok(Self {
            params: *params,
            nu,
            nu_star,
            lc,
            qstar,
            pinned,
        })
    }

    pub fn params(&self) -> &ModelParams<T> {
        &self.params
    }

    pub fn matches(&self, grid: &Grid<T>) -> bool {
        self.lc.matches(grid)
    }

    /// The discrete problem whose solution is `L_c w`.
    pub fn lc_system(&self, w: &Profile<T>) -> BandedSystem<T> {
        let c2 = self.params.c * self.params.c;
        let (ga, gb) = (self.nu.nu1 * c2, self.nu.nu2 * c2);
        system(self.lc.op, w, |x| -x, |x| x / ga, |x| x / gb)
    }

    /// The discrete problem whose solution is `w* = Q(w)`, given `v = L_c w`.
    pub fn wstar_system(&self, w: &Profile<T>, v: &Profile<T>) -> Result<BandedSystem<T>> {
        let what = wstar_source(w, v, &self.params)?;
        let (s1, s2) = (self.nu_star.nu1, self.nu_star.nu2);
        Ok(system(self.qstar.op, &what, |x| -x, |x| x / s1, |x| x / s2))
    }

    pub fn apply_lc(&self, w: &Profile<T>) -> Result<Profile<T>> {
        self.run(&self.lc, self.lc_system(w))
    }

    /// The auxiliary solve used for descent directions: left closure as in
    /// [`Self::solve_wstar`], `w* = 0` at the right end. For profiles that
    /// vanish at the right end this is the exact representer of the energy
    /// derivative in the discrete weighted H1 product.
    pub fn solve_wstar_pinned(&self, w: &Profile<T>, v: &Profile<T>) -> Result<Profile<T>> {
        let what = wstar_source(w, v, &self.params)?;
        let s1 = self.nu_star.nu1;
        let sys = system(self.pinned.op, &what, |x| -x, |x| x / s1, |_| T::zero());
        self.run(&self.pinned, sys)
    }

    /// Adjoint of the discrete `L_c` in the discrete weighted product.
    ///
    /// Writing the solve as `L w = A^-1 (rho w)`, with `rho = -1` except where
    /// the Robin data fold `w` into the end rows, the adjoint is
    /// `rho A^-1 w`. The two differ only through those end rows.
    pub fn apply_lc_adjoint(&self, w: &Profile<T>) -> Result<Profile<T>> {
        if !self.lc.matches(w.grid()) {
            return Err(Error::GridMismatch);
        }
        let g = w.grid();
        let zeros = vec![T::zero(); interior_rows(g).len()];
        let mut out = self.lc.solve(w.samples(), &zeros, &zeros);
        let c2 = self.params.c * self.params.c;
        let half_h = T::lit(0.5) * g.h();
        let flux = T::lit(2.0) * c2 / g.h();
        let rho_left = -T::one() + flux * (-half_h).exp() / (self.nu.nu1 * c2);
        let rho_right = -T::one() - flux * half_h.exp() / (self.nu.nu2 * c2);
        let n = g.n_x();
        for k in 0..g.rows() {
            for j in 0..=n {
                let rho = if j == 0 {
                    rho_left
                } else if j == n {
                    rho_right
                } else {
                    -T::one()
                };
                let i = g.index(j, k);
                out[i] = rho * out[i];
            }
        }
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::SolverFailure {
                residual: f64::INFINITY,
                tolerance: T::residual_floor().to_f64_lossy(),
            });
        }
        Ok(Profile::from_parts(g.clone(), out))
    }

    pub fn solve_wstar(&self, w: &Profile<T>, v: &Profile<T>) -> Result<Profile<T>> {
        self.run(&self.qstar, self.wstar_system(w, v)?)
    }

    fn run(&self, solver: &RobinSolver<T>, sys: BandedSystem<T>) -> Result<Profile<T>> {
        if !solver.matches(&sys.grid) {
            return Err(Error::GridMismatch);
        }
        let out = solver.solve(&sys.rhs, &sys.left_data, &sys.right_data);
        if out.iter().any(|x| !x.is_finite()) {
            return Err(Error::SolverFailure {
                residual: f64::INFINITY,
                tolerance: T::residual_floor().to_f64_lossy(),
            });
        }
        let profile = Profile::from_parts(sys.grid.clone(), out);
        sys.check_residual(&profile)?;
        Ok(profile)
    }
}

/// Right-hand side of the auxiliary equation: `d c^2 w - v + f(w)`.
pub fn wstar_source<T: Real>(w: &Profile<T>, v: &Profile<T>, params: &ModelParams<T>) -> Result<Profile<T>> {
    crate::grid::check_same_grid(w, v)?;
    let dc2 = params.dc2();
    let samples = w
        .samples()
        .iter()
        .zip(v.samples())
        .map(|(&wi, &vi)| dc2 * wi - vi + f_cubic(wi, params.beta))
        .collect();
    Ok(Profile::from_parts(w.grid().clone(), samples))
}

fn system<T: Real>(
    op: RobinOperator<T>,
    source: &Profile<T>,
    interior: impl Fn(T) -> T,
    left: impl Fn(T) -> T,
    right: impl Fn(T) -> T,
) -> BandedSystem<T> {
    let g = source.grid();
    let n = g.n_x();
    let rows = interior_rows(g);
    BandedSystem {
        operator: op,
        grid: g.clone(),
        rhs: source.samples().iter().map(|&x| interior(x)).collect(),
        left_data: rows.iter().map(|&k| left(source.at(0, k))).collect(),
        right_data: rows.iter().map(|&k| right(source.at(n, k))).collect(),
    }
}

fn check_strip<T: Real>(params: &ModelParams<T>, grid: &Grid<T>) -> Result<()> {
    match (params.solver_half_width(), grid.strip_info()) {
        (None, None) => Ok(()),
        (Some(l), Some(s)) => {
            if ((l - s.half_width) / l).abs() <= T::lit(1e-12).max(T::epsilon() * T::lit(8.0)) {
                Ok(())
            } else {
                Err(Error::invalid(format!(
                    "strip half-width {} does not match c*L = {}",
                    s.half_width, l
                )))
            }
        }
        _ => Err(Error::invalid("model and grid dimensions differ")),
    }
}

/// `v = L_c w`.
pub fn apply_lc<T: Real>(w: &Profile<T>, params: &ModelParams<T>) -> Result<Profile<T>> {
    NonlocalSolver::new(params, w.grid())?.apply_lc(w)
}

/// `w* = Q(w)` given `v = L_c w`.
pub fn solve_wstar<T: Real>(w: &Profile<T>, v: &Profile<T>, params: &ModelParams<T>) -> Result<Profile<T>> {
    NonlocalSolver::new(params, w.grid())?.solve_wstar(w, v)
}

/// Robin-condition residuals of a solution at both ends of every row, using
/// the boundary derivative implied by the end-row equation.
pub fn robin_residuals<T: Real>(sys: &BandedSystem<T>, solution: &Profile<T>) -> T {
    let g = &sys.grid;
    let st = Stencil::new(&sys.operator, g);
    let n = g.n_x();
    let mut worst = T::zero();
    for (row, k) in interior_rows(g).into_iter().enumerate() {
        let u = |j: usize| solution.at(j, k);
        let ynb = |j: usize| {
            if g.dim() == 2 {
                st.y_coef * (solution.at(j, k - 1) + solution.at(j, k + 1))
            } else {
                T::zero()
            }
        };
        // row equation at j = 0 solved for the ghost value u_-1
        let f0 = sys.rhs[g.index(0, k)];
        // boundary derivative implied by each end-row equation
        let slope_l = (st.end_nb * u(1) + st.diag * u(0) + ynb(0) - f0) / st.left_flux;
        let res_l = slope_l - sys.operator.nu_left * u(0) - sys.left_data[row];
        let fnn = sys.rhs[g.index(n, k)];
        let slope_r = (fnn - st.end_nb * u(n - 1) - st.diag * u(n) - ynb(n)) / st.right_flux;
        let res_r = if sys.operator.right_dirichlet {
            u(n)
        } else {
            slope_r - sys.operator.nu_right * u(n) - sys.right_data[row]
        };
        worst = worst.max(res_l.abs()).max(res_r.abs());
    }
    worst
}
