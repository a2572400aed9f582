//! Wave speeds as roots of the minimal energy `J(c)`: warm-started scans,
//! sign-change brackets and regula falsi refinement.

use crate::descent::{mode_product, square_wave, Descent, DescentConfig, MinimizeResult};
use crate::error::{Error, Result};
use crate::grid::Profile;
use crate::model::ModelParams;
use crate::scalar::Real;

/// Everything needed to evaluate `J(c)` at an arbitrary speed.
#[derive(Clone, Debug)]
pub struct SpeedProblem<T> {
    /// Model constants; the speed stored here is ignored.
    pub model: ModelParams<T>,
    pub h: T,
    pub n_x: usize,
    /// Transverse cells on a strip (ignored on the line).
    pub n_y: usize,
    pub descent: DescentConfig<T>,
}

impl<T: Real> SpeedProblem<T> {
    pub fn new(model: ModelParams<T>, h: T, n_x: usize, n_y: usize, descent: DescentConfig<T>) -> Result<Self> {
        model.validate()?;
        descent.validate()?;
        if !(h > T::zero() && h.is_finite()) {
            return Err(Error::validation("h", format!("must be positive, got {h}")));
        }
        if model.dim() == 2 && n_y < 2 {
            return Err(Error::validation("n_y", "a strip needs at least 2 transverse cells"));
        }
        Ok(Self {
            model,
            h,
            n_x,
            n_y,
            descent,
        })
    }

    pub fn params_at(&self, c: T) -> Result<ModelParams<T>> {
        self.model.with_speed(c)
    }

    /// Square wave (line) or square wave times the first transverse mode (strip).
    pub fn cold_start(&self, c: T) -> Result<Profile<T>> {
        let p = self.params_at(c)?;
        match p.solver_half_width() {
            None => square_wave(self.h, self.n_x),
            Some(l) => mode_product(self.h, self.n_x, l, self.n_y),
        }
    }

    /// Carries a minimiser over to speed `c`. On a strip the half-width `c L`
    /// changes; samples keep their transverse index.
    pub fn transfer(&self, w: &Profile<T>, c: T) -> Result<Profile<T>> {
        match self.params_at(c)?.solver_half_width() {
            None => Ok(w.clone()),
            Some(l) => w.with_grid(w.grid().with_half_width(l)?),
        }
    }

    /// Minimises at speed `c`, warm-started from `warm` when given.
    pub fn evaluate(&self, c: T, warm: Option<&Profile<T>>) -> Result<MinimizeResult<T>> {
        let w0 = match warm {
            Some(w) => self.transfer(w, c)?,
            None => self.cold_start(c)?,
        };
        let p = self.params_at(c)?;
        Descent::new(&p, w0.grid(), self.descent)?.minimize(&w0)
    }
}

#[derive(Clone, Debug)]
pub struct ScanSample<T> {
    pub c: T,
    pub j: T,
    pub gradient_term: T,
    pub converged: bool,
    pub iters: usize,
    /// The minimiser (absent when the evaluation failed outright).
    pub minimizer: Option<Profile<T>>,
}

/// `(c_lo, c_hi)` with `J(c_lo) J(c_hi) < 0`, from adjacent converged samples.
#[derive(Clone, Debug)]
pub struct Bracket<T> {
    pub c_lo: T,
    pub j_lo: T,
    pub c_hi: T,
    pub j_hi: T,
    pub w_lo: Option<Profile<T>>,
    pub w_hi: Option<Profile<T>>,
}

#[derive(Clone, Debug)]
pub struct SpeedScan<T> {
    /// Samples in the order they were computed.
    pub samples: Vec<ScanSample<T>>,
    pub increasing: bool,
    /// True when the scan stopped after repeated failures.
    pub aborted: bool,
}

impl<T: Real> SpeedScan<T> {
    /// Samples sorted by increasing `c`.
    pub fn sorted(&self) -> Vec<&ScanSample<T>> {
        let mut s: Vec<_> = self.samples.iter().collect();
        s.sort_by(|a, b| a.c.partial_cmp(&b.c).expect("finite speeds"));
        s
    }

    /// Sign changes between neighbouring converged samples (in increasing `c`).
    pub fn brackets(&self) -> Vec<Bracket<T>> {
        let good: Vec<_> = self.sorted().into_iter().filter(|s| s.converged).collect();
        good.windows(2)
            .filter(|p| p[0].j * p[1].j < T::zero())
            .map(|p| Bracket {
                c_lo: p[0].c,
                j_lo: p[0].j,
                c_hi: p[1].c,
                j_hi: p[1].j,
                w_lo: p[0].minimizer.clone(),
                w_hi: p[1].minimizer.clone(),
            })
            .collect()
    }
}

/// Options of [`scan_jcurve`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScanOptions<T> {
    /// Finer step used between two samples whose energy jump exceeds
    /// `jump_factor` times the running median (`None` disables it).
    pub refine_dc: Option<T>,
    pub jump_factor: T,
    /// Consecutive failures that abort the scan.
    pub max_failures: usize,
}

impl<T: Real> Default for ScanOptions<T> {
    fn default() -> Self {
        Self {
            refine_dc: None,
            jump_factor: T::lit(5.0),
            max_failures: 3,
        }
    }
}

/// Marches `c` from `c_start` toward `c_end` in steps of `dc` with warm starts.
pub fn scan_jcurve<T: Real>(problem: &SpeedProblem<T>, c_start: T, c_end: T, dc: T, opts: &ScanOptions<T>) -> Result<SpeedScan<T>> {
    if !(c_start > T::zero() && c_end > T::zero()) {
        return Err(Error::invalid("scan speeds must be positive"));
    }
    if dc == T::zero() || !dc.is_finite() {
        return Err(Error::invalid("scan step must be nonzero"));
    }
    let increasing = c_end >= c_start;
    let step = if increasing { dc.abs() } else { -dc.abs() };
    let count = ((c_end - c_start) / step + T::lit(1e-9)).floor().to_usize().unwrap_or(0);
    let mut scan = SpeedScan {
        samples: Vec::new(),
        increasing,
        aborted: false,
    };
    let mut warm: Option<Profile<T>> = None;
    let mut failures = 0;
    let mut jumps: Vec<T> = Vec::new();
    for i in 0..=count {
        let c = c_start + step * T::of_usize(i);
        let mut sample = sample_at(problem, c, warm.as_ref());
        let prev = scan.samples.last().map(|p| (p.c, p.j, p.converged));
        if let (Some(fine), Some((prev_c, prev_j, true)), true) = (opts.refine_dc, prev, sample.converged) {
            let jump = (sample.j - prev_j).abs();
            let big = jumps.len() >= 3 && jump > opts.jump_factor * median(&jumps);
            jumps.push(jump);
            if big && fine < step.abs() {
                log::info!("energy jump between c = {prev_c} and c = {c}; refining");
                let sub = (step.abs() / fine).round().to_usize().unwrap_or(1).max(1);
                let fine_step = step / T::of_usize(sub);
                for k in 1..sub {
                    let s = sample_at(problem, prev_c + fine_step * T::of_usize(k), warm.as_ref());
                    if s.converged {
                        warm = s.minimizer.clone();
                    }
                    scan.samples.push(s);
                }
                sample = sample_at(problem, c, warm.as_ref());
            }
        }
        if sample.converged {
            failures = 0;
            warm = sample.minimizer.clone();
        } else {
            failures += 1;
        }
        scan.samples.push(sample);
        if failures >= opts.max_failures {
            log::warn!("scan aborted after {failures} consecutive failures at c = {c}");
            scan.aborted = true;
            break;
        }
    }
    Ok(scan)
}

fn sample_at<T: Real>(problem: &SpeedProblem<T>, c: T, warm: Option<&Profile<T>>) -> ScanSample<T> {
    match problem.evaluate(c, warm) {
        Ok(r) => ScanSample {
            c,
            j: r.j(),
            gradient_term: r.energy.gradient_term,
            converged: r.converged,
            iters: r.iters,
            minimizer: Some(r.w),
        },
        Err(e) => {
            log::warn!("minimisation failed at c = {c}: {e}");
            ScanSample {
                c,
                j: T::nan(),
                gradient_term: T::nan(),
                converged: false,
                iters: 0,
                minimizer: None,
            }
        }
    }
}

fn median<T: Real>(xs: &[T]) -> T {
    let mut v = xs.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    v[v.len() / 2]
}

/// Stopping tolerances for root refinement.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootTolerances<T> {
    /// Bracket width at which refinement stops.
    pub tol_c: T,
    /// `|J| <= tol_j_rel * gradient_term` stops refinement.
    pub tol_j_rel: T,
    /// Consecutive updates of the same endpoint before a bisection step.
    pub stagnation_limit: usize,
    pub max_iters: usize,
}

impl<T: Real> Default for RootTolerances<T> {
    fn default() -> Self {
        Self {
            tol_c: T::lit(1e-3),
            tol_j_rel: T::lit(1e-6),
            stagnation_limit: 10,
            max_iters: 100,
        }
    }
}

/// A value of a bracketed scalar function together with its stopping scale.
#[derive(Clone, Debug)]
pub struct Probe<T, P> {
    pub value: T,
    /// `|value| <= tolerance` ends the search.
    pub tolerance: T,
    pub payload: P,
}

#[derive(Clone, Debug)]
pub struct FalsiOutcome<T, P> {
    pub x: T,
    pub probe: Probe<T, P>,
    /// Final bracket (may have collapsed onto `x`).
    pub lo: T,
    pub hi: T,
    pub evaluations: usize,
}

/// Regula falsi with a bisection fallback. `f` receives the abscissa and the
/// payload of the endpoint nearest to it (a warm start) and returns a probe.
/// Stops when `|f| <= tolerance`, the bracket is narrower than `tol_x`, or
/// after `max_iters` evaluations.
pub fn regula_falsi<T, P, F>(
    mut lo: (T, Probe<T, P>),
    mut hi: (T, Probe<T, P>),
    tol_x: T,
    stagnation_limit: usize,
    max_iters: usize,
    mut f: F,
) -> Result<FalsiOutcome<T, P>>
where
    T: Real,
    P: Clone,
    F: FnMut(T, &P) -> Result<Probe<T, P>>,
{
    if lo.1.value * hi.1.value > T::zero() {
        return Err(Error::BracketLost {
            c_lo: lo.0.to_f64_lossy(),
            j_lo: lo.1.value.to_f64_lossy(),
            c_hi: hi.0.to_f64_lossy(),
            j_hi: hi.1.value.to_f64_lossy(),
        });
    }
    for end in [&lo, &hi] {
        if end.1.value == T::zero() {
            return Ok(FalsiOutcome {
                x: end.0,
                probe: end.1.clone(),
                lo: lo.0,
                hi: hi.0,
                evaluations: 0,
            });
        }
    }
    let mut best = if lo.1.value.abs() <= hi.1.value.abs() { lo.clone() } else { hi.clone() };
    // +1 when the low end was updated last, -1 for the high end
    let mut streak: (i8, usize) = (0, 0);
    let mut evaluations = 0;
    while evaluations < max_iters && (hi.0 - lo.0).abs() > tol_x {
        let (flo, fhi) = (lo.1.value, hi.1.value);
        let mut x = hi.0 - fhi * (hi.0 - lo.0) / (fhi - flo);
        if streak.1 >= stagnation_limit || !(x > lo.0.min(hi.0) && x < lo.0.max(hi.0)) {
            x = T::lit(0.5) * (lo.0 + hi.0);
            streak = (0, 0);
        }
        let near = if (x - lo.0).abs() <= (hi.0 - x).abs() { &lo.1.payload } else { &hi.1.payload };
        let probe = f(x, near)?;
        evaluations += 1;
        if probe.value.abs() < best.1.value.abs() {
            best = (x, probe.clone());
        }
        if probe.value.abs() <= probe.tolerance {
            return Ok(FalsiOutcome {
                x,
                probe,
                lo: lo.0,
                hi: hi.0,
                evaluations,
            });
        }
        let side: i8 = if probe.value * flo > T::zero() { 1 } else { -1 };
        streak = if streak.0 == side { (side, streak.1 + 1) } else { (side, 1) };
        if side == 1 {
            lo = (x, probe);
        } else {
            hi = (x, probe);
        }
    }
    Ok(FalsiOutcome {
        x: best.0,
        probe: best.1,
        lo: lo.0,
        hi: hi.0,
        evaluations,
    })
}

/// A refined wave speed with its minimiser.
#[derive(Clone, Debug)]
pub struct RootResult<T> {
    pub c_root: T,
    pub j_at_root: T,
    pub gradient_term: T,
    pub profile: Profile<T>,
    /// Energy evaluations spent in the refinement.
    pub iterations: usize,
}

/// Refines a scan bracket by regula falsi on `c -> J(c)`; each evaluation is
/// a minimisation warm-started from the nearer endpoint's minimiser.
pub fn refine_root<T: Real>(problem: &SpeedProblem<T>, bracket: &Bracket<T>, tol: &RootTolerances<T>) -> Result<RootResult<T>> {
    let endpoint = |c: T, j: T, w: &Option<Profile<T>>| -> Result<(T, Probe<T, MinimizeResult<T>>)> {
        let r = problem.evaluate(c, w.as_ref())?;
        // falls back on the scan value when the rerun does not converge
        let value = if r.converged { r.j() } else { j };
        Ok((
            c,
            Probe {
                value,
                tolerance: tol.tol_j_rel * r.energy.gradient_term,
                payload: r,
            },
        ))
    };
    let lo = endpoint(bracket.c_lo, bracket.j_lo, &bracket.w_lo)?;
    let hi = endpoint(bracket.c_hi, bracket.j_hi, &bracket.w_hi)?;
    let out = regula_falsi(lo, hi, tol.tol_c, tol.stagnation_limit, tol.max_iters, |c, warm: &MinimizeResult<T>| {
        let r = problem.evaluate(c, Some(&warm.w))?;
        if !r.converged {
            log::warn!("minimisation at c = {c} stopped with {:?}", r.reason);
        }
        Ok(Probe {
            value: r.j(),
            tolerance: tol.tol_j_rel * r.energy.gradient_term,
            payload: r,
        })
    })?;
    Ok(RootResult {
        c_root: out.x,
        j_at_root: out.probe.value,
        gradient_term: out.probe.payload.energy.gradient_term,
        profile: out.probe.payload.w,
        iterations: out.evaluations,
    })
}

/// `2 d c0^2 / (1 - 2 beta)^2`, which tends to 1 for the fastest pulse as `d -> 0`.
pub fn eta_ratio<T: Real>(c0: T, params: &ModelParams<T>) -> T {
    let gap = T::one() - T::lit(2.0) * params.beta;
    T::lit(2.0) * params.d * c0 * c0 / (gap * gap)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn affine(x: f64) -> Probe<f64, ()> {
        Probe {
            value: 3.0 * (x - 1.7),
            tolerance: 1e-12,
            payload: (),
        }
    }

    #[test]
    fn regula_falsi_is_exact_on_affine_functions() {
        let out = regula_falsi((1.0, affine(1.0)), (4.0, affine(4.0)), 1e-9, 10, 50, |x, _| Ok(affine(x))).unwrap();
        assert_eq!(out.evaluations, 1);
        assert!((out.x - 1.7).abs() < 1e-14);
    }

    #[test]
    fn regula_falsi_handles_curved_functions() {
        let f = |x: f64| Probe {
            value: x.powi(3) - 2.0,
            tolerance: 1e-12,
            payload: (),
        };
        let out = regula_falsi((0.0, f(0.0)), (2.0, f(2.0)), 1e-12, 10, 200, |x, _| Ok(f(x))).unwrap();
        assert!((out.x - 2f64.cbrt()).abs() < 1e-10);
    }

    #[test]
    fn same_sign_endpoints_are_rejected() {
        let err = regula_falsi((2.0, affine(2.0)), (3.0, affine(3.0)), 1e-9, 10, 50, |x, _| Ok(affine(x))).unwrap_err();
        assert!(matches!(err, Error::BracketLost { .. }));
    }

    #[test]
    fn eta_examples() {
        let p = ModelParams::<f64>::line(5e-4, 1.0 / 16.0, 0.25, 1.0).unwrap();
        assert!((eta_ratio(14.04, &p) - 0.788_486_4).abs() < 1e-9);
        let q = p.with_d(1e-4).unwrap();
        assert!((eta_ratio(34.70, &q) - 0.963_272).abs() < 1e-9);
        let c_star = (0.25f64 / (2.0 * 5e-4)).sqrt();
        assert!((eta_ratio(c_star, &p) - 1.0).abs() < 1e-14);
    }
}
