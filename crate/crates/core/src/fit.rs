//! Fits one frame's 2D lanes with shared curvature and per-lane biases.
//!
//! For the road-projection form the model is linear in every parameter but
//! the horizon row `rho[1]`. Each iteration solves the linear block jointly
//! by least squares, then moves the horizon by a Gauss-Newton step on the
//! projected residual, keeping the step only if the residual does not grow.
//! When the horizon is known (from a camera) only the linear block is
//! solved. `rho[3]` duplicates the per-lane constant bias and is pinned to
//! zero; in the cubic form `rho[0]` and `rho[1]` are pinned for the same
//! reason.

use alloc::vec;
use alloc::vec::Vec;

use crate::curve::{curve_eval, Curve2D, CurveForm, EPS_DEN};
use crate::error::{Error, Result};
use crate::linalg::{least_squares, Dense};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub form: CurveForm,
    /// Known horizon row, e.g. [`crate::CameraModel::horizon_row`].
    pub horizon: Option<f64>,
    pub iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            form: CurveForm::RoadProjection,
            horizon: None,
            iterations: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurveFit {
    pub curves: Vec<Curve2D>,
    /// Final residual RMS, pixels.
    pub rms: f64,
    /// Residual RMS after each iteration.
    pub rms_history: Vec<f64>,
}

/// Minimum number of points per lane.
pub const MIN_LANE_POINTS: usize = 4;

/// Fits every lane of a frame. Each lane is a list of `(u, v)` pixels;
/// `image_size` is `(height, width)`.
pub fn fit_curves(
    lanes: &[Vec<(f64, f64)>],
    image_size: (u32, u32),
    options: &FitOptions,
) -> Result<CurveFit> {
    let (h, w) = (image_size.0 as f64, image_size.1 as f64);
    let free_horizon = options.form == CurveForm::RoadProjection && options.horizon.is_none();
    let params = 2 + 2 * lanes.len() + usize::from(free_horizon);
    let total: usize = lanes.iter().map(Vec::len).sum();

    if lanes.is_empty() {
        return Err(Error::Underdetermined { points: 0, params });
    }
    for lane in lanes {
        if lane.len() < MIN_LANE_POINTS {
            return Err(Error::Underdetermined {
                points: lane.len(),
                params: MIN_LANE_POINTS,
            });
        }
        for &(u, v) in lane {
            if !(u.is_finite() && v.is_finite() && 0.0 <= u && u < w && 0.0 <= v && v <= h) {
                return Err(Error::InvalidLane("2D point outside the image"));
            }
        }
    }
    if total < params {
        return Err(Error::Underdetermined {
            points: total,
            params,
        });
    }
    if options.iterations == 0 {
        return Err(Error::InvalidConfig("fit needs at least one iteration"));
    }

    let problem = Problem { lanes, h };
    let v_min = lanes
        .iter()
        .flatten()
        .fold(f64::INFINITY, |m, &(_, v)| m.min(v));

    let mut history = Vec::with_capacity(options.iterations);
    let (horizon, solution) = match options.form {
        CurveForm::Poly3 => {
            let sol = problem.solve(options.form, 0.0)?;
            history.resize(options.iterations, sol.rms(total));
            (0.0, sol)
        }
        CurveForm::RoadProjection => {
            if let Some(hz) = options.horizon {
                if !(v_min - hz > EPS_DEN) {
                    return Err(Error::InvalidLane("lane point at or above the horizon"));
                }
                let sol = problem.solve(options.form, hz)?;
                history.resize(options.iterations, sol.rms(total));
                (hz, sol)
            } else {
                let (mut hz, mut sol) = problem.initial_horizon(v_min)?;
                for _ in 0..options.iterations {
                    if let Some((next_h, next)) = problem.horizon_step(hz, &sol, v_min) {
                        hz = next_h;
                        sol = next;
                    }
                    history.push(sol.rms(total));
                }
                (hz, sol)
            }
        }
    };

    let curves = solution.curves(options.form, horizon, lanes, h);
    let rms = residual_rms(&curves, lanes)?;
    Ok(CurveFit {
        curves,
        rms,
        rms_history: history,
    })
}

fn residual_rms(curves: &[Curve2D], lanes: &[Vec<(f64, f64)>]) -> Result<f64> {
    let mut ss = 0.0;
    let mut n = 0usize;
    for (curve, lane) in curves.iter().zip(lanes) {
        for &(u, v) in lane {
            let r = curve_eval(curve, v)? - u;
            ss += r * r;
            n += 1;
        }
    }
    Ok(libm::sqrt(ss / n as f64))
}

struct Problem<'a> {
    lanes: &'a [Vec<(f64, f64)>],
    h: f64,
}

struct LinearSolution {
    shared: [f64; 2],
    biases: Vec<(f64, f64)>,
    residuals: Vec<f64>,
}

impl LinearSolution {
    fn ss(&self) -> f64 {
        self.residuals.iter().map(|r| r * r).sum()
    }

    fn rms(&self, n: usize) -> f64 {
        libm::sqrt(self.ss() / n as f64)
    }

    fn curves(&self, form: CurveForm, horizon: f64, lanes: &[Vec<(f64, f64)>], h: f64) -> Vec<Curve2D> {
        let rho = match form {
            CurveForm::RoadProjection => [self.shared[0], horizon, self.shared[1], 0.0],
            CurveForm::Poly3 => [0.0, 0.0, self.shared[0] / (h * h), self.shared[1] / (h * h * h)],
        };
        lanes
            .iter()
            .zip(&self.biases)
            .map(|(lane, &(bp, bdp))| {
                let (lo, hi) = lane
                    .iter()
                    .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &(_, v)| {
                        (lo.min(v), hi.max(v))
                    });
                Curve2D {
                    form,
                    rho,
                    beta_prime: bp,
                    beta_dprime: bdp,
                    v_low: lo,
                    v_up: hi,
                    confidence: 1.0,
                }
            })
            .collect()
    }
}

impl Problem<'_> {
    fn shared_basis(&self, form: CurveForm, horizon: f64, v: f64) -> [f64; 2] {
        match form {
            CurveForm::RoadProjection => {
                let d = v - horizon;
                [1.0 / (d * d), 1.0 / d]
            }
            CurveForm::Poly3 => {
                let t = v / self.h;
                [t * t, t * t * t]
            }
        }
    }

    fn solve(&self, form: CurveForm, horizon: f64) -> Result<LinearSolution> {
        let total: usize = self.lanes.iter().map(Vec::len).sum();
        let cols = 2 + 2 * self.lanes.len();
        let mut a = Dense::zeros(total, cols);
        let mut b = vec![0.0; total];
        let mut row = 0;
        for (k, lane) in self.lanes.iter().enumerate() {
            for &(u, v) in lane {
                let [s0, s1] = self.shared_basis(form, horizon, v);
                a.set(row, 0, s0);
                a.set(row, 1, s1);
                a.set(row, 2 + 2 * k, v);
                a.set(row, 3 + 2 * k, 1.0);
                b[row] = u;
                row += 1;
            }
        }
        let x = least_squares(&a, &b).ok_or(Error::Underdetermined {
            points: total,
            params: cols,
        })?;
        let residuals = (0..total)
            .map(|r| (0..cols).map(|c| a.at(r, c) * x[c]).sum::<f64>() - b[r])
            .collect();
        Ok(LinearSolution {
            shared: [x[0], x[1]],
            biases: (0..self.lanes.len())
                .map(|k| (x[2 + 2 * k], x[3 + 2 * k]))
                .collect(),
            residuals,
        })
    }

    /// Coarse log-spaced scan of horizon rows above the highest lane point.
    fn initial_horizon(&self, v_min: f64) -> Result<(f64, LinearSolution)> {
        const CANDIDATES: usize = 64;
        let lo: f64 = 0.5;
        let hi = 4.0 * self.h.max(1.0);
        let mut best: Option<(f64, LinearSolution)> = None;
        let mut last_err = None;
        for i in 0..CANDIDATES {
            let gap = lo * libm::pow(hi / lo, i as f64 / (CANDIDATES - 1) as f64);
            match self.solve(CurveForm::RoadProjection, v_min - gap) {
                Ok(sol) => {
                    if best.as_ref().is_none_or(|(_, b)| sol.ss() < b.ss()) {
                        best = Some((v_min - gap, sol));
                    }
                }
                Err(e) => last_err = Some(e),
            }
        }
        best.ok_or_else(|| last_err.unwrap_or(Error::NoGroundIntersection))
    }

    /// One Gauss-Newton step on the horizon with step halving.
    fn horizon_step(
        &self,
        horizon: f64,
        current: &LinearSolution,
        v_min: f64,
    ) -> Option<(f64, LinearSolution)> {
        let gap = v_min - horizon;
        let eps = 1e-6 * gap.max(1.0);
        let plus = self.solve(CurveForm::RoadProjection, horizon + eps.min(gap / 2.0)).ok()?;
        let minus = self.solve(CurveForm::RoadProjection, horizon - eps).ok()?;
        let denom = eps.min(gap / 2.0) + eps;
        let (mut jr, mut jj) = (0.0, 0.0);
        for ((p, m), r) in plus.residuals.iter().zip(&minus.residuals).zip(&current.residuals) {
            let j = (p - m) / denom;
            jr += j * r;
            jj += j * j;
        }
        if !(jj > 0.0) {
            return None;
        }
        let mut step = -jr / jj;
        let base = current.ss();
        for _ in 0..40 {
            let candidate = horizon + step;
            if v_min - candidate > EPS_DEN {
                if let Ok(sol) = self.solve(CurveForm::RoadProjection, candidate) {
                    if sol.ss() <= base {
                        return Some((candidate, sol));
                    }
                }
            }
            step *= 0.5;
        }
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;

    fn sample(curve: &Curve2D, rows: impl Iterator<Item = f64>) -> Vec<(f64, f64)> {
        rows.map(|v| (curve_eval(curve, v).unwrap(), v)).collect()
    }

    fn lane(rho: [f64; 4], bp: f64, bdp: f64) -> Curve2D {
        Curve2D {
            form: CurveForm::RoadProjection,
            rho,
            beta_prime: bp,
            beta_dprime: bdp,
            v_low: 400.0,
            v_up: 700.0,
            confidence: 1.0,
        }
    }

    #[test]
    fn recovers_known_parameters_with_known_horizon() {
        let rho = [2.0e4, 360.0, -300.0, 0.0];
        let truth = [lane(rho, 1.2, -150.0), lane(rho, -0.3, 500.0), lane(rho, 0.4, 100.0)];
        let lanes: Vec<_> = truth
            .iter()
            .map(|c| sample(c, (0..15).map(|i| 400.0 + 20.0 * i as f64)))
            .collect();
        let fit = fit_curves(
            &lanes,
            (720, 960),
            &FitOptions {
                horizon: Some(360.0),
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(fit.rms < 1e-6, "rms {}", fit.rms);
        for (f, t) in fit.curves.iter().zip(&truth) {
            assert!((f.beta_prime - t.beta_prime).abs() < 1e-6);
            assert!((f.beta_dprime - t.beta_dprime).abs() < 1e-6);
            assert_eq!(f.rho, fit.curves[0].rho);
            assert_eq!(f.v_low, 400.0);
            assert_eq!(f.v_up, 680.0);
        }
        assert_eq!(fit.rms_history.len(), 10);
    }

    #[test]
    fn estimates_the_horizon_when_unknown() {
        let rho = [1.5e4, 330.0, -200.0, 0.0];
        let truth = [lane(rho, 0.8, -50.0), lane(rho, -0.6, 700.0)];
        let lanes: Vec<_> = truth
            .iter()
            .map(|c| sample(c, (0..20).map(|i| 380.0 + 16.0 * i as f64)))
            .collect();
        let fit = fit_curves(&lanes, (720, 960), &FitOptions::default()).unwrap();
        assert!(fit.rms < 1e-6, "rms {}", fit.rms);
        assert!((fit.curves[0].rho[1] - 330.0).abs() < 1e-4);
        for pair in fit.rms_history.windows(2) {
            assert!(pair[1] <= pair[0]);
        }
    }

    #[test]
    fn vertical_lane_is_a_constant_column() {
        let lanes = vec![(0..8).map(|i| (321.0, 400.0 + 30.0 * i as f64)).collect::<Vec<_>>()];
        let fit = fit_curves(&lanes, (720, 960), &FitOptions::default()).unwrap();
        let c = &fit.curves[0];
        assert!(c.beta_prime.abs() < 1e-9);
        assert!(fit.rms < 1e-9);
        assert!((curve_eval(c, 500.0).unwrap() - 321.0).abs() < 1e-9);
    }

    #[test]
    fn poly3_round_trip() {
        let truth = Curve2D {
            form: CurveForm::Poly3,
            rho: [0.0, 0.0, 2e-4, -1e-7],
            ..lane([0.0; 4], 0.5, 200.0)
        };
        let lanes = vec![sample(&truth, (0..10).map(|i| 100.0 + 50.0 * i as f64))];
        let fit = fit_curves(
            &lanes,
            (720, 960),
            &FitOptions {
                form: CurveForm::Poly3,
                ..FitOptions::default()
            },
        )
        .unwrap();
        assert!(fit.rms < 1e-6);
        assert!((fit.curves[0].beta_dprime - 200.0).abs() < 1e-6);
    }

    #[test]
    fn three_point_lane_is_underdetermined() {
        let lanes = vec![vec![(10.0, 400.0), (12.0, 500.0), (14.0, 600.0)]];
        assert!(matches!(
            fit_curves(&lanes, (720, 960), &FitOptions::default()),
            Err(Error::Underdetermined { .. })
        ));
    }

    #[test]
    fn points_outside_the_image_are_rejected() {
        let lanes = vec![vec![(10.0, 400.0), (12.0, 500.0), (14.0, 600.0), (2000.0, 700.0)]];
        assert!(fit_curves(&lanes, (720, 960), &FitOptions::default()).is_err());
    }
}
