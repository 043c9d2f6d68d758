//! Closed-form check of the interface dynamics.
//!
//! At `x = 0` the boundary condition and the continuity equation combine into
//! the scalar linear ODE
//!
//! ```text
//! y' + (gamma/mu) [p_b(R) - 2/(We R)] y = (Ca/2)(gamma/mu) R^(-2 gamma),   y = (rho~ R^2)^(-gamma)
//! ```
//!
//! which is integrated here by its Duhamel representation using only the
//! recorded radius history.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::integrator::{HistoryPoint, Trajectory};
use crate::operators::interface_load;
use crate::params::Parameters;

/// Radius samples `(t_m, R_m)` at every accepted step.
#[derive(Debug, Clone, PartialEq)]
pub struct RadiusHistory {
    t: Vec<f64>,
    radius: Vec<f64>,
}

impl RadiusHistory {
    pub fn new(t: Vec<f64>, radius: Vec<f64>) -> Result<Self> {
        if t.is_empty() || t.len() != radius.len() {
            return Err(Error::Other(format!(
                "radius history needs matching non-empty columns ({} times, {} radii)",
                t.len(),
                radius.len()
            )));
        }
        if t.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Other("radius history times must increase strictly".into()));
        }
        if radius.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::Other("radius history contains a non-positive radius".into()));
        }
        Ok(Self { t, radius })
    }

    pub fn from_points(points: &[HistoryPoint]) -> Result<Self> {
        Self::new(
            points.iter().map(|p| p.t).collect(),
            points.iter().map(|p| p.radius).collect(),
        )
    }

    pub fn times(&self) -> &[f64] {
        &self.t
    }

    pub fn radii(&self) -> &[f64] {
        &self.radius
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn start(&self) -> f64 {
        self.t[0]
    }

    pub fn end(&self) -> f64 {
        self.t[self.t.len() - 1]
    }

    /// Index `m` with `t_m <= t <= t_{m+1}`.
    fn locate(&self, t: f64) -> Result<usize> {
        let (start, end) = (self.start(), self.end());
        if !(t >= start && t <= end) {
            return Err(Error::OutsideHistory { t, start, end });
        }
        let m = self.t.partition_point(|&s| s <= t);
        Ok(m.saturating_sub(1).min(self.t.len().saturating_sub(2)))
    }

    /// Piecewise-linear radius.
    pub fn radius_at(&self, t: f64) -> Result<f64> {
        if self.len() == 1 {
            return if t == self.t[0] {
                Ok(self.radius[0])
            } else {
                Err(Error::OutsideHistory { t, start: self.t[0], end: self.t[0] })
            };
        }
        let m = self.locate(t)?;
        let w = (t - self.t[m]) / (self.t[m + 1] - self.t[m]);
        Ok(self.radius[m] + w * (self.radius[m + 1] - self.radius[m]))
    }
}

/// `(gamma/mu) [p_b(R) - 2/(We R)]`, the damping rate of the interface ODE.
fn damping_rate(radius: f64, params: &Parameters) -> f64 {
    params.gamma / params.mu * interface_load(radius, params)
}

/// `(Ca/2)(gamma/mu) R^(-2 gamma)`, the forcing of the interface ODE.
fn forcing(radius: f64, params: &Parameters) -> f64 {
    0.5 * params.ca * params.gamma / params.mu * radius.powf(-2.0 * params.gamma)
}

/// Cumulative trapezoid integral of the damping rate at the history nodes.
fn cumulative_rate(history: &RadiusHistory, params: &Parameters) -> Vec<f64> {
    let rates: Vec<f64> = history.radius.iter().map(|&r| damping_rate(r, params)).collect();
    let mut acc = Vec::with_capacity(rates.len());
    let mut sum = 0.0;
    acc.push(0.0);
    for m in 1..rates.len() {
        sum += 0.5 * (history.t[m] - history.t[m - 1]) * (rates[m] + rates[m - 1]);
        acc.push(sum);
    }
    acc
}

/// Integral of the damping rate from the history start to `t`.
fn rate_integral_to(history: &RadiusHistory, acc: &[f64], t: f64, params: &Parameters) -> Result<f64> {
    if history.len() == 1 {
        history.radius_at(t)?;
        return Ok(0.0);
    }
    let m = history.locate(t)?;
    let r = history.radius_at(t)?;
    let head = 0.5 * (t - history.t[m]) * (damping_rate(history.radius[m], params) + damping_rate(r, params));
    Ok(acc[m] + head)
}

/// `S(tau -> t) = exp{-(gamma/mu) int_tau^t [p_b(R) - 2/(We R)] ds}` by the
/// trapezoid rule on the history, interpolating `R` linearly off the grid.
pub fn damping_factor(history: &RadiusHistory, tau: f64, t: f64, params: &Parameters) -> Result<f64> {
    if tau > t {
        return Err(Error::Other(format!("damping factor needs tau <= t, got {tau} > {t}")));
    }
    let acc = cumulative_rate(history, params);
    let a_t = rate_integral_to(history, &acc, t, params)?;
    let a_tau = rate_integral_to(history, &acc, tau, params)?;
    Ok((-(a_t - a_tau)).exp())
}

/// How the damping factor inside the Duhamel integral is read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DuhamelReading {
    /// `S(tau -> t)`, the exact integrating factor.
    TwoTime,
    /// `S(0 -> t - tau)`, the autonomous shorthand. Quadratic cost.
    Shifted,
}

/// `int_0^1 (1 - s) e^(-z (1 - s)) ds` and `int_0^1 s e^(-z (1 - s)) ds`.
fn exponential_weights(z: f64) -> (f64, f64) {
    if z.abs() < 1e-3 {
        let w_old = 0.5 - z / 3.0 + z * z / 8.0 - z * z * z / 30.0;
        let phi1 = 1.0 - z / 2.0 + z * z / 6.0 - z * z * z / 24.0;
        return (w_old, phi1 - w_old);
    }
    let one_minus_e = -(-z).exp_m1();
    let phi1 = one_minus_e / z;
    let w_old = (one_minus_e - z * (-z).exp()) / (z * z);
    (w_old, phi1 - w_old)
}

/// Duhamel solution at every history time, starting from `init_value`.
pub fn duhamel_boundary(
    history: &RadiusHistory,
    init_value: f64,
    params: &Parameters,
    reading: DuhamelReading,
) -> Result<Vec<f64>> {
    if !(init_value > 0.0 && init_value.is_finite()) {
        return Err(Error::Other(format!("initial boundary value {init_value} must be positive")));
    }
    let acc = cumulative_rate(history, params);
    let f: Vec<f64> = history.radius.iter().map(|&r| forcing(r, params)).collect();
    let t = &history.t;
    match reading {
        DuhamelReading::TwoTime => {
            // Over each step the rate is held at its trapezoid mean and the
            // forcing varies linearly, which integrates exactly.
            let mut out = Vec::with_capacity(t.len());
            let mut y = init_value;
            out.push(y);
            for m in 1..t.len() {
                let h = t[m] - t[m - 1];
                let z = acc[m] - acc[m - 1];
                let (w_old, w_new) = exponential_weights(z);
                y = y * (-z).exp() + h * (w_old * f[m - 1] + w_new * f[m]);
                out.push(y);
            }
            Ok(out)
        }
        DuhamelReading::Shifted => {
            let t0 = t[0];
            let mut out = Vec::with_capacity(t.len());
            for m in 0..t.len() {
                let mut y = init_value * (-acc[m]).exp();
                for i in 0..m {
                    let h = t[i + 1] - t[i];
                    let s_i = (-rate_integral_to(history, &acc, t0 + (t[m] - t[i]), params)?).exp();
                    let s_next = (-rate_integral_to(history, &acc, t0 + (t[m] - t[i + 1]), params)?).exp();
                    y += 0.5 * h * (f[i] * s_i + f[i + 1] * s_next);
                }
                out.push(y);
            }
            Ok(out)
        }
    }
}

/// `Ca/2 R^(-2 gamma) / [p_b(R) - 2/(We R)]` at every history time.
pub fn equilibrium_envelope(history: &RadiusHistory, params: &Parameters) -> Result<Vec<f64>> {
    history
        .radius
        .iter()
        .map(|&r| {
            let bracket = interface_load(r, params);
            if bracket > 0.0 {
                Ok(0.5 * params.ca * r.powf(-2.0 * params.gamma) / bracket)
            } else {
                Err(Error::NonPositiveBracket { radius: r })
            }
        })
        .collect()
}

/// Residual of the interface ODE for a series `y` on the history grid,
/// using centred differences at interior points.
pub fn boundary_ode_residual(history: &RadiusHistory, y: &[f64], params: &Parameters) -> Vec<f64> {
    let t = &history.t;
    (1..t.len().saturating_sub(1))
        .map(|m| {
            let dy = (y[m + 1] - y[m - 1]) / (t[m + 1] - t[m - 1]);
            let r = history.radius[m];
            dy + damping_rate(r, params) * y[m] - forcing(r, params)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub times: Vec<f64>,
    pub simulated: Vec<f64>,
    pub oracle: Vec<f64>,
    pub diff: Vec<f64>,
    pub sup_diff: f64,
}

impl OracleReport {
    pub fn new(times: Vec<f64>, simulated: Vec<f64>, oracle: Vec<f64>) -> Self {
        let diff: Vec<f64> = simulated.iter().zip(&oracle).map(|(s, o)| s - o).collect();
        let sup_diff = diff.iter().fold(0.0f64, |m, d| m.max(d.abs()));
        Self {
            times,
            simulated,
            oracle,
            diff,
            sup_diff,
        }
    }
}

/// Compares a simulated trace with the Duhamel solution driven by the same
/// radius history.
pub fn compare_history(points: &[HistoryPoint], params: &Parameters) -> Result<OracleReport> {
    let history = RadiusHistory::from_points(points)?;
    let simulated: Vec<f64> = points.iter().map(|p| p.boundary_density).collect();
    let oracle = duhamel_boundary(&history, simulated[0], params, DuhamelReading::TwoTime)?;
    Ok(OracleReport::new(history.t, simulated, oracle))
}

pub fn oracle_compare(trajectory: &Trajectory, params: &Parameters) -> Result<OracleReport> {
    compare_history(&trajectory.history, params)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_history(t_end: f64, m: usize) -> RadiusHistory {
        let t: Vec<f64> = (0..=m).map(|i| t_end * i as f64 / m as f64).collect();
        let r = vec![1.0; t.len()];
        RadiusHistory::new(t, r).unwrap()
    }

    fn wobbly_history(t_end: f64, m: usize) -> RadiusHistory {
        let t: Vec<f64> = (0..=m).map(|i| t_end * i as f64 / m as f64).collect();
        let r = t.iter().map(|s| 1.0 + 0.05 * (-0.1 * s).exp() * (2.0 * s).cos()).collect();
        RadiusHistory::new(t, r).unwrap()
    }

    #[test]
    fn history_validation() {
        assert!(RadiusHistory::new(vec![0.0, 0.0], vec![1.0, 1.0]).is_err());
        assert!(RadiusHistory::new(vec![0.0, 1.0], vec![1.0, 0.0]).is_err());
        assert!(RadiusHistory::new(vec![0.0], vec![1.0, 1.0]).is_err());
        let h = wobbly_history(1.0, 4);
        assert!(matches!(h.radius_at(2.0), Err(Error::OutsideHistory { .. })));
        assert!((h.radius_at(0.125).unwrap() - 0.5 * (h.radii()[0] + h.radii()[1])).abs() < 1e-15);
    }

    #[test]
    fn damping_factor_values() {
        let p = Parameters::default();
        let h = unit_history(4.0, 40);
        assert_eq!(damping_factor(&h, 1.3, 1.3, &p).unwrap(), 1.0);
        for t in [0.5, 1.25, 4.0] {
            let exact = (-p.gamma * p.ca * t / (2.0 * p.mu)).exp();
            assert!((damping_factor(&h, 0.0, t, &p).unwrap() - exact).abs() < 1e-14);
        }
        assert!(damping_factor(&h, 0.0, 5.0, &p).is_err());
        assert!(damping_factor(&h, 2.0, 1.0, &p).is_err());
    }

    #[test]
    fn damping_factor_semigroup() {
        let p = Parameters::default();
        let h = wobbly_history(10.0, 1000);
        for (a, b, c) in [(0.0, 2.5, 7.0), (1.0, 1.0, 3.0), (0.3, 5.55, 9.99)] {
            let whole = damping_factor(&h, a, c, &p).unwrap();
            let split = damping_factor(&h, a, b, &p).unwrap() * damping_factor(&h, b, c, &p).unwrap();
            assert!((whole - split).abs() < 1e-12 * whole.max(1e-300));
        }
    }

    #[test]
    fn weights_match_quadrature() {
        for z in [-0.5, -1e-4, 0.0, 3e-4, 2e-3, 0.7, 5.0] {
            let (a, b) = exponential_weights(z);
            let m = 20000;
            let (mut qa, mut qb) = (0.0, 0.0);
            for i in 0..m {
                let s = (i as f64 + 0.5) / m as f64;
                let e = (-z * (1.0 - s)).exp();
                qa += (1.0 - s) * e / m as f64;
                qb += s * e / m as f64;
            }
            assert!((a - qa).abs() < 1e-8 && (b - qb).abs() < 1e-8, "z = {z}");
        }
    }

    #[test]
    fn equilibrium_history_is_steady() {
        let p = Parameters::default();
        let h = unit_history(5.0, 1000);
        let y = duhamel_boundary(&h, 1.0, &p, DuhamelReading::TwoTime).unwrap();
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-13));
        // plain trapezoid in the shifted reading
        let y = duhamel_boundary(&h, 1.0, &p, DuhamelReading::Shifted).unwrap();
        assert!(y.iter().all(|v| (v - 1.0).abs() < 1e-5));
    }

    #[test]
    fn relaxation_from_two() {
        let p = Parameters::default();
        let h = unit_history(3.0, 3000);
        let y = duhamel_boundary(&h, 2.0, &p, DuhamelReading::TwoTime).unwrap();
        for (t, v) in h.times().iter().zip(&y) {
            let exact = 1.0 + (-p.gamma * p.ca * t / (2.0 * p.mu)).exp();
            assert!((v - exact).abs() < 1e-6);
        }
    }

    #[test]
    fn duhamel_solves_the_ode() {
        let p = Parameters::default();
        let mut worst = Vec::new();
        for m in [500, 1000, 2000] {
            let h = wobbly_history(10.0, m);
            let y = duhamel_boundary(&h, 1.3, &p, DuhamelReading::TwoTime).unwrap();
            assert!(y.iter().all(|v| *v > 0.0));
            let res = boundary_ode_residual(&h, &y, &p);
            worst.push(res.iter().fold(0.0f64, |a, r| a.max(r.abs())));
        }
        assert!(worst[0] < 1e-2);
        assert!(worst[0] / worst[2] > 3.0, "{worst:?}");
    }

    #[test]
    fn readings_differ_on_moving_radius() {
        let p = Parameters::default();
        let h = wobbly_history(5.0, 200);
        let a = duhamel_boundary(&h, 1.0, &p, DuhamelReading::TwoTime).unwrap();
        let b = duhamel_boundary(&h, 1.0, &p, DuhamelReading::Shifted).unwrap();
        assert_eq!(a[0], b[0]);
        let gap = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        assert!(gap > 1e-4);
    }

    #[test]
    fn envelope_values() {
        let p = Parameters::default();
        let h = unit_history(1.0, 2);
        assert!(equilibrium_envelope(&h, &p).unwrap().iter().all(|e| (e - 1.0).abs() < 1e-15));
        let q = Parameters::new(1.0, 1.0, 1.0, 2.0, 4.0 / 3.0).unwrap();
        let far = RadiusHistory::new(vec![0.0], vec![2.0]).unwrap();
        assert!(matches!(
            equilibrium_envelope(&far, &q),
            Err(Error::NonPositiveBracket { .. })
        ));
    }

    #[test]
    fn corrupted_trace_is_detected() {
        let p = Parameters::default();
        let h = wobbly_history(5.0, 500);
        let y = duhamel_boundary(&h, 1.0, &p, DuhamelReading::TwoTime).unwrap();
        let points: Vec<HistoryPoint> = h
            .times()
            .iter()
            .zip(h.radii())
            .zip(&y)
            .map(|((&t, &radius), &b)| HistoryPoint { t, radius, boundary_density: b })
            .collect();
        assert!(compare_history(&points, &p).unwrap().sup_diff < 1e-14);
        // Offsetting rho~ by 0.1 after the start moves (rho~ R^2)^(-gamma) by ~0.13.
        let corrupted: Vec<HistoryPoint> = points
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let mut q = *q;
                if i > 0 {
                    let rho = q.boundary_density.powf(-1.0 / p.gamma) / (q.radius * q.radius);
                    q.boundary_density = ((rho + 0.1) * q.radius * q.radius).powf(-p.gamma);
                }
                q
            })
            .collect();
        assert!(compare_history(&corrupted, &p).unwrap().sup_diff >= 0.05);
    }
}
