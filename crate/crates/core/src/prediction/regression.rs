//! Online least-squares fits of the opponent's concession curve.
//!
//! Three families are fitted over `(t, u)` observations from the current
//! negotiation thread only:
//!
//! * linear    `u = b·t + a`
//! * power     `u = a·t^b`
//! * quadratic `u = a·t² + b·t + c`

use std::fmt;

use serde::{Deserialize, Serialize};

use super::PredictionError;

/// Absolute SSE difference under which two fits count as equally good.
pub const SSE_TIE: f64 = 1e-9;

/// Width of the bracket at which bisection stops.
pub const CROSSING_TOLERANCE: f64 = 1e-6;

const GRID_STEPS: usize = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Linear,
    Power,
    Quadratic,
}

impl Family {
    /// Simplicity order, used to break SSE ties.
    pub const ALL: [Family; 3] = [Family::Linear, Family::Power, Family::Quadratic];

    pub fn min_points(self) -> usize {
        match self {
            Family::Linear | Family::Power => 2,
            Family::Quadratic => 3,
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Family::Linear => "linear",
            Family::Power => "power",
            Family::Quadratic => "quadratic",
        })
    }
}

/// Observed `(t, u)` pairs: strictly increasing `t ≥ 0`, utilities in `[0, 100]`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ObservationSeries {
    points: Vec<(f64, f64)>,
    /// Upper bound of the time axis (`0 ≤ t ≤ tau`).
    tau: f64,
}

impl ObservationSeries {
    pub fn new(points: Vec<(f64, f64)>) -> Result<Self, PredictionError> {
        let tau = points.last().map_or(1.0, |p| p.0.max(1.0));
        Self::with_tau(points, tau)
    }

    pub fn with_tau(points: Vec<(f64, f64)>, tau: f64) -> Result<Self, PredictionError> {
        for (i, &(t, u)) in points.iter().enumerate() {
            if !t.is_finite() || !u.is_finite() {
                return Err(PredictionError::Data(format!("point {i} is not finite")));
            }
            if t < 0.0 || t > tau {
                return Err(PredictionError::Data(format!("t={t} outside [0, {tau}]")));
            }
            if !(0.0..=100.0).contains(&u) {
                return Err(PredictionError::Data(format!(
                    "utility {u} outside [0, 100]"
                )));
            }
            if i > 0 && t <= points[i - 1].0 {
                return Err(PredictionError::Data(
                    "t must be strictly increasing".into(),
                ));
            }
        }
        Ok(Self { points, tau })
    }

    pub fn points(&self) -> &[(f64, f64)] {
        &self.points
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    fn admits(&self, family: Family) -> bool {
        self.len() >= family.min_points()
            && (family != Family::Power || self.points.iter().all(|&(t, u)| t > 0.0 && u > 0.0))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub family: Family,
    pub a: f64,
    pub b: f64,
    /// Only used by the quadratic family.
    pub c: f64,
    pub sse: f64,
    pub n_points: usize,
}

impl RegressionFit {
    /// Raw value of the fitted curve at `t`.
    pub fn eval(&self, t: f64) -> f64 {
        match self.family {
            Family::Linear => self.b * t + self.a,
            Family::Power => self.a * t.powf(self.b),
            Family::Quadratic => (self.a * t + self.b) * t + self.c,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct PredictedUtility {
    /// Clamped to `[0, 100]`.
    pub utility: f64,
    pub raw: f64,
}

pub fn predict_utility(fit: &RegressionFit, t: f64) -> PredictedUtility {
    let raw = fit.eval(t);
    let utility = if raw.is_nan() {
        0.0
    } else {
        raw.clamp(0.0, 100.0)
    };
    PredictedUtility { utility, raw }
}

fn sse_of(fit: &RegressionFit, series: &ObservationSeries) -> f64 {
    series
        .points
        .iter()
        .map(|&(t, u)| {
            let r = u - fit.eval(t);
            r * r
        })
        .sum()
}

/// Least-squares fit of one family.
pub fn fit_regression(
    series: &ObservationSeries,
    family: Family,
) -> Result<RegressionFit, PredictionError> {
    let n = series.len();
    if n < family.min_points() {
        return Err(PredictionError::TooFewPoints {
            family,
            needed: family.min_points(),
            got: n,
        });
    }
    let mut fit = match family {
        Family::Linear => {
            let (slope, intercept) = line(series.points.iter().copied())?;
            RegressionFit {
                family,
                a: intercept,
                b: slope,
                c: 0.0,
                sse: 0.0,
                n_points: n,
            }
        }
        Family::Power => {
            if let Some(&(t, u)) = series.points.iter().find(|&&(t, u)| t <= 0.0 || u <= 0.0) {
                return Err(PredictionError::Domain(format!(
                    "power fit needs t > 0 and u > 0, got ({t}, {u})"
                )));
            }
            let (slope, intercept) = line(series.points.iter().map(|&(t, u)| (t.ln(), u.ln())))?;
            RegressionFit {
                family,
                a: intercept.exp(),
                b: slope,
                c: 0.0,
                sse: 0.0,
                n_points: n,
            }
        }
        Family::Quadratic => {
            let (a, b, c) = parabola(&series.points)?;
            RegressionFit {
                family,
                a,
                b,
                c,
                sse: 0.0,
                n_points: n,
            }
        }
    };
    if ![fit.a, fit.b, fit.c].iter().all(|p| p.is_finite()) {
        return Err(PredictionError::Degenerate(format!(
            "{family} fit has non-finite parameters"
        )));
    }
    fit.sse = sse_of(&fit, series);
    Ok(fit)
}

/// Slope and intercept of the least-squares line, from centered sums.
fn line(points: impl Iterator<Item = (f64, f64)> + Clone) -> Result<(f64, f64), PredictionError> {
    let n = points.clone().count() as f64;
    let (sx, sy) = points
        .clone()
        .fold((0.0, 0.0), |(sx, sy), (x, y)| (sx + x, sy + y));
    let (mx, my) = (sx / n, sy / n);
    let (sxx, sxy, scale) = points.fold((0.0, 0.0, 0.0), |(sxx, sxy, scale), (x, y)| {
        let dx = x - mx;
        (sxx + dx * dx, sxy + dx * (y - my), scale + x * x)
    });
    if sxx <= 1e-12 * scale.max(1.0) {
        return Err(PredictionError::Degenerate("all t values are equal".into()));
    }
    let slope = sxy / sxx;
    Ok((slope, my - slope * mx))
}

/// `(a, b, c)` of `a·t² + b·t + c` via the normal equations.
///
/// `t` is centered and scaled before forming the 3×3 system; coefficients are
/// mapped back afterwards.
fn parabola(points: &[(f64, f64)]) -> Result<(f64, f64, f64), PredictionError> {
    let n = points.len() as f64;
    let mean = points.iter().map(|p| p.0).sum::<f64>() / n;
    let spread = points
        .iter()
        .map(|p| (p.0 - mean).abs())
        .fold(0.0, f64::max);
    if spread == 0.0 {
        return Err(PredictionError::Degenerate("all t values are equal".into()));
    }
    // power sums of s = (t - mean)/spread
    let mut s = [0.0; 5];
    let mut r = [0.0; 3];
    for &(t, u) in points {
        let x = (t - mean) / spread;
        let mut xp = 1.0;
        for (k, sk) in s.iter_mut().enumerate() {
            *sk += xp;
            if k < 3 {
                r[k] += xp * u;
            }
            xp *= x;
        }
    }
    let m = [[s[0], s[1], s[2]], [s[1], s[2], s[3]], [s[2], s[3], s[4]]];
    let [c0, c1, c2] = solve3(m, r)?;
    // u = c2·s² + c1·s + c0 with s = (t - mean)/spread
    let h2 = spread * spread;
    let a = c2 / h2;
    let b = c1 / spread - 2.0 * mean * c2 / h2;
    let c = c0 - c1 * mean / spread + c2 * mean * mean / h2;
    Ok((a, b, c))
}

/// Gaussian elimination with partial pivoting.
fn solve3(mut m: [[f64; 3]; 3], mut r: [f64; 3]) -> Result<[f64; 3], PredictionError> {
    let scale = m.iter().flatten().fold(0.0f64, |acc, v| acc.max(v.abs()));
    for col in 0..3 {
        let pivot = (col..3)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap_or(col);
        if m[pivot][col].abs() <= 1e-12 * scale {
            return Err(PredictionError::Degenerate(
                "singular normal equations".into(),
            ));
        }
        m.swap(col, pivot);
        r.swap(col, pivot);
        for row in col + 1..3 {
            let f = m[row][col] / m[col][col];
            let pivot_row = m[col];
            for (dst, src) in m[row][col..].iter_mut().zip(&pivot_row[col..]) {
                *dst -= f * src;
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = [0.0; 3];
    for row in (0..3).rev() {
        let tail: f64 = (row + 1..3).map(|k| m[row][k] * x[k]).sum();
        x[row] = (r[row] - tail) / m[row][row];
    }
    Ok(x)
}

/// Fits every admissible family and keeps the lowest SSE. Near-ties go to
/// the simpler family.
pub fn select_model(series: &ObservationSeries) -> Result<RegressionFit, PredictionError> {
    if series.len() < Family::Quadratic.min_points() {
        return Err(PredictionError::TooFewPoints {
            family: Family::Quadratic,
            needed: Family::Quadratic.min_points(),
            got: series.len(),
        });
    }
    let mut best: Option<RegressionFit> = None;
    for family in Family::ALL {
        if !series.admits(family) {
            continue;
        }
        let fit = fit_regression(series, family)?;
        best = match best {
            Some(b) if fit.sse >= b.sse - SSE_TIE => Some(b),
            _ => Some(fit),
        };
    }
    best.ok_or_else(|| PredictionError::Degenerate("no admissible family".into()))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(tag = "kind", content = "t", rename_all = "kebab-case")]
pub enum Crossing {
    At(f64),
    NoneBeforeDeadline,
}

impl Crossing {
    pub fn time(self) -> Option<f64> {
        match self {
            Crossing::At(t) => Some(t),
            Crossing::NoneBeforeDeadline => None,
        }
    }
}

/// First `t` in `[0, deadline]` where the fitted opponent curve reaches
/// `reservation`.
pub fn estimate_crossing(fit: &RegressionFit, reservation: f64, deadline: f64) -> Crossing {
    estimate_crossing_from(fit, reservation, 0.0, deadline)
}

/// Like [`estimate_crossing`] but only looks at `[start, deadline]`.
pub fn estimate_crossing_from(
    fit: &RegressionFit,
    reservation: f64,
    start: f64,
    deadline: f64,
) -> Crossing {
    if start > deadline {
        return Crossing::NoneBeforeDeadline;
    }
    let at_start = if fit.family == Family::Power && start == 0.0 {
        power_at_zero(fit)
    } else {
        fit.eval(start)
    };
    if at_start >= reservation {
        return Crossing::At(start);
    }
    let root = match fit.family {
        Family::Linear => (fit.b > 0.0).then(|| (reservation - fit.a) / fit.b),
        Family::Power => {
            (fit.a > 0.0 && fit.b > 0.0).then(|| (reservation / fit.a).powf(1.0 / fit.b))
        }
        Family::Quadratic => quadratic_root_after(fit, reservation, start),
    };
    match root {
        Some(t) if t.is_finite() && t <= deadline => Crossing::At(t.max(start)),
        _ => Crossing::NoneBeforeDeadline,
    }
}

fn power_at_zero(fit: &RegressionFit) -> f64 {
    match fit.b.total_cmp(&0.0) {
        std::cmp::Ordering::Greater => 0.0,
        std::cmp::Ordering::Equal => fit.a,
        std::cmp::Ordering::Less if fit.a > 0.0 => f64::INFINITY,
        std::cmp::Ordering::Less => f64::NEG_INFINITY,
    }
}

/// Smallest root of `a·t² + b·t + c − reservation` after `start`.
fn quadratic_root_after(fit: &RegressionFit, reservation: f64, start: f64) -> Option<f64> {
    let (a, b, c) = (fit.a, fit.b, fit.c - reservation);
    if a.abs() < 1e-15 {
        return (b > 0.0).then(|| -c / b);
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        return None;
    }
    let sq = disc.sqrt();
    // numerically stable pair of roots
    let q = -0.5 * (b + b.signum() * sq);
    let mut roots = [q / a, if q != 0.0 { c / q } else { q / a }];
    roots.sort_by(f64::total_cmp);
    roots.into_iter().find(|&r| r > start)
}

/// First crossing of an arbitrary curve, by grid scan then bisection.
pub fn first_crossing<F: Fn(f64) -> f64>(
    curve: F,
    reservation: f64,
    start: f64,
    deadline: f64,
) -> Crossing {
    if start > deadline {
        return Crossing::NoneBeforeDeadline;
    }
    if curve(start) >= reservation {
        return Crossing::At(start);
    }
    let step = (deadline - start) / GRID_STEPS as f64;
    let mut lo = start;
    for i in 1..=GRID_STEPS {
        let hi = if i == GRID_STEPS {
            deadline
        } else {
            start + step * i as f64
        };
        if curve(hi) >= reservation {
            let mut hi = hi;
            while hi - lo > CROSSING_TOLERANCE {
                let mid = 0.5 * (lo + hi);
                if curve(mid) >= reservation {
                    hi = mid;
                } else {
                    lo = mid;
                }
            }
            return Crossing::At(hi);
        }
        lo = hi;
    }
    Crossing::NoneBeforeDeadline
}

#[cfg(test)]
mod tests {
    use super::*;

    fn series(points: &[(f64, f64)]) -> ObservationSeries {
        ObservationSeries::new(points.to_vec()).unwrap()
    }

    #[test]
    fn exact_line() {
        let f = fit_regression(
            &series(&[(0.0, 10.0), (1.0, 12.0), (2.0, 14.0)]),
            Family::Linear,
        )
        .unwrap();
        assert!((f.a - 10.0).abs() < 1e-12 && (f.b - 2.0).abs() < 1e-12);
        assert!(f.sse < 1e-20);
    }

    #[test]
    fn exact_power_law() {
        let f = fit_regression(
            &series(&[(1.0, 3.0), (2.0, 12.0), (3.0, 27.0)]),
            Family::Power,
        )
        .unwrap();
        assert!((f.a - 3.0).abs() < 1e-9 && (f.b - 2.0).abs() < 1e-9);
        assert!(f.sse < 1e-9);
    }

    #[test]
    fn exact_parabola() {
        let f = fit_regression(
            &series(&[(0.0, 3.0), (1.0, 6.0), (2.0, 11.0)]),
            Family::Quadratic,
        )
        .unwrap();
        assert!((f.a - 1.0).abs() < 1e-12);
        assert!((f.b - 2.0).abs() < 1e-12);
        assert!((f.c - 3.0).abs() < 1e-12);
        assert!(f.sse < 1e-20);
    }

    #[test]
    fn power_rejects_zero_time() {
        let s = series(&[(0.0, 3.0), (1.0, 6.0), (2.0, 11.0)]);
        assert!(matches!(
            fit_regression(&s, Family::Power),
            Err(PredictionError::Domain(_))
        ));
        let chosen = select_model(&s).unwrap();
        assert_eq!(chosen.family, Family::Quadratic);
    }

    #[test]
    fn too_few_points() {
        let s = series(&[(0.0, 3.0), (1.0, 6.0)]);
        assert!(matches!(
            fit_regression(&s, Family::Quadratic),
            Err(PredictionError::TooFewPoints {
                needed: 3,
                got: 2,
                ..
            })
        ));
        assert!(select_model(&s).is_err());
    }

    #[test]
    fn series_rejects_bad_points() {
        assert!(ObservationSeries::new(vec![(1.0, 3.0), (1.0, 4.0)]).is_err());
        assert!(ObservationSeries::new(vec![(1.0, 300.0)]).is_err());
        assert!(ObservationSeries::new(vec![(-1.0, 3.0)]).is_err());
    }

    #[test]
    fn selection_prefers_generating_family() {
        let lin: Vec<_> = (0..6).map(|i| (i as f64, 5.0 * i as f64 + 20.0)).collect();
        assert_eq!(select_model(&series(&lin)).unwrap().family, Family::Linear);
        let quad: Vec<_> = (0..6)
            .map(|i| {
                let t = i as f64;
                (t, 2.0 * t * t + t + 1.0)
            })
            .collect();
        assert_eq!(
            select_model(&series(&quad)).unwrap().family,
            Family::Quadratic
        );
    }

    #[test]
    fn predictions() {
        let lin = RegressionFit {
            family: Family::Linear,
            a: 10.0,
            b: 2.0,
            c: 0.0,
            sse: 0.0,
            n_points: 3,
        };
        assert_eq!(predict_utility(&lin, 5.0).utility, 20.0);
        let pow = RegressionFit {
            family: Family::Power,
            a: 3.0,
            b: 2.0,
            ..lin
        };
        assert_eq!(predict_utility(&pow, 4.0).utility, 48.0);
        let quad = RegressionFit {
            family: Family::Quadratic,
            a: 1.0,
            b: 2.0,
            c: 3.0,
            ..lin
        };
        assert_eq!(predict_utility(&quad, 2.0).utility, 11.0);
        let steep = RegressionFit { b: 50.0, ..lin };
        let p = predict_utility(&steep, 5.0);
        assert_eq!((p.utility, p.raw), (100.0, 260.0));
    }

    #[test]
    fn crossing_examples() {
        let f = RegressionFit {
            family: Family::Linear,
            a: 0.0,
            b: 10.0,
            c: 0.0,
            sse: 0.0,
            n_points: 2,
        };
        assert!((estimate_crossing(&f, 80.0, 10.0).time().unwrap() - 8.0).abs() < 1e-12);
        let slow = RegressionFit { b: 2.0, ..f };
        assert_eq!(
            estimate_crossing(&slow, 80.0, 10.0),
            Crossing::NoneBeforeDeadline
        );
        let high = RegressionFit {
            a: 90.0,
            b: -1.0,
            ..f
        };
        assert_eq!(estimate_crossing(&high, 80.0, 10.0), Crossing::At(0.0));
    }

    #[test]
    fn quadratic_crossing_skips_past_roots() {
        // u = (t - 5)² + 10 dips below 35 between t = 0 and t = 10
        let f = RegressionFit {
            family: Family::Quadratic,
            a: 1.0,
            b: -10.0,
            c: 35.0,
            sse: 0.0,
            n_points: 3,
        };
        assert_eq!(estimate_crossing(&f, 30.0, 12.0), Crossing::At(0.0));
        let later = estimate_crossing_from(&f, 30.0, 3.0, 12.0).time().unwrap();
        assert!((later - (5.0 + 20f64.sqrt())).abs() < 1e-9);
    }

    #[test]
    fn grid_bisection_matches_linear_root() {
        let f = RegressionFit {
            family: Family::Linear,
            a: 0.0,
            b: 10.0,
            c: 0.0,
            sse: 0.0,
            n_points: 2,
        };
        let t = first_crossing(|t| f.eval(t), 80.0, 0.0, 10.0)
            .time()
            .unwrap();
        assert!((t - 8.0).abs() <= CROSSING_TOLERANCE);
        assert_eq!(
            first_crossing(|_| 1.0, 80.0, 0.0, 10.0),
            Crossing::NoneBeforeDeadline
        );
    }
}
