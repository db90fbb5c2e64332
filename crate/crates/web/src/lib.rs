//! Browser bindings for the negotiation demo page.
//!
//! Every export takes plain numbers or strings and returns JSON text, so the
//! page needs no generated glue beyond `wasm-bindgen`'s own.

use serde::Serialize;
use wasm_bindgen::prelude::*;

use negotiate_core::harness::{bundled, parse_scenario, run_scenario_session, SessionRun};
use negotiate_core::prediction::{
    estimate_crossing_from, fit_regression, select_model, Crossing, Family, ObservationSeries,
    RegressionFit,
};
use negotiate_core::tactics::{resource_alpha, time_alpha, ConcessionCurve};

#[derive(Serialize)]
struct CurvePoint {
    round: u32,
    time: f64,
    resource: f64,
}

/// Target utility per round for the time- and resource-dependent tactics.
pub fn curves(k: f64, beta: f64, deadline: u32, reservation: f64) -> Result<String, String> {
    if deadline == 0 {
        return Err("deadline must be positive".into());
    }
    if !(0.0..=100.0).contains(&reservation) {
        return Err(format!("reservation {reservation} outside [0, 100]"));
    }
    let curve = ConcessionCurve::new(reservation);
    let points = (0..=deadline)
        .map(|round| {
            let t = time_alpha(round as f64, deadline as f64, k, beta)?;
            let r = resource_alpha((deadline - round) as f64, k)?;
            Ok(CurvePoint {
                round,
                time: curve.target(t),
                resource: curve.target(r),
            })
        })
        .collect::<Result<Vec<_>, negotiate_core::tactics::TacticError>>()
        .map_err(|e| e.to_string())?;
    serde_json::to_string(&points).map_err(|e| e.to_string())
}

#[derive(Serialize)]
struct FitReport {
    fits: Vec<FitLine>,
    selected: Option<RegressionFit>,
    crossing: Option<f64>,
}

#[derive(Serialize)]
struct FitLine {
    family: Family,
    fit: Option<RegressionFit>,
    error: Option<String>,
}

/// Fits every regression family to `(t, u)` pairs given as `"t u"` lines and
/// forecasts when the selected model reaches `reservation`.
pub fn fit(points: &str, reservation: f64, deadline: f64) -> Result<String, String> {
    let mut parsed = Vec::new();
    for (i, line) in points.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Vec<f64> = line
            .split(|c: char| c == ',' || c.is_whitespace())
            .filter(|s| !s.is_empty())
            .map(str::parse)
            .collect::<Result<_, _>>()
            .map_err(|e| format!("line {}: {e}", i + 1))?;
        match nums[..] {
            [t, u] => parsed.push((t, u)),
            _ => return Err(format!("line {}: expected two numbers", i + 1)),
        }
    }
    let series = ObservationSeries::with_tau(parsed, deadline).map_err(|e| e.to_string())?;
    let fits = Family::ALL
        .iter()
        .map(|&family| match fit_regression(&series, family) {
            Ok(f) => FitLine {
                family,
                fit: Some(f),
                error: None,
            },
            Err(e) => FitLine {
                family,
                fit: None,
                error: Some(e.to_string()),
            },
        })
        .collect();
    let selected = select_model(&series).ok();
    let start = series.points().last().map_or(0.0, |p| p.0);
    let crossing =
        selected.and_then(
            |f| match estimate_crossing_from(&f, reservation, start, deadline) {
                Crossing::At(t) => Some(t),
                Crossing::NoneBeforeDeadline => None,
            },
        );
    serde_json::to_string(&FitReport {
        fits,
        selected,
        crossing,
    })
    .map_err(|e| e.to_string())
}

/// Runs one session of a scenario given as TOML text.
pub fn simulate(scenario: &str, seed: u64) -> Result<String, String> {
    let scenario = parse_scenario(scenario, "scenario").map_err(|e| e.to_string())?;
    let run = run_scenario_session(&scenario, seed).map_err(|e| e.to_string())?;
    let issues: Vec<&str> = scenario.issues.iter().map(|i| i.name.as_str()).collect();
    let value = match &run {
        SessionRun::Bilateral(r) => serde_json::json!({ "issues": issues, "report": r }),
        SessionRun::OneToMany(r) => serde_json::json!({ "issues": issues, "one_to_many": r }),
    };
    Ok(value.to_string())
}

#[wasm_bindgen(js_name = concessionCurves)]
pub fn concession_curves_js(
    k: f64,
    beta: f64,
    deadline: u32,
    reservation: f64,
) -> Result<String, JsValue> {
    curves(k, beta, deadline, reservation).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = fitSeries)]
pub fn fit_series_js(points: &str, reservation: f64, deadline: f64) -> Result<String, JsValue> {
    fit(points, reservation, deadline).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = simulateSession)]
pub fn simulate_session_js(scenario: &str, seed: u64) -> Result<String, JsValue> {
    simulate(scenario, seed).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = aircraftScenario)]
pub fn aircraft_scenario() -> String {
    bundled::AIRCRAFT.to_owned()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_curve_ends_at_reservation() {
        let v: serde_json::Value =
            serde_json::from_str(&curves(0.0, 1.0, 10, 40.0).unwrap()).unwrap();
        assert_eq!(v[0]["time"], 100.0);
        assert_eq!(v[10]["time"], 40.0);
        assert_eq!(v[10]["resource"], 40.0);
        assert!(curves(0.0, 1.0, 0, 40.0).is_err());
    }

    #[test]
    fn fit_reports_crossing() {
        let v: serde_json::Value =
            serde_json::from_str(&fit("1 10\n2 20\n3 30", 80.0, 10.0).unwrap()).unwrap();
        assert_eq!(v["selected"]["family"], "linear");
        assert!((v["crossing"].as_f64().unwrap() - 8.0).abs() < 1e-6);
        assert!(fit("1 x", 80.0, 10.0).is_err());
    }

    #[test]
    fn bundled_aircraft_simulates() {
        let v: serde_json::Value =
            serde_json::from_str(&simulate(bundled::AIRCRAFT, 7).unwrap()).unwrap();
        assert!(v["report"]["trace"]["rows"]
            .as_array()
            .is_some_and(|r| !r.is_empty()));
    }
}
