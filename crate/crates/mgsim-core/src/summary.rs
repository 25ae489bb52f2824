//! Post-run metrics: load sharing, bus regulation, and storage activity,
//! computed from the recorded time series.
//!
//! Metrics are grouped by *interval* — the spans between load-profile
//! change times — because each interval settles toward its own operating
//! point. Steady-state figures are means over the trailing 20% of an
//! interval.

use crate::scenario::Scenario;
use crate::timeseries::TimeSeries;
use serde::Serialize;

/// Fraction of the bus setpoint used as the regulation band (+-0.5%).
pub const BUS_BAND_FRACTION: f64 = 0.005;

/// Fraction of each interval, at its end, treated as steady state.
pub const STEADY_TAIL_FRACTION: f64 = 0.2;

/// One generator's steady-state contribution within an interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GeneratorShare {
    pub id: String,
    /// Mean current drawn into the network (A).
    pub current_a: f64,
    /// This generator's fraction of the total drawn current.
    pub share: f64,
    /// The fraction its droop weight prescribes.
    pub target_share: f64,
}

/// Steady-state figures for one inter-event interval.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalSummary {
    pub t_start: f64,
    pub t_end: f64,
    pub generators: Vec<GeneratorShare>,
    /// Time from interval start until the main bus last re-entered the
    /// regulation band and stayed there (s); `None` if it never settled.
    pub bus_settling_s: Option<f64>,
    /// Mean main-bus voltage over the steady tail (V).
    pub bus_mean_v: f64,
}

/// Main-bus regulation over the whole run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BusSummary {
    pub node: String,
    pub setpoint_v: f64,
    /// Half-width of the regulation band (V).
    pub band_v: f64,
    /// Largest absolute deviation from the setpoint anywhere in the run (V).
    pub max_deviation_v: f64,
    /// Mean voltage over the final interval's steady tail (V).
    pub final_mean_v: f64,
}

/// One storage unit's activity over the run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StorageSummary {
    pub id: String,
    /// Largest injection into the bus (W, >= 0).
    pub peak_discharge_w: f64,
    /// Largest absorption from the bus (W, <= 0).
    pub peak_charge_w: f64,
    /// Net delivered energy over the run (J, trapezoidal).
    pub net_energy_j: f64,
    pub final_soc: f64,
}

/// Everything worth reporting about one completed run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunSummary {
    pub duration_s: f64,
    pub samples: usize,
    pub bus: BusSummary,
    pub intervals: Vec<IntervalSummary>,
    pub storage: Vec<StorageSummary>,
}

/// Computes the summary of a completed run. `series` must be the output of
/// simulating `scenario`; columns that are absent are reported as zero.
pub fn summarize(scenario: &Scenario, series: &TimeSeries) -> RunSummary {
    let t_end = series.time().last().copied().unwrap_or(0.0);
    let setpoint = scenario.secondary.v_setpoint;
    let band = BUS_BAND_FRACTION * setpoint;
    let main_id = scenario
        .topology
        .node(scenario.secondary.main_bus)
        .id
        .clone();
    let v_main = series.column(&format!("v_{main_id}")).unwrap_or(&[]);

    // Interval boundaries: profile change times plus the run edges.
    let mut bounds = scenario.event_times();
    bounds.retain(|&t| t > 0.0 && t < t_end);
    bounds.insert(0, 0.0);
    bounds.push(t_end);

    let total_weight: f64 = scenario.pgms.iter().map(|p| p.weight).sum();

    let mut intervals = Vec::new();
    for pair in bounds.windows(2) {
        let (t0, t1) = (pair[0], pair[1]);
        let tail_from = t1 - STEADY_TAIL_FRACTION * (t1 - t0);
        // Half-open windows would drop the run's final sample; nudge the
        // upper edge past it for the last interval.
        let upper = if t1 >= t_end { t_end + 1.0 } else { t1 };
        let tail = non_empty_tail(series, tail_from, upper);

        let mut generators = Vec::with_capacity(scenario.pgms.len());
        let mut currents = Vec::with_capacity(scenario.pgms.len());
        for settings in &scenario.pgms {
            let id = &scenario.topology.node(settings.node).id;
            let mean = series
                .mean(&format!("ig_{id}"), tail.clone())
                .unwrap_or(0.0);
            currents.push((id.clone(), mean, settings.weight));
        }
        let total: f64 = currents.iter().map(|(_, i, _)| i).sum();
        for (id, current_a, weight) in currents {
            let share = if total.abs() > 1e-9 {
                current_a / total
            } else {
                0.0
            };
            generators.push(GeneratorShare {
                id,
                current_a,
                share,
                target_share: weight / total_weight,
            });
        }

        let window = series.window(t0, upper);
        let mut last_violation = None;
        for r in window.clone() {
            if (v_main.get(r).copied().unwrap_or(setpoint) - setpoint).abs() > band {
                last_violation = Some(r);
            }
        }
        let bus_settling_s = match last_violation {
            None => Some(0.0),
            Some(r) if r + 1 < window.end => Some(series.time()[r + 1] - t0),
            Some(_) => None,
        };

        let bus_mean_v = series
            .mean(&format!("v_{main_id}"), tail.clone())
            .unwrap_or(0.0);

        intervals.push(IntervalSummary {
            t_start: t0,
            t_end: t1,
            generators,
            bus_settling_s,
            bus_mean_v,
        });
    }

    let max_deviation_v = v_main
        .iter()
        .map(|&v| (v - setpoint).abs())
        .fold(0.0, f64::max);
    let final_mean_v = intervals.last().map(|i| i.bus_mean_v).unwrap_or(0.0);

    let mut storage = Vec::new();
    for load in &scenario.loads {
        if load.storage.is_none() {
            continue;
        }
        let id = scenario.topology.node(load.node).id.clone();
        let p = series.column(&format!("p_ess_{id}")).unwrap_or(&[]);
        let soc = series.column(&format!("soc_{id}")).unwrap_or(&[]);
        let time = series.time();
        let mut peak_discharge_w = 0.0f64;
        let mut peak_charge_w = 0.0f64;
        let mut net_energy_j = 0.0;
        for (r, &pw) in p.iter().enumerate() {
            peak_discharge_w = peak_discharge_w.max(pw);
            peak_charge_w = peak_charge_w.min(pw);
            if r + 1 < p.len() {
                net_energy_j += 0.5 * (pw + p[r + 1]) * (time[r + 1] - time[r]);
            }
        }
        storage.push(StorageSummary {
            id,
            peak_discharge_w,
            peak_charge_w,
            net_energy_j,
            final_soc: soc.last().copied().unwrap_or(0.0),
        });
    }

    RunSummary {
        duration_s: t_end,
        samples: series.len(),
        bus: BusSummary {
            node: main_id,
            setpoint_v: setpoint,
            band_v: band,
            max_deviation_v,
            final_mean_v,
        },
        intervals,
        storage,
    }
}

/// Sample range for `[t_from, t_to)`, widened to the nearest earlier sample
/// when the window holds none (degenerate intervals).
fn non_empty_tail(series: &TimeSeries, t_from: f64, t_to: f64) -> std::ops::Range<usize> {
    let range = series.window(t_from, t_to);
    if !range.is_empty() || series.is_empty() {
        return range;
    }
    let end = range.end.max(1).min(series.len());
    end - 1..end
}

impl RunSummary {
    /// Deterministic human-readable rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!(
            "run: {} s, {} samples\n",
            self.duration_s, self.samples
        ));
        out.push_str(&format!(
            "main bus {}: setpoint {} V, band +-{} V, max deviation {:.2} V, final mean {:.2} V\n",
            self.bus.node,
            self.bus.setpoint_v,
            self.bus.band_v,
            self.bus.max_deviation_v,
            self.bus.final_mean_v
        ));
        for interval in &self.intervals {
            out.push_str(&format!(
                "interval [{}, {}) s: bus mean {:.2} V, settling {}\n",
                interval.t_start,
                interval.t_end,
                interval.bus_mean_v,
                match interval.bus_settling_s {
                    Some(s) => format!("{s:.3} s"),
                    None => "never".to_string(),
                }
            ));
            for g in &interval.generators {
                out.push_str(&format!(
                    "  {}: {:.2} A, share {:.2}% (target {:.2}%)\n",
                    g.id,
                    g.current_a,
                    100.0 * g.share,
                    100.0 * g.target_share
                ));
            }
        }
        for s in &self.storage {
            out.push_str(&format!(
                "storage {}: peak discharge {:.1} kW, peak charge {:.1} kW, net energy {:.1} kJ, final SOC {:.2}%\n",
                s.id,
                s.peak_discharge_w / 1e3,
                s.peak_charge_w / 1e3,
                s.net_energy_j / 1e3,
                100.0 * s.final_soc
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario::load_scenario_text;

    /// Two generators (weights 3:1), one storage load, one plain load.
    const SCENARIO: &str = "\
node g1 kind=pgm
node g2 kind=pgm
node c1 kind=pcm
node m1 kind=pmm
edge e1 from=g1 to=c1 R=2m L=20u
edge e2 from=g2 to=c1 R=2m L=20u
edge e3 from=c1 to=m1 R=2m L=20u
duration 10
droop g1 weight=3
droop g2 weight=1
secondary vstar=12k main=c1
profile m1 step t=0 P=1M
profile m1 step t=5 P=2M
";

    /// Hand-built series with analytically known metrics.
    fn series() -> TimeSeries {
        let mut ts = TimeSeries::new(
            [
                "t_s",
                "v_g1",
                "v_g2",
                "v_c1",
                "v_m1",
                "i_e1",
                "i_e2",
                "i_e3",
                "ig_g1",
                "ig_g2",
                "p_ess_c1",
                "soc_c1",
                "lambda_g1",
                "lambda_g2",
                "dv_sec",
            ]
            .iter()
            .map(|s| s.to_string())
            .collect(),
        );
        // 11 samples, 1 s apart. Bus dips to 11,900 V at t = 5 (outside the
        // +-60 V band), back inside from t = 6. Generators settle at 75/25 A
        // then 150/50 A. Storage: triangular 100 kW pulse over t in [5, 7].
        for i in 0..=10 {
            let t = i as f64;
            let (ig1, ig2) = if t < 5.0 { (75.0, 25.0) } else { (150.0, 50.0) };
            let v_bus = if i == 5 { 11_900.0 } else { 12_000.0 };
            let p_ess = match i {
                5 => 0.0,
                6 => 100_000.0,
                7 => 0.0,
                _ => 0.0,
            };
            ts.push_row(&[
                t,
                12_050.0,
                12_020.0,
                v_bus,
                11_990.0,
                ig1,
                ig2,
                100.0,
                ig1,
                ig2,
                p_ess,
                0.5 - 0.001 * t,
                0.9,
                0.9,
                50.0,
            ]);
        }
        ts
    }

    #[test]
    fn intervals_follow_profile_events() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let summary = summarize(&scenario, &series());
        assert_eq!(summary.intervals.len(), 2);
        assert_eq!(summary.intervals[0].t_start, 0.0);
        assert_eq!(summary.intervals[0].t_end, 5.0);
        assert_eq!(summary.intervals[1].t_end, 10.0);
        assert_eq!(summary.duration_s, 10.0);
        assert_eq!(summary.samples, 11);
    }

    #[test]
    fn shares_match_the_constructed_currents() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let summary = summarize(&scenario, &series());
        let g = &summary.intervals[0].generators;
        assert_eq!(g[0].id, "g1");
        assert_eq!(g[0].current_a, 75.0);
        assert!((g[0].share - 0.75).abs() < 1e-12);
        assert!((g[0].target_share - 0.75).abs() < 1e-12);
        let g = &summary.intervals[1].generators;
        assert_eq!(g[1].current_a, 50.0);
        assert!((g[1].share - 0.25).abs() < 1e-12);
    }

    #[test]
    fn bus_metrics_capture_dip_and_recovery() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let summary = summarize(&scenario, &series());
        assert_eq!(summary.bus.setpoint_v, 12_000.0);
        assert_eq!(summary.bus.band_v, 60.0);
        assert_eq!(summary.bus.max_deviation_v, 100.0);
        // First interval never leaves the band.
        assert_eq!(summary.intervals[0].bus_settling_s, Some(0.0));
        // Second interval: violation at t = 5, back in band at t = 6.
        assert_eq!(summary.intervals[1].bus_settling_s, Some(1.0));
    }

    #[test]
    fn storage_peaks_and_energy_integrate_the_pulse() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let summary = summarize(&scenario, &series());
        assert_eq!(summary.storage.len(), 1);
        let s = &summary.storage[0];
        assert_eq!(s.id, "c1");
        assert_eq!(s.peak_discharge_w, 100_000.0);
        assert_eq!(s.peak_charge_w, 0.0);
        // Triangle: 100 kW peak over 2 s -> 100 kJ.
        assert!((s.net_energy_j - 100_000.0).abs() < 1e-9);
        assert!((s.final_soc - 0.49).abs() < 1e-12);
    }

    #[test]
    fn text_rendering_is_deterministic_and_complete() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let summary = summarize(&scenario, &series());
        let a = summary.to_text();
        let b = summary.to_text();
        assert_eq!(a, b);
        assert!(a.contains("main bus c1"));
        assert!(a.contains("interval [0, 5) s"));
        assert!(a.contains("storage c1"));
        assert!(a.contains("target 75.00%"));
    }

    #[test]
    fn summary_serializes_to_json() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let summary = summarize(&scenario, &series());
        let json = serde_json::to_string(&summary).unwrap();
        assert!(json.contains("\"bus\""));
        assert!(json.contains("\"intervals\""));
        let value: serde_json::Value = serde_json::from_str(&json).unwrap();
        assert_eq!(value["bus"]["setpoint_v"], 12_000.0);
    }

    #[test]
    fn settling_never_is_reported_as_none() {
        let scenario = load_scenario_text(SCENARIO, None).unwrap();
        let mut ts = series();
        // Push the final sample out of band: the last interval never settles.
        let mut row = vec![0.0; ts.column_names().len()];
        row[0] = 10.5;
        row[3] = 11_000.0;
        for (i, name) in ts.column_names().to_vec().iter().enumerate() {
            if name == "t_s" {
                row[i] = 10.5;
            } else if name == "v_c1" {
                row[i] = 11_000.0;
            } else {
                row[i] = ts.column(name).unwrap()[10];
            }
        }
        ts.push_row(&row);
        let summary = summarize(&scenario, &ts);
        assert_eq!(summary.intervals.last().unwrap().bus_settling_s, None);
    }
}
