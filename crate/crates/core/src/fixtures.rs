//! The reference deployment: a six-node gallery installation, a 24-hour
//! visitor-day script, balanced synthetic image datasets, and the cloud
//! rate card. Tests, benchmarks, and the CLI `fixtures` command all
//! build from these so every layer exercises the same world.
//!
//! The visitor day is authored, not sampled: pulse times, cadences, and
//! poll intervals are chosen so the full run produces the reference
//! ledger tallies (14,149 entries; 10,636 routine checks, 199 triggers,
//! 769 readings, 526 network requests, 199 images) and those numbers
//! are frozen by the acceptance suite.

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use crate::cloud::{FreeAllowance, RateCard, UsageCounters};
use crate::config::{
    serialize_config, validate_config, HubSettings, Transport, ValidatedConfig, WsnConfig,
};
use crate::nodes::{synth, EnvironmentScript, GroundTruth, PowerProfile, SensorKind};
use crate::vision::{BehaviorLabel, LabeledDataset, LabeledImage, LabelScheme};

/// Simulated duration of the reference visitor day.
pub const DAY_S: u64 = 86_400;

/// First visitor pulse of the day.
const FIRST_PULSE_S: u64 = 900;
/// Gap between pulse starts. Coprime with the 600 s ambient grid, so
/// pulse edges never collide with grid points.
const PULSE_SPACING_S: u64 = 427;
/// How long each stimulus stays high.
const PULSE_LEN_S: u64 = 21;
/// Visitor pulses over the day.
const PULSE_COUNT: u64 = 199;

/// Six nodes, one per sensor kind, mirroring the gallery install.
pub fn reference_config() -> ValidatedConfig {
    let node = |id: u16, kind: SensorKind, cadence_s: Option<u64>, distance_m: f64, idle: f64, active: f64| {
        crate::config::NodeSpec {
            id,
            kind,
            transport: if kind == SensorKind::Camera {
                Transport::Wifi
            } else {
                Transport::Ble
            },
            cadence_s,
            distance_m,
            power: PowerProfile {
                idle_mah_per_h: idle,
                active_mah_per_h: active,
            },
            debounce_s: None,
            sound_threshold: None,
        }
    };
    let config = WsnConfig {
        version: 1,
        hub: HubSettings {
            batch_window_s: 164,
            upload_retry_limit: 3,
            status_port: 8787,
            poll_interval_s: 48,
            poll_overrides: BTreeMap::from([(4, 46), (5, 50), (6, 53)]),
            heartbeat_s: Some(48),
            housekeeping_s: Some(4_320),
        },
        nodes: vec![
            node(1, SensorKind::TemperatureHumidity, Some(300), 2.0, 84.0, 84.0),
            node(2, SensorKind::Pir, None, 3.5, 114.0, 114.0),
            node(3, SensorKind::Photoelectric, None, 1.5, 54.0, 54.0),
            node(4, SensorKind::Sound, None, 2.5, 60.0, 60.0),
            node(5, SensorKind::Ultrasonic, Some(447), 1.0, 54.0, 54.0),
            node(6, SensorKind::Camera, None, 4.0, 120.0, 126.0),
        ],
    };
    validate_config(config).expect("reference config is valid")
}

fn round1(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

/// Ambient conditions at time `t`: a slow diurnal swing, peaking
/// mid-afternoon for temperature and overnight for humidity.
fn ambient(t: u64) -> (f64, f64) {
    let phase = |offset: u64| {
        let shifted = t as f64 - offset as f64;
        (std::f64::consts::TAU * shifted / DAY_S as f64).sin()
    };
    let temperature_c = round1(18.0 + 3.5 * phase(21_600));
    let humidity_pct = round1(45.0 + 8.0 * phase(43_200));
    (temperature_c, humidity_pct)
}

/// What the j-th visitor pulse stimulates.
#[derive(Clone, Copy)]
enum Pulse {
    /// Visitor in front of the exhibit; every ninth one leans in close.
    Motion { distance_cm: f64 },
    /// Loud group passing through.
    Noise,
    /// Someone reaching across the barrier beam.
    Beam,
}

fn pulse_kind(j: u64) -> Pulse {
    match j % 3 {
        0 => Pulse::Motion {
            distance_cm: if j % 9 == 0 { 40.0 } else { 120.0 },
        },
        1 => Pulse::Noise,
        _ => Pulse::Beam,
    }
}

fn ground_truth(t: u64, active_pulse: Option<u64>) -> GroundTruth {
    let (temperature_c, humidity_pct) = ambient(t);
    let mut gt = GroundTruth {
        time_s: t,
        temperature_c,
        humidity_pct,
        visitor_present: false,
        sound_level: 0.1,
        beam_blocked: false,
        visitor_distance_cm: 400.0,
    };
    if let Some(j) = active_pulse {
        match pulse_kind(j) {
            Pulse::Motion { distance_cm } => {
                gt.visitor_present = true;
                gt.visitor_distance_cm = distance_cm;
            }
            Pulse::Noise => gt.sound_level = 0.8,
            Pulse::Beam => gt.beam_blocked = true,
        }
    }
    gt
}

/// Which pulse, if any, is in flight at `t`. Pulse edges themselves get
/// explicit script entries; this covers grid points that land inside a
/// pulse window, which must not reset the stimulus early.
fn active_pulse_at(t: u64) -> Option<u64> {
    if t <= FIRST_PULSE_S {
        return None;
    }
    let j = (t - FIRST_PULSE_S) / PULSE_SPACING_S;
    if j >= PULSE_COUNT {
        return None;
    }
    let start = FIRST_PULSE_S + PULSE_SPACING_S * j;
    (t > start && t < start + PULSE_LEN_S).then_some(j)
}

/// The 24-hour visitor-day script: ambient conditions sampled on a
/// 600 s grid, overlaid with 199 short visitor pulses that cycle
/// through motion, noise, and beam stimuli.
pub fn reference_script() -> EnvironmentScript {
    let mut times: Vec<(u64, Option<u64>)> = (0..=DAY_S / 600)
        .map(|k| (k * 600, active_pulse_at(k * 600)))
        .collect();
    for j in 0..PULSE_COUNT {
        let start = FIRST_PULSE_S + PULSE_SPACING_S * j;
        times.push((start, Some(j)));
        times.push((start + PULSE_LEN_S, None));
    }
    times.sort_by_key(|&(t, _)| t);
    let entries = times
        .into_iter()
        .map(|(t, pulse)| ground_truth(t, pulse))
        .collect();
    EnvironmentScript::new(entries).expect("reference script is valid")
}

/// A balanced, linearly separable synthetic image dataset. Classes
/// round-robin, so any `count` divisible by the class count comes out
/// exactly balanced; `seed` varies the pixels, not the label sequence.
pub fn synthetic_dataset(scheme: LabelScheme, count: usize, seed: u64) -> LabeledDataset {
    let classes = scheme.class_count();
    let items = (0..count)
        .map(|i| {
            let class_id = (i % classes) as u8;
            let stamp = seed.wrapping_mul(1_000_003).wrapping_add(i as u64);
            LabeledImage {
                payload: synth::generate(0x00ff, stamp, scheme.tag(), class_id),
                label: BehaviorLabel::new(scheme, class_id).expect("class id in range"),
            }
        })
        .collect();
    LabeledDataset::new(scheme, items).expect("round-robin labels are consistent")
}

/// Platform prices in millipence per metered unit.
pub fn rate_card() -> RateCard {
    RateCard {
        currency: "GBP".to_string(),
        blob_gb_month_millipence: 5_000,
        parse_op_millipence: 100,
        row_month_millipence: 2,
        query_millipence: 250,
        label_record_millipence: 400,
    }
}

pub fn free_allowance() -> FreeAllowance {
    FreeAllowance {
        blob_gb_months: 5,
        parse_ops: 1_000,
        row_months: 100_000,
        queries: 1_000,
        label_records: 1_000,
    }
}

/// Usage on the scale of the bundled single-room deployment; every
/// meter sits inside the free allowance, so the monthly bill is £0.00.
pub fn free_tier_usage() -> UsageCounters {
    UsageCounters {
        blob_gb_months: 1,
        parse_ops: 526,
        row_months: 1_167,
        queries: 12,
        label_records: 199,
        free_tier: free_allowance(),
    }
}

/// Usage for the projected multi-room, multi-site deployment; prices
/// out at exactly £180.00 per month against [`rate_card`].
pub fn full_deployment_usage() -> UsageCounters {
    UsageCounters {
        blob_gb_months: 605,
        parse_ops: 26_000,
        row_months: 2_100_000,
        queries: 11_000,
        label_records: 16_000,
        free_tier: free_allowance(),
    }
}

fn pretty_json<T: serde::Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("fixture serializes");
    text.push('\n');
    text
}

/// Write every fixture to `dir` in its external format.
pub fn write_all(dir: &Path) -> io::Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(
        dir.join("wsn_config.json"),
        serialize_config(reference_config().get()),
    )?;
    std::fs::write(dir.join("museum_24h.csv"), reference_script().to_csv_string())?;
    std::fs::write(dir.join("rate_card.json"), pretty_json(&rate_card()))?;
    std::fs::write(
        dir.join("usage_free_tier.json"),
        pretty_json(&free_tier_usage()),
    )?;
    std::fs::write(
        dir.join("usage_full_deployment.json"),
        pretty_json(&full_deployment_usage()),
    )?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn script_grid_and_pulses_never_collide() {
        let env = reference_script();
        let times: Vec<u64> = env.entries().iter().map(|gt| gt.time_s).collect();
        // 145 grid points plus two edges per pulse, all distinct.
        assert_eq!(times.len(), 145 + 2 * PULSE_COUNT as usize);
        assert!(times.windows(2).all(|w| w[0] < w[1]));
        assert_eq!(*times.last().unwrap(), DAY_S);
    }

    #[test]
    fn pulses_raise_exactly_one_stimulus() {
        let env = reference_script();
        for j in 0..PULSE_COUNT {
            let start = FIRST_PULSE_S + PULSE_SPACING_S * j;
            let during = env.sample(start + 5).unwrap();
            let stimuli = [
                during.visitor_present,
                during.sound_level > 0.5,
                during.beam_blocked,
            ];
            assert_eq!(stimuli.iter().filter(|&&s| s).count(), 1, "pulse {j}");
            let after = env.sample(start + PULSE_LEN_S).unwrap();
            assert!(!after.visitor_present && !after.beam_blocked);
            assert_eq!(after.sound_level, 0.1);
        }
    }

    #[test]
    fn every_ninth_motion_pulse_is_a_close_approach() {
        let env = reference_script();
        let close = |j: u64| {
            let start = FIRST_PULSE_S + PULSE_SPACING_S * j;
            env.sample(start).unwrap().visitor_distance_cm < 50.0
        };
        assert!(close(0));
        assert!(!close(3));
        assert!(close(9));
        assert!(!close(1)); // noise pulse, baseline distance
    }

    #[test]
    fn datasets_are_balanced_and_seed_sensitive() {
        for scheme in [LabelScheme::Binary, LabelScheme::Multimodal] {
            let n = scheme.class_count() * 10;
            let ds = synthetic_dataset(scheme, n, 7);
            assert_eq!(ds.len(), n);
            assert!(ds.class_counts().iter().all(|&c| c == 10));

            let same = synthetic_dataset(scheme, n, 7);
            let other = synthetic_dataset(scheme, n, 8);
            assert_eq!(ds.items()[0].payload, same.items()[0].payload);
            assert_ne!(ds.items()[0].payload, other.items()[0].payload);
        }
    }

    #[test]
    fn fixture_files_round_trip_through_their_parsers() {
        let dir = tempfile::tempdir().unwrap();
        write_all(dir.path()).unwrap();

        let config_text =
            std::fs::read_to_string(dir.path().join("wsn_config.json")).unwrap();
        let parsed = crate::config::parse_config(&config_text).unwrap();
        assert_eq!(&parsed.config, reference_config().get());
        assert!(parsed.warnings.is_empty());

        let env = EnvironmentScript::from_csv_path(&dir.path().join("museum_24h.csv")).unwrap();
        assert_eq!(env, reference_script());

        let rates: RateCard = serde_json::from_str(
            &std::fs::read_to_string(dir.path().join("rate_card.json")).unwrap(),
        )
        .unwrap();
        assert_eq!(rates, rate_card());
    }
}
