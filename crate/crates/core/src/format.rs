//! File formats: the JSON scenario file and the two CSV reports (the
//! coalition payoff table and the per-provider metrics).

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::game::{CoalitionEntry, CoalitionValueTable};
use crate::metrics::MetricsReport;
use crate::model::{validate_scenario, ApplicationSpec, Coalition, ProviderSpec, ResourceKind, Scenario};
use crate::utility::UtilityConfig;

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    resource_kinds: Vec<String>,
    providers: Vec<ProviderFile>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ProviderFile {
    id: usize,
    capacity: Vec<f64>,
    weight_native: f64,
    weight_foreign: f64,
    utility: UtilityConfig,
    apps: Vec<AppFile>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct AppFile {
    id: u64,
    request: Vec<f64>,
}

impl From<&Scenario> for ScenarioFile {
    fn from(s: &Scenario) -> Self {
        ScenarioFile {
            resource_kinds: s.resource_kinds.iter().map(|r| r.label.clone()).collect(),
            providers: s
                .providers
                .iter()
                .map(|p| ProviderFile {
                    id: p.id,
                    capacity: p.capacity.clone(),
                    weight_native: p.weight_native,
                    weight_foreign: p.weight_foreign,
                    utility: p.utility,
                    apps: p.native_apps.iter().map(|a| AppFile { id: a.id, request: a.request.clone() }).collect(),
                })
                .collect(),
            seed: s.seed,
        }
    }
}

impl From<ScenarioFile> for Scenario {
    fn from(f: ScenarioFile) -> Self {
        Scenario {
            resource_kinds: f.resource_kinds.into_iter().enumerate().map(|(index, label)| ResourceKind { index, label }).collect(),
            // owners follow from list position; a mismatched `id` is left for validation to report
            providers: f
                .providers
                .into_iter()
                .enumerate()
                .map(|(pos, p)| ProviderSpec {
                    id: p.id,
                    capacity: p.capacity,
                    native_apps: p.apps.into_iter().map(|a| ApplicationSpec { id: a.id, owner: pos, request: a.request }).collect(),
                    weight_native: p.weight_native,
                    weight_foreign: p.weight_foreign,
                    utility: p.utility,
                })
                .collect(),
            seed: f.seed,
        }
    }
}

pub fn scenario_to_json(s: &Scenario) -> Result<String> {
    Ok(serde_json::to_string_pretty(&ScenarioFile::from(s))?)
}

/// Parses a scenario document without validating it.
pub fn scenario_from_json(text: &str) -> Result<Scenario> {
    let file: ScenarioFile = serde_json::from_str(text)?;
    Ok(file.into())
}

/// Reads and validates a scenario file.
pub fn load_scenario(path: &Path) -> Result<Scenario> {
    let s = scenario_from_json(&std::fs::read_to_string(path)?)?;
    let violations = validate_scenario(&s);
    if violations.is_empty() {
        Ok(s)
    } else {
        let list: Vec<String> = violations.iter().map(ToString::to_string).collect();
        Err(Error::InvalidScenario(list.join("; ")))
    }
}

pub fn save_scenario(s: &Scenario, path: &Path) -> Result<()> {
    let mut text = scenario_to_json(s)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

/// Writes the table as `coalition,player_1..player_N,value`, one row per
/// coalition ordered by size.
pub fn write_table_csv<W: Write>(t: &CoalitionValueTable, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["coalition".to_string()];
    header.extend((1..=t.players()).map(|n| format!("player_{n}")));
    header.push("value".into());
    w.write_record(&header)?;
    for c in t.ordered() {
        let entry = t.get(c).expect("ordered keys come from the table");
        let mut row = vec![c.to_string()];
        row.extend(entry.payoffs.iter().map(|p| p.to_string()));
        row.push(entry.value.to_string());
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn parse_coalition(text: &str) -> Result<Coalition> {
    let inner = text
        .trim()
        .strip_prefix('{')
        .and_then(|t| t.strip_suffix('}'))
        .ok_or_else(|| Error::TableParse(format!("coalition {text:?} is not of the form {{1, 2}}")))?;
    let mut members = Vec::new();
    for part in inner.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let n: usize = part.parse().map_err(|_| Error::TableParse(format!("bad player {part:?} in {text:?}")))?;
        if n == 0 || n > Coalition::MAX_PLAYERS {
            return Err(Error::TableParse(format!("player {n} out of range in {text:?}")));
        }
        members.push(n - 1);
    }
    Ok(Coalition::from_members(members))
}

fn parse_number(text: &str) -> Result<f64> {
    text.trim().parse().map_err(|_| Error::TableParse(format!("bad number {text:?}")))
}

/// Reads a table written by [`write_table_csv`] (or typed by hand in the
/// same layout). The stated value column is kept as is.
pub fn read_table_csv<R: Read>(input: R) -> Result<CoalitionValueTable> {
    let mut r = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(input);
    let width = r.headers()?.len();
    if width < 3 {
        return Err(Error::TableParse("expected coalition, player columns and value".into()));
    }
    let players = width - 2;
    if players > Coalition::MAX_PLAYERS {
        return Err(Error::TableParse(format!("{players} players exceeds {}", Coalition::MAX_PLAYERS)));
    }
    let mut table = CoalitionValueTable::new(players);
    for record in r.records() {
        let record = record?;
        let coalition = parse_coalition(&record[0])?;
        if coalition.is_empty() || !coalition.is_subset_of(Coalition::grand(players)) {
            return Err(Error::TableParse(format!("coalition {} does not fit {players} players", &record[0])));
        }
        let payoffs = (1..=players).map(|j| parse_number(&record[j])).collect::<Result<Vec<_>>>()?;
        let value = parse_number(&record[players + 1])?;
        table.insert(coalition, CoalitionEntry { value, payoffs, allocation: None, converged: true });
    }
    Ok(table)
}

/// `provider,utility_alone,utility_gc,improvement_pct,satisfaction_pct,utilization_k0..`
/// with one-based provider numbers; an undefined improvement is left empty.
pub fn write_metrics_csv<W: Write>(m: &MetricsReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let resources = m.per_provider.first().map_or(0, |p| p.utilization_pct.len());
    let mut header: Vec<String> =
        ["provider", "utility_alone", "utility_gc", "improvement_pct", "satisfaction_pct"].map(String::from).to_vec();
    header.extend((0..resources).map(|k| format!("utilization_k{k}")));
    w.write_record(&header)?;
    for p in &m.per_provider {
        let mut row = vec![
            (p.provider + 1).to_string(),
            p.utility_alone.to_string(),
            p.utility_coalition.to_string(),
            p.improvement_pct.map_or_else(String::new, |v| v.to_string()),
            p.satisfaction_pct.to_string(),
        ];
        row.extend(p.utilization_pct.iter().map(|u| u.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{generate_scenario, GeneratorConfig, Preset};

    const SAMPLE: &str = r#"{
        "resource_kinds": ["storage"],
        "seed": 7,
        "providers": [
            {"id": 0, "capacity": [4.5], "weight_native": 1, "weight_foreign": 0.5,
             "utility": {"family": "linear"},
             "apps": [{"id": 10, "request": [2.25]}]}
        ]
    }"#;

    #[test]
    fn parses_a_hand_written_file() {
        let s = scenario_from_json(SAMPLE).unwrap();
        assert!(validate_scenario(&s).is_empty());
        assert_eq!(s.providers[0].utility, UtilityConfig::linear());
        assert_eq!(s.providers[0].native_apps[0].owner, 0);
        assert_eq!(s.seed, Some(7));
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = SAMPLE.replace("\"seed\": 7,", "\"seed\": 7, \"colour\": 1,");
        assert!(matches!(scenario_from_json(&bad), Err(Error::Json(_))));
        let bad = SAMPLE.replace("\"family\": \"linear\"", "\"family\": \"linear\", \"slope\": 2");
        assert!(scenario_from_json(&bad).is_err());
    }

    #[test]
    fn generated_scenarios_round_trip() {
        for p in Preset::ALL {
            let s = generate_scenario(&GeneratorConfig::preset(p), 3).unwrap();
            assert_eq!(scenario_from_json(&scenario_to_json(&s).unwrap()).unwrap(), s);
        }
    }

    proptest::proptest! {
        #[test]
        fn arbitrary_numbers_round_trip(
            caps in proptest::collection::vec(0.0f64..1e9, 2),
            reqs in proptest::collection::vec(1e-9f64..1e6, 4),
            mu in 1e-6f64..10.0,
            weight in 0.0f64..1e3,
            seed in proptest::option::of(proptest::num::u64::ANY),
        ) {
            let mut s = generate_scenario(&GeneratorConfig::new(1, 2), 0).unwrap();
            let kinds = &mut s.resource_kinds;
            kinds.truncate(2);
            let p = &mut s.providers[0];
            p.capacity = caps;
            p.weight_foreign = weight;
            p.utility = UtilityConfig::sigmoidal(mu);
            for (j, app) in p.native_apps.iter_mut().enumerate() {
                app.request = reqs[2 * j..2 * j + 2].to_vec();
            }
            s.seed = seed;
            proptest::prop_assert_eq!(scenario_from_json(&scenario_to_json(&s).unwrap()).unwrap(), s);
        }
    }

    #[test]
    fn table_round_trip() {
        let t = CoalitionValueTable::from_payoff_rows(2, [
            (vec![0], vec![1.5, 0.0]),
            (vec![1], vec![0.0, 2.0]),
            (vec![0, 1], vec![1.75, 2.125]),
        ])
        .unwrap();
        let mut buf = Vec::new();
        write_table_csv(&t, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("coalition,player_1,player_2,value\n{1},1.5,0,1.5\n"), "{text}");
        assert!(text.contains("\"{1, 2}\",1.75,2.125,3.875"), "{text}");
        assert_eq!(read_table_csv(buf.as_slice()).unwrap(), t);
    }

    #[test]
    fn table_parse_errors() {
        assert!(read_table_csv("coalition,player_1,value\n1,2,3\n".as_bytes()).is_err());
        assert!(read_table_csv("coalition,player_1,value\n{2},2,3\n".as_bytes()).is_err());
        assert!(read_table_csv("coalition,player_1,value\n{1},x,3\n".as_bytes()).is_err());
    }
}
