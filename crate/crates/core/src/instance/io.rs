//! The `mms-instance/1` text format.
//!
//! The format is valid TOML written with a fixed field order and four
//! decimals on every time value, so files diff cleanly and round-trip exactly.
//!
//! ```text
//! version = "mms-instance/1"
//! cycle_time = 7.0000
//!
//! [[stations]]
//! id = 0
//! length = 20.0000
//!
//! [[vehicles]]
//! id = 0
//! is_ev = true
//! risk_class = "low"
//! failure_prob = 0.0100
//! processing_times = [15.0000, 4.0000]
//! ```

use super::{validate, Instance, RiskClass, Station, Vehicle};
use crate::time::Time;
use crate::{MmsError, Result};
use std::fmt::Write as _;
use std::path::Path;
use toml::{Table, Value};

pub const FORMAT_VERSION: &str = "mms-instance/1";

const TOP_FIELDS: [&str; 4] = ["version", "cycle_time", "stations", "vehicles"];
const STATION_FIELDS: [&str; 2] = ["id", "length"];
const VEHICLE_FIELDS: [&str; 5] = ["id", "is_ev", "risk_class", "failure_prob", "processing_times"];

pub fn to_text(instance: &Instance) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "version = \"{FORMAT_VERSION}\"");
    let _ = writeln!(out, "cycle_time = {}", instance.cycle_time);
    for s in &instance.stations {
        let _ = writeln!(out, "\n[[stations]]\nid = {}\nlength = {}", s.id, s.length);
    }
    for v in &instance.vehicles {
        let times: Vec<String> = v.processing_times.iter().map(Time::to_string).collect();
        let _ = writeln!(
            out,
            "\n[[vehicles]]\nid = {}\nis_ev = {}\nrisk_class = \"{}\"\nfailure_prob = {:.4}\nprocessing_times = [{}]",
            v.id,
            v.is_ev,
            v.risk_class,
            v.failure_prob,
            times.join(", ")
        );
    }
    out
}

pub fn save(instance: &Instance, path: impl AsRef<Path>) -> Result<()> {
    let violations = validate(instance);
    if !violations.is_empty() {
        return Err(MmsError::InvalidInstance(violations));
    }
    std::fs::write(path, to_text(instance))?;
    Ok(())
}

/// Loads and validates an instance; unknown fields are logged and skipped.
pub fn load(path: impl AsRef<Path>) -> Result<Instance> {
    let (instance, warnings) = load_with_warnings(path)?;
    for w in warnings {
        log::warn!("{w}");
    }
    Ok(instance)
}

pub fn load_with_warnings(path: impl AsRef<Path>) -> Result<(Instance, Vec<String>)> {
    let text = std::fs::read_to_string(path)?;
    from_text(&text)
}

/// Parses and validates; returns the instance and one warning per ignored field.
pub fn from_text(text: &str) -> Result<(Instance, Vec<String>)> {
    let table: Table = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|span| text[..span.start].matches('\n').count() + 1);
        MmsError::parse(line, e.message().to_string())
    })?;
    let mut warnings = Vec::new();
    warn_unknown(&table, &TOP_FIELDS, "", &mut warnings);

    let version = string_field(&table, "version", "")?;
    if version != FORMAT_VERSION {
        return Err(MmsError::parse(
            None,
            format!("unsupported version `{version}`, expected `{FORMAT_VERSION}`"),
        ));
    }
    let cycle_time = time_field(&table, "cycle_time", "")?;

    let mut stations = Vec::new();
    for (i, entry) in array_of_tables(&table, "stations")?.iter().enumerate() {
        let ctx = format!("stations[{i}].");
        warn_unknown(entry, &STATION_FIELDS, &ctx, &mut warnings);
        stations.push(Station {
            id: index_field(entry, "id", &ctx)?,
            length: time_field(entry, "length", &ctx)?,
        });
    }

    let mut vehicles = Vec::new();
    for (i, entry) in array_of_tables(&table, "vehicles")?.iter().enumerate() {
        let ctx = format!("vehicles[{i}].");
        warn_unknown(entry, &VEHICLE_FIELDS, &ctx, &mut warnings);
        let risk = string_field(entry, "risk_class", &ctx)?;
        let risk_class: RiskClass = risk
            .parse()
            .map_err(|e: String| MmsError::parse(None, format!("{ctx}risk_class: {e}")))?;
        let times = match required(entry, "processing_times", &ctx)? {
            Value::Array(items) => items
                .iter()
                .enumerate()
                .map(|(k, item)| as_time(item, &format!("{ctx}processing_times[{k}]")))
                .collect::<Result<Vec<Time>>>()?,
            _ => return Err(type_error(&ctx, "processing_times", "an array")),
        };
        vehicles.push(Vehicle {
            id: index_field(entry, "id", &ctx)?,
            is_ev: match required(entry, "is_ev", &ctx)? {
                Value::Boolean(b) => *b,
                _ => return Err(type_error(&ctx, "is_ev", "a boolean")),
            },
            risk_class,
            failure_prob: match required(entry, "failure_prob", &ctx)? {
                Value::Float(f) => *f,
                Value::Integer(i) => *i as f64,
                _ => return Err(type_error(&ctx, "failure_prob", "a number")),
            },
            processing_times: times,
        });
    }

    let instance = Instance {
        cycle_time,
        stations,
        vehicles,
    };
    let violations = validate(&instance);
    if !violations.is_empty() {
        return Err(MmsError::InvalidInstance(violations));
    }
    Ok((instance, warnings))
}

fn warn_unknown(table: &Table, known: &[&str], ctx: &str, warnings: &mut Vec<String>) {
    for key in table.keys() {
        if !known.contains(&key.as_str()) {
            warnings.push(format!("ignoring unknown field `{ctx}{key}`"));
        }
    }
}

fn required<'a>(table: &'a Table, key: &str, ctx: &str) -> Result<&'a Value> {
    table
        .get(key)
        .ok_or_else(|| MmsError::parse(None, format!("missing required field `{ctx}{key}`")))
}

fn type_error(ctx: &str, key: &str, expected: &str) -> MmsError {
    MmsError::parse(None, format!("field `{ctx}{key}` must be {expected}"))
}

fn string_field(table: &Table, key: &str, ctx: &str) -> Result<String> {
    match required(table, key, ctx)? {
        Value::String(s) => Ok(s.clone()),
        _ => Err(type_error(ctx, key, "a string")),
    }
}

fn index_field(table: &Table, key: &str, ctx: &str) -> Result<usize> {
    match required(table, key, ctx)? {
        Value::Integer(i) if *i >= 0 => Ok(*i as usize),
        _ => Err(type_error(ctx, key, "a non-negative integer")),
    }
}

fn time_field(table: &Table, key: &str, ctx: &str) -> Result<Time> {
    as_time(required(table, key, ctx)?, &format!("{ctx}{key}"))
}

fn as_time(value: &Value, name: &str) -> Result<Time> {
    match value {
        Value::Float(f) if f.is_finite() => Ok(Time::from_f64(*f)),
        Value::Integer(i) => Ok(Time::units(*i)),
        _ => Err(MmsError::parse(None, format!("field `{name}` must be a number"))),
    }
}

fn array_of_tables<'a>(table: &'a Table, key: &str) -> Result<Vec<&'a Table>> {
    match required(table, key, "")? {
        Value::Array(items) => items
            .iter()
            .enumerate()
            .map(|(i, item)| match item {
                Value::Table(t) => Ok(t),
                _ => Err(MmsError::parse(None, format!("`{key}[{i}]` must be a table"))),
            })
            .collect(),
        _ => Err(type_error("", key, "an array of tables")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::{fixtures, generate, GeneratorConfig, InstanceClass};
    use proptest::prelude::*;

    #[test]
    fn text_layout_is_fixed() {
        let text = to_text(&fixtures::greedy_example());
        assert!(text.starts_with("version = \"mms-instance/1\"\ncycle_time = 7.0000\n"));
        assert!(text.contains("processing_times = [15.0000, 4.0000]"));
        assert!(text.contains("failure_prob = 0.0000"));
    }

    #[test]
    fn missing_cycle_time_is_named() {
        let text = to_text(&fixtures::greedy_example()).replace("cycle_time = 7.0000\n", "");
        let err = from_text(&text).unwrap_err().to_string();
        assert!(err.contains("cycle_time"), "{err}");
    }

    #[test]
    fn unknown_fields_are_ignored_with_warnings() {
        let text = include_str!("../../tests/fixtures/extra_fields.toml");
        let (inst, warnings) = from_text(text).unwrap();
        assert_eq!(inst, fixtures::greedy_example());
        assert_eq!(warnings.len(), 3, "{warnings:?}");
        assert!(warnings.iter().any(|w| w.contains("`vehicles[2].color`")));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let err = from_text("version = \"mms-instance/1\"\ncycle_time = = 3\n").unwrap_err();
        assert!(matches!(err, MmsError::Parse { line: Some(2), .. }), "{err:?}");
    }

    #[test]
    fn invalid_content_reports_violations() {
        let text = to_text(&fixtures::greedy_example()).replace("length = 10.0000", "length = 5.0000");
        assert!(matches!(from_text(&text), Err(MmsError::InvalidInstance(v)) if v.len() == 1));
    }

    #[test]
    fn wrong_version_is_rejected() {
        let text = to_text(&fixtures::greedy_example()).replace("mms-instance/1", "mms-instance/9");
        assert!(from_text(&text).is_err());
    }

    #[test]
    fn save_and_load_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.toml");
        let inst = generate(&GeneratorConfig::for_class(InstanceClass::Small, 8, 1)).unwrap();
        save(&inst, &path).unwrap();
        assert_eq!(load(&path).unwrap(), inst);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn generated_instances_round_trip(seed in any::<u64>(), n in 2usize..40) {
            let inst = fixtures::random_instance(n, seed);
            let (back, warnings) = from_text(&to_text(&inst)).unwrap();
            prop_assert!(warnings.is_empty());
            prop_assert_eq!(back, inst);
        }
    }
}
