//! Scene JSON and JSON-lines corpus files.
//!
//! ```json
//! {"config": {"categories": [{"name": "bed", "max_multiplicity": 4, "class_constant": 1}],
//!             "descriptor_dim": 2},
//!  "objects": [{"category": 0, "slot": 0, "existence": 1, "center": [0, 0, 0.4],
//!               "front": [1, 0], "size": [2, 1.6, 0.8], "descriptor": [0.1, 0.2]}, ...]}
//! ```

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::{CategoryConfig, ObjectColumn, SceneMatrix};
use crate::error::{Error, Result};

fn parse_err(path: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.into(),
        message: message.into(),
    }
}

fn field<'a>(obj: &'a Value, name: &str, path: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| parse_err(format!("{path}.{name}"), "missing field"))
}

fn number(v: &Value, path: &str) -> Result<f64> {
    v.as_f64().ok_or_else(|| parse_err(path, "expected a number"))
}

fn index(v: &Value, path: &str) -> Result<usize> {
    v.as_u64()
        .map(|x| x as usize)
        .ok_or_else(|| parse_err(path, "expected a non-negative integer"))
}

fn numbers<const N: usize>(v: &Value, path: &str) -> Result<[f64; N]> {
    let vec = number_vec(v, path)?;
    vec.try_into()
        .map_err(|v: Vec<f64>| parse_err(path, format!("expected {N} numbers, got {}", v.len())))
}

fn number_vec(v: &Value, path: &str) -> Result<Vec<f64>> {
    let arr = v
        .as_array()
        .ok_or_else(|| parse_err(path, "expected an array"))?;
    arr.iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{path}[{i}]")))
        .collect()
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    category: usize,
    slot: usize,
    existence: f64,
    center: [f64; 3],
    front: [f64; 2],
    size: [f64; 3],
    descriptor: Vec<f64>,
}

pub(crate) fn scene_to_value(scene: &SceneMatrix) -> Value {
    let categories = scene.config.column_categories();
    let mut slot_counter = vec![0usize; scene.config.num_categories()];
    let objects: Vec<Value> = scene
        .columns
        .iter()
        .zip(categories)
        .map(|(c, k)| {
            let slot = slot_counter[k];
            slot_counter[k] += 1;
            json!(ObjectRecord {
                category: k,
                slot,
                existence: c.existence,
                center: c.center,
                front: c.front,
                size: c.size,
                descriptor: c.descriptor.clone(),
            })
        })
        .collect();
    json!({ "config": &*scene.config, "objects": objects })
}

pub(crate) fn scene_from_value(root: &Value) -> Result<SceneMatrix> {
    let cfg_value = field(root, "config", "$")?;
    let config: CategoryConfig = serde_json::from_value(cfg_value.clone())
        .map_err(|e| parse_err("$.config", e.to_string()))?;
    config
        .validate()
        .map_err(|e| parse_err("$.config", e.to_string()))?;
    let config = Arc::new(config);
    let d = config.descriptor_dim;

    let objects = field(root, "objects", "$")?
        .as_array()
        .ok_or_else(|| parse_err("$.objects", "expected an array"))?;
    let mut slots: Vec<Option<ObjectColumn>> = vec![None; config.num_objects()];
    for (i, obj) in objects.iter().enumerate() {
        let path = format!("$.objects[{i}]");
        let k = index(field(obj, "category", &path)?, &format!("{path}.category"))?;
        if k >= config.num_categories() {
            return Err(parse_err(format!("{path}.category"), format!("unknown category {k}")));
        }
        let slot = index(field(obj, "slot", &path)?, &format!("{path}.slot"))?;
        let range = config.block_range(k);
        if slot >= range.len() {
            return Err(parse_err(
                format!("{path}.slot"),
                format!(
                    "slot {slot} exceeds multiplicity {} of `{}`",
                    range.len(),
                    config.categories[k].name
                ),
            ));
        }
        let descriptor = number_vec(field(obj, "descriptor", &path)?, &format!("{path}.descriptor"))?;
        if descriptor.len() != d {
            return Err(parse_err(
                format!("{path}.descriptor"),
                format!("expected {d} entries, got {}", descriptor.len()),
            ));
        }
        let column = ObjectColumn {
            existence: number(field(obj, "existence", &path)?, &format!("{path}.existence"))?,
            center: numbers(field(obj, "center", &path)?, &format!("{path}.center"))?,
            front: numbers(field(obj, "front", &path)?, &format!("{path}.front"))?,
            size: numbers(field(obj, "size", &path)?, &format!("{path}.size"))?,
            descriptor,
        };
        let target = &mut slots[range.start + slot];
        if target.is_some() {
            return Err(parse_err(
                path,
                format!("duplicate column for `{}` slot {slot}", config.categories[k].name),
            ));
        }
        *target = Some(column);
    }

    let categories = config.column_categories();
    let mut columns = Vec::with_capacity(slots.len());
    for (j, slot) in slots.into_iter().enumerate() {
        match slot {
            Some(c) => columns.push(c),
            None => {
                let k = categories[j];
                let s = j - config.block_range(k).start;
                return Err(parse_err(
                    "$.objects",
                    format!("missing column for category `{}` slot {s}", config.categories[k].name),
                ));
            }
        }
    }
    Ok(SceneMatrix { config, columns })
}

pub fn write_scene_json(scene: &SceneMatrix) -> Vec<u8> {
    serde_json::to_vec(&scene_to_value(scene)).expect("scene serializes")
}

pub fn read_scene_json(bytes: &[u8]) -> Result<SceneMatrix> {
    let root: Value =
        serde_json::from_slice(bytes).map_err(|e| parse_err("$", e.to_string()))?;
    scene_from_value(&root)
}

/// One scene per line.
pub fn write_corpus_jsonl(scenes: &[SceneMatrix]) -> Vec<u8> {
    let mut out = Vec::new();
    for s in scenes {
        out.extend(write_scene_json(s));
        out.push(b'\n');
    }
    out
}

/// Scenes sharing an identical configuration are given one shared `Arc`.
pub fn read_corpus_jsonl(bytes: &[u8]) -> Result<Vec<SceneMatrix>> {
    let text = std::str::from_utf8(bytes).map_err(|e| parse_err("$", e.to_string()))?;
    let mut scenes: Vec<SceneMatrix> = Vec::new();
    for (line_no, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let mut scene = read_scene_json(line.as_bytes()).map_err(|e| match e {
            Error::Parse { path, message } => Error::Parse {
                path: format!("line {}: {path}", line_no + 1),
                message,
            },
            other => other,
        })?;
        if let Some(prev) = scenes.last() {
            if prev.config == scene.config {
                scene.config = prev.config.clone();
            }
        }
        scenes.push(scene);
    }
    Ok(scenes)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SceneMatrix {
        let cfg = Arc::new(CategoryConfig::uniform(&["bed", "stand"], 2, 2).unwrap());
        let mut s = SceneMatrix::empty(cfg);
        s.columns[0] = ObjectColumn {
            existence: 1.0,
            center: [0.1 + 0.2, -1.0 / 3.0, 0.45],
            front: [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2],
            size: [2.0, 1.6, 0.8],
            descriptor: vec![1e-300, -7.25e12],
        };
        s
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let s = sample();
        let back = read_scene_json(&write_scene_json(&s)).unwrap();
        assert_eq!(back, s);
        for (a, b) in s.to_flat().iter().zip(back.to_flat()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn empty_scene_round_trips() {
        let s = SceneMatrix::empty(sample().config);
        assert_eq!(read_scene_json(&write_scene_json(&s)).unwrap(), s);
    }

    #[test]
    fn missing_column_names_category() {
        let s = sample();
        let mut v = scene_to_value(&s);
        v["objects"].as_array_mut().unwrap().remove(3);
        let err = scene_from_value(&v).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("stand"), "{msg}");
    }

    #[test]
    fn bad_field_reports_path() {
        let s = sample();
        let mut v = scene_to_value(&s);
        v["objects"][1]["center"] = json!([1.0, 2.0]);
        match scene_from_value(&v).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "$.objects[1].center"),
            e => panic!("unexpected {e}"),
        }
        v["objects"][1]["center"] = json!([1.0, 2.0, 0.0]);
        v["objects"][1].as_object_mut().unwrap().remove("front");
        match scene_from_value(&v).unwrap_err() {
            Error::Parse { path, .. } => assert_eq!(path, "$.objects[1].front"),
            e => panic!("unexpected {e}"),
        }
    }

    #[test]
    fn corpus_lines_share_config() {
        let s = sample();
        let bytes = write_corpus_jsonl(&[s.clone(), s.clone()]);
        let back = read_corpus_jsonl(&bytes).unwrap();
        assert_eq!(back.len(), 2);
        assert!(Arc::ptr_eq(&back[0].config, &back[1].config));
    }
}
