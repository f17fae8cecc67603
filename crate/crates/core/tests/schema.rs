use std::path::{Path, PathBuf};

use handfit::cli::cmd_synth;
use handfit::pipeline::{KeypointFile, KeypointSet, Units};
use handfit::HandModel;
use nalgebra::Vector3;
use serde_json::{json, Value};

fn schema_path() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../schema/keypoints.schema.json")
}

fn validator() -> jsonschema::Validator {
    let text = std::fs::read_to_string(schema_path()).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    jsonschema::validator_for(&schema).unwrap()
}

fn hand(units: &str, point: [f64; 3]) -> Value {
    json!({
        "handedness": "right",
        "score": 0.9,
        "units": units,
        "keypoints": vec![point; 21],
    })
}

fn doc(hands: Vec<Value>) -> Value {
    json!({ "image_width": 640, "image_height": 480, "hands": hands })
}

fn parser_accepts(v: &Value) -> bool {
    let p = Path::new("inline.json");
    KeypointFile::parse(&v.to_string(), p)
        .and_then(|f| f.keypoint_sets(p))
        .is_ok()
}

#[test]
fn schema_itself_is_valid_json_schema() {
    let text = std::fs::read_to_string(schema_path()).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    assert!(jsonschema::meta::is_valid(&schema));
}

#[test]
fn synth_output_conforms() {
    let dir = tempfile::tempdir().unwrap();
    cmd_synth(&HandModel::default_right(), 3, 2.0, 11, dir.path()).unwrap();
    let v = validator();
    let mut n = 0;
    for entry in std::fs::read_dir(dir.path().join("keypoints")).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        let value: Value = serde_json::from_str(&text).unwrap();
        let errors: Vec<String> = v.iter_errors(&value).map(|e| e.to_string()).collect();
        assert!(errors.is_empty(), "{errors:?}");
        n += 1;
    }
    assert_eq!(n, 3);
}

#[test]
fn serialized_keypoint_files_conform() {
    let v = validator();
    let mut kp = KeypointSet::new([Vector3::new(0.25, 0.5, -0.01); 21], Units::Normalized);
    kp.image_size = Some((640, 480));
    kp.valid[20] = false;
    let mut left = kp.clone();
    left.handedness = handfit::Handedness::Left;
    let file = KeypointFile::from_sets(&[kp, left], (640, 480));
    let value = serde_json::to_value(&file).unwrap();
    assert!(v.is_valid(&value));
    assert!(v.is_valid(&doc(vec![])), "empty detection");
}

#[test]
fn schema_and_parser_agree() {
    let v = validator();
    let accepted = [
        doc(vec![hand("normalized", [0.5, 0.5, 0.0])]),
        doc(vec![hand("pixels", [320.0, 240.0, -12.0])]),
        doc(vec![hand("mm", [-40.0, 10.0, 650.0])]),
        doc(vec![]),
    ];
    for d in &accepted {
        assert!(v.is_valid(d), "schema rejects {d}");
        assert!(parser_accepts(d), "parser rejects {d}");
    }

    let mut short = hand("mm", [0.0; 3]);
    short["keypoints"].as_array_mut().unwrap().pop();
    let mut bad_valid = hand("mm", [0.0; 3]);
    bad_valid["valid"] = json!(vec![true; 20]);
    let mut no_width = doc(vec![]);
    no_width.as_object_mut().unwrap().remove("image_width");
    let rejected = [
        doc(vec![short]),
        doc(vec![bad_valid]),
        doc(vec![hand("inches", [0.0; 3])]),
        doc(vec![hand("normalized", [1.5, 0.5, 0.0])]),
        doc(vec![
            json!({ "handedness": "both", "units": "mm", "keypoints": vec![[0.0; 3]; 21] }),
        ]),
        no_width,
    ];
    for d in &rejected {
        assert!(!v.is_valid(d), "schema accepts {d}");
        assert!(!parser_accepts(d), "parser accepts {d}");
    }
}
