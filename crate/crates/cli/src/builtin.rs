//! Builtin scenarios, stored as the same JSON a user would write.

use crate::spec::{ScenarioSpec, ValidationError};

const HYPERBOLIC: &str = r#"{
  "name": "hyperbolic",
  "model": {"n": 2, "f": "hyperbolic"},
  "tasks": [
    {"task": "tone", "domain": {"a": 0, "b": 16}},
    {"task": "ess", "radii": [2, 4, 8, 16]},
    {"task": "compare", "g": "1", "horizon": 20}
  ]
}"#;

const BAIDER: &str = r#"{
  "name": "baider",
  "model": {"n": 2, "f": "baider_base", "m": 1, "psi": "baider_fiber"},
  "tasks": [
    {"task": "ess", "radii": [4, 8, 16, 24, 32, 40]},
    {"task": "ess", "radii": [4, 6, 8, 10], "space": "total"},
    {"task": "certify", "driving": "h", "r_star": 2, "horizon": 20},
    {"task": "brooks", "r_max": 30},
    {"task": "verify", "a": "1", "phi": "sinh(t)"}
  ]
}"#;

const SL2R: &str = r#"{
  "name": "sl2r",
  "model": {"n": 2, "f": "hyperbolic", "m": 1, "psi": "constant"},
  "tasks": [
    {"task": "ess", "radii": [2, 4, 8, 16], "transfer_horizon": 40},
    {"task": "verify", "a": "t", "phi": "cosh(t)"}
  ]
}"#;

const PROPER_H: &str = r#"{
  "name": "proper-h",
  "model": {"n": 2, "f": "baider_base", "m": 1, "psi": "constant"},
  "tasks": [
    {"task": "certify", "driving": "h", "r_star": 2, "horizon": 20},
    {"task": "certify", "driving": "radial", "g": "4*t^2 + 6", "r_star": 10, "horizon": 20},
    {"task": "ess", "radii": [2]}
  ]
}"#;

pub const BUILTIN_NAMES: [&str; 4] = ["hyperbolic", "baider", "sl2r", "proper-h"];

pub fn builtin_source(name: &str) -> Option<&'static str> {
    match name {
        "hyperbolic" => Some(HYPERBOLIC),
        "baider" => Some(BAIDER),
        "sl2r" => Some(SL2R),
        "proper-h" => Some(PROPER_H),
        _ => None,
    }
}

pub fn builtin(name: &str) -> Option<Result<ScenarioSpec, ValidationError>> {
    builtin_source(name).map(ScenarioSpec::from_json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for name in BUILTIN_NAMES {
            let s = builtin(name).unwrap().unwrap();
            assert_eq!(s.name, name);
            s.validate().unwrap();
        }
        assert!(builtin("nope").is_none());
    }
}
