//! Problem files shipped with the crate.

use crate::model::{parse_problem, FileError, SafetyProblem};

pub const CT_1D: &str = include_str!("../presets/ct-1d.prob");
pub const CT_NONLINEAR: &str = include_str!("../presets/ct-nonlinear.prob");
pub const DT_POP: &str = include_str!("../presets/dt-pop.prob");
pub const DT_POP_LINEAR: &str = include_str!("../presets/dt-pop-linear.prob");

/// `(name, source)` for every preset.
pub const ALL: [(&str, &str); 4] =
    [("ct-1d", CT_1D), ("ct-nonlinear", CT_NONLINEAR), ("dt-pop", DT_POP), ("dt-pop-linear", DT_POP_LINEAR)];

/// Looks a preset up by name, with or without the `.prob` suffix.
pub fn source(name: &str) -> Option<&'static str> {
    let name = name.strip_suffix(".prob").unwrap_or(name);
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Option<Result<SafetyProblem, FileError>> {
    source(name).map(parse_problem)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_parse_and_round_trip() {
        for (name, src) in ALL {
            let p = parse_problem(src).unwrap_or_else(|e| panic!("{name}: {e}"));
            assert_eq!(parse_problem(&p.to_file_string()).unwrap(), p, "{name}");
            let x0 = p.initial_point.as_ref().unwrap();
            assert!(p.with_sigma(0.1).initial.contains(p.state(), x0, 1e-9), "{name}");
        }
        assert!(load("dt-pop.prob").is_some());
        assert!(load("nope").is_none());
    }
}
