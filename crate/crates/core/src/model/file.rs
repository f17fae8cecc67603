//! Plain-text model file.
//!
//! Grammar (one record per line, `#` starts a comment, blank lines ignored,
//! fields separated by whitespace):
//!
//! ```text
//! handmodel <joints> <dofs> <shape> <right|left>     header, counts must be 21 45 10
//! <index> <x> <y> <z> <parent>                        21 joint lines, index 0..20 in order,
//!                                                     parent -1 for the root
//! <dof> <lower> <upper>                               45 limit lines, radians
//! <mode> <w_1> ... <w_20>                             10 shape lines, one weight per bone;
//!                                                     bone k ends at joint k
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Vector3;

use super::{HandModel, Handedness, JointLimit, NUM_BONES, NUM_JOINTS, NUM_POSE, NUM_SHAPE};
use crate::error::{Error, Result};

struct Lines<'a> {
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
    path: &'a Path,
    last_line: usize,
}

impl<'a> Lines<'a> {
    fn next_record(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        for (i, raw) in self.inner.by_ref() {
            self.last_line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            return Ok((i + 1, content.split_whitespace().collect()));
        }
        Err(Error::Parse {
            path: self.path.to_path_buf(),
            line: self.last_line + 1,
            message: format!("unexpected end of file, expected {what}"),
        })
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            path: self.path.to_path_buf(),
            line,
            message: message.into(),
        }
    }
}

fn num<T: std::str::FromStr>(lines: &Lines<'_>, line: usize, field: &str, what: &str) -> Result<T> {
    field
        .parse()
        .map_err(|_| lines.err(line, format!("cannot parse {what} from {field:?}")))
}

/// Parses a model file. `path` is used only for error messages.
pub fn parse_model(text: &str, path: &Path) -> Result<HandModel> {
    let mut lines = Lines {
        inner: text.lines().enumerate(),
        path,
        last_line: 0,
    };

    let (ln, header) = lines.next_record("header")?;
    if header.len() != 5 || header[0] != "handmodel" {
        return Err(lines.err(
            ln,
            "header must be `handmodel <joints> <dofs> <shape> <right|left>`",
        ));
    }
    let counts: [usize; 3] = [
        num(&lines, ln, header[1], "joint count")?,
        num(&lines, ln, header[2], "dof count")?,
        num(&lines, ln, header[3], "shape count")?,
    ];
    if counts != [NUM_JOINTS, NUM_POSE, NUM_SHAPE] {
        return Err(lines.err(
            ln,
            format!("counts must be {NUM_JOINTS} {NUM_POSE} {NUM_SHAPE}, got {counts:?}"),
        ));
    }
    let handedness = match header[4] {
        "right" => Handedness::Right,
        "left" => Handedness::Left,
        other => return Err(lines.err(ln, format!("unknown handedness {other:?}"))),
    };

    let mut rest = [Vector3::zeros(); NUM_JOINTS];
    let mut parent = [0i32; NUM_JOINTS];
    for i in 0..NUM_JOINTS {
        let (ln, f) = lines.next_record("joint line")?;
        if f.len() != 5 {
            return Err(lines.err(ln, format!("joint line needs 5 fields, got {}", f.len())));
        }
        let idx: usize = num(&lines, ln, f[0], "joint index")?;
        if idx != i {
            return Err(lines.err(ln, format!("expected joint {i}, got {idx}")));
        }
        rest[i] = Vector3::new(
            num(&lines, ln, f[1], "x")?,
            num(&lines, ln, f[2], "y")?,
            num(&lines, ln, f[3], "z")?,
        );
        parent[i] = num(&lines, ln, f[4], "parent")?;
    }

    let mut limits = [JointLimit {
        lower: 0.0,
        upper: 0.0,
    }; NUM_POSE];
    for (i, limit) in limits.iter_mut().enumerate() {
        let (ln, f) = lines.next_record("limit line")?;
        if f.len() != 3 {
            return Err(lines.err(ln, format!("limit line needs 3 fields, got {}", f.len())));
        }
        let idx: usize = num(&lines, ln, f[0], "dof index")?;
        if idx != i {
            return Err(lines.err(ln, format!("expected dof {i}, got {idx}")));
        }
        let lower: f64 = num(&lines, ln, f[1], "lower bound")?;
        let upper: f64 = num(&lines, ln, f[2], "upper bound")?;
        if !(lower < upper) {
            return Err(lines.err(ln, format!("lower bound {lower} not below upper {upper}")));
        }
        *limit = JointLimit { lower, upper };
    }

    let mut basis = [[0.0; NUM_BONES]; NUM_SHAPE];
    for (m, mode) in basis.iter_mut().enumerate() {
        let (ln, f) = lines.next_record("shape basis line")?;
        if f.len() != NUM_BONES + 1 {
            return Err(lines.err(
                ln,
                format!("shape line needs {} fields, got {}", NUM_BONES + 1, f.len()),
            ));
        }
        let idx: usize = num(&lines, ln, f[0], "mode index")?;
        if idx != m {
            return Err(lines.err(ln, format!("expected mode {m}, got {idx}")));
        }
        for (w, field) in mode.iter_mut().zip(&f[1..]) {
            *w = num(&lines, ln, field, "basis weight")?;
        }
    }

    if let Ok((ln, _)) = lines.next_record("") {
        return Err(lines.err(ln, "trailing content after shape basis"));
    }

    HandModel::new(rest, parent, basis, limits, handedness).map_err(|e| match e {
        Error::Parameter(msg) => lines.err(0, msg),
        other => other,
    })
}

/// Writes a model in the format accepted by [`parse_model`].
pub fn format_model(model: &HandModel) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "handmodel {NUM_JOINTS} {NUM_POSE} {NUM_SHAPE} {}",
        model.handedness().as_str()
    );
    for (i, p) in model.rest_joints().iter().enumerate() {
        let _ = writeln!(out, "{i} {} {} {} {}", p.x, p.y, p.z, model.parents()[i]);
    }
    for (i, lim) in model.joint_limits().iter().enumerate() {
        let _ = writeln!(out, "{i} {} {}", lim.lower, lim.upper);
    }
    for (m, mode) in model.shape_basis().iter().enumerate() {
        let weights: Vec<String> = mode.iter().map(|w| w.to_string()).collect();
        let _ = writeln!(out, "{m} {}", weights.join(" "));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: &str = "test.model";

    fn default_text() -> String {
        format_model(&HandModel::default_right())
    }

    #[test]
    fn format_then_parse_is_identity() {
        let m = HandModel::default_right();
        let back = parse_model(&format_model(&m), Path::new(P)).unwrap();
        assert_eq!(m, back);
    }

    #[test]
    fn malformed_joint_line_reports_line_number() {
        let text = default_text().replacen("3 0.06 0.075 0.012 2", "3 0.06 zz 0.012 2", 1);
        match parse_model(&text, Path::new(P)) {
            Err(Error::Parse { line, message, .. }) => {
                assert_eq!(line, 5);
                assert!(message.contains("zz"), "{message}");
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn wrong_counts_rejected() {
        let text = default_text().replacen("handmodel 21 45 10", "handmodel 21 45 9", 1);
        assert!(matches!(
            parse_model(&text, Path::new(P)),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn truncated_file_rejected() {
        let text: String = default_text()
            .lines()
            .take(30)
            .collect::<Vec<_>>()
            .join("\n");
        match parse_model(&text, Path::new(P)) {
            Err(Error::Parse { message, .. }) => assert!(message.contains("end of file")),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn inverted_limit_rejected() {
        let mut lines: Vec<String> = default_text().lines().map(String::from).collect();
        // header + 21 joints, then dof 0
        lines[22] = "0 1.0 -1.0".into();
        match parse_model(&lines.join("\n"), Path::new(P)) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 23),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn comments_and_blank_lines_are_skipped() {
        let text = format!(
            "# leading comment\n\n{}",
            default_text().replace('\n', "  # c\n")
        );
        assert!(parse_model(&text, Path::new(P)).is_ok());
    }
}
