//! Scan files: a small JSON document listing lines and planes.
//!
//! ```json
//! {
//!   "schema_version": 1,
//!   "id": "scan-0",
//!   "objects": [
//!     {"kind": "line", "line": {"direction": [0, 0, 1], "point": [1, 2, 0]}},
//!     {"kind": "plane", "plane": {"normal": [1, 0, 0], "d": 4.5}, "centroid": [4.5, 1, 2]}
//!   ]
//! }
//! ```

use std::fs;
use std::path::{Path, PathBuf};

use graffmatch_core::{GraffElement, Kind, Landmark, Scan};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Directions and normals further than this from unit length are reported.
const NORM_WARN_TOL: f64 = 1e-3;
const NORM_MIN: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum InputError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}:{column}: {message}")]
    Syntax {
        path: PathBuf,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("{path}: {field}: {message}")]
    Field {
        path: PathBuf,
        field: String,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScanFile {
    pub schema_version: u32,
    pub id: String,
    pub objects: Vec<ObjectRecord>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectKind {
    Line,
    Plane,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LineRecord {
    pub direction: [f64; 3],
    pub point: [f64; 3],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlaneRecord {
    pub normal: [f64; 3],
    pub d: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectRecord {
    pub kind: ObjectKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub line: Option<LineRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub plane: Option<PlaneRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub centroid: Option<[f64; 3]>,
}

/// A parsed scan plus any non-fatal remarks (e.g. renormalized vectors).
#[derive(Clone, Debug)]
pub struct LoadedScan {
    pub scan: Scan,
    pub warnings: Vec<String>,
}

struct Validator<'a> {
    path: &'a Path,
    warnings: Vec<String>,
}

impl Validator<'_> {
    fn fail(&self, field: impl Into<String>, message: impl Into<String>) -> InputError {
        InputError::Field {
            path: self.path.to_path_buf(),
            field: field.into(),
            message: message.into(),
        }
    }

    fn finite(&self, field: &str, v: &[f64]) -> Result<(), InputError> {
        if v.iter().all(|x| x.is_finite()) {
            Ok(())
        } else {
            Err(self.fail(field, "values must be finite"))
        }
    }

    fn unit(&mut self, field: &str, v: [f64; 3]) -> Result<Vector3<f64>, InputError> {
        self.finite(field, &v)?;
        let v = Vector3::from(v);
        let n = v.norm();
        if n < NORM_MIN {
            return Err(self.fail(field, "vector has zero length"));
        }
        if (n - 1.0).abs() > NORM_WARN_TOL {
            self.warnings.push(format!(
                "{}: {field}: norm {n:.6} is not 1, normalized",
                self.path.display()
            ));
        }
        Ok(v / n)
    }

    fn object(&mut self, i: usize, o: &ObjectRecord) -> Result<Landmark, InputError> {
        let at = |f: &str| format!("objects[{i}].{f}");
        let centroid = match o.centroid {
            Some(c) => {
                self.finite(&at("centroid"), &c)?;
                Some(Vector3::from(c))
            }
            None => None,
        };
        let element = match o.kind {
            ObjectKind::Line => {
                if o.plane.is_some() {
                    return Err(self.fail(at("plane"), "not allowed for kind \"line\""));
                }
                let line = o
                    .line
                    .as_ref()
                    .ok_or_else(|| self.fail(at("line"), "missing for kind \"line\""))?;
                let direction = self.unit(&at("line.direction"), line.direction)?;
                self.finite(&at("line.point"), &line.point)?;
                GraffElement::line(direction, Vector3::from(line.point))
                    .map_err(|e| self.fail(at("line"), e.to_string()))?
            }
            ObjectKind::Plane => {
                if o.line.is_some() {
                    return Err(self.fail(at("line"), "not allowed for kind \"plane\""));
                }
                let plane = o
                    .plane
                    .as_ref()
                    .ok_or_else(|| self.fail(at("plane"), "missing for kind \"plane\""))?;
                let normal = self.unit(&at("plane.normal"), plane.normal)?;
                self.finite(&at("plane.d"), &[plane.d])?;
                let element = GraffElement::plane(normal, plane.d)
                    .map_err(|e| self.fail(at("plane"), e.to_string()))?;
                match centroid {
                    Some(c) => element.with_anchor(c),
                    None => element,
                }
            }
        };
        let landmark = Landmark::new(element);
        Ok(match centroid {
            Some(c) => landmark.with_centroid(c),
            None => landmark,
        })
    }
}

/// Parses and validates scan file contents; `path` is only used in messages.
pub fn parse_scan(text: &str, path: &Path) -> Result<LoadedScan, InputError> {
    let file: ScanFile = serde_json::from_str(text).map_err(|e| InputError::Syntax {
        path: path.to_path_buf(),
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let mut v = Validator {
        path,
        warnings: Vec::new(),
    };
    if file.schema_version != SCHEMA_VERSION {
        return Err(v.fail(
            "schema_version",
            format!("unsupported version {} (expected {SCHEMA_VERSION})", file.schema_version),
        ));
    }
    let mut scan = Scan::new(file.id.clone());
    for (i, o) in file.objects.iter().enumerate() {
        let landmark = v.object(i, o)?;
        scan.push(landmark);
    }
    Ok(LoadedScan {
        scan,
        warnings: v.warnings,
    })
}

pub fn read_scan(path: &Path) -> Result<LoadedScan, InputError> {
    let text = fs::read_to_string(path).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_scan(&text, path)
}

/// File representation of a scan. Lines are written through their anchor
/// point so that reading the file back reproduces the same elements.
pub fn scan_to_file(scan: &Scan) -> ScanFile {
    let objects = scan
        .landmarks()
        .iter()
        .map(|l| {
            let e = &l.element;
            let centroid = l.centroid.map(|c| c.into());
            match e.kind() {
                Kind::Line => ObjectRecord {
                    kind: ObjectKind::Line,
                    line: Some(LineRecord {
                        direction: e.axis().into(),
                        point: (*e.anchor()).into(),
                    }),
                    plane: None,
                    centroid,
                },
                Kind::Plane => {
                    let h = e.to_hesse().expect("plane elements convert to Hesse form");
                    ObjectRecord {
                        kind: ObjectKind::Plane,
                        line: None,
                        plane: Some(PlaneRecord {
                            normal: (*h.normal()).into(),
                            d: h.offset(),
                        }),
                        centroid,
                    }
                }
            }
        })
        .collect();
    ScanFile {
        schema_version: SCHEMA_VERSION,
        id: scan.id().to_string(),
        objects,
    }
}

pub fn write_scan(scan: &Scan, path: &Path) -> Result<(), InputError> {
    let mut text = serde_json::to_string_pretty(&scan_to_file(scan)).expect("scan files serialize");
    text.push('\n');
    fs::write(path, text).map_err(|source| InputError::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn parse(text: &str) -> Result<LoadedScan, InputError> {
        parse_scan(text, Path::new("t.json"))
    }

    #[test]
    fn parses_lines_and_planes() {
        let s = parse(
            r#"{"schema_version": 1, "id": "a", "objects": [
                {"kind": "line", "line": {"direction": [0, 0, 2], "point": [1, 0, 5]}},
                {"kind": "plane", "plane": {"normal": [0, 0, -1], "d": -2}, "centroid": [3, 1, 2]}
            ]}"#,
        )
        .unwrap();
        assert_eq!(s.scan.len(), 2);
        assert_eq!(s.warnings.len(), 1);
        let line = &s.scan.landmarks()[0].element;
        assert_eq!(line.kind(), Kind::Line);
        assert_eq!(*line.anchor(), Vector3::new(1.0, 0.0, 5.0));
        let plane = s.scan.landmarks()[1].element.to_hesse().unwrap();
        assert_eq!(*plane.normal(), Vector3::z());
        assert_eq!(plane.offset(), 2.0);
        assert_eq!(*s.scan.landmarks()[1].element.anchor(), Vector3::new(3.0, 1.0, 2.0));
    }

    #[test]
    fn field_errors_name_the_field() {
        let err = parse(
            r#"{"schema_version": 1, "id": "a", "objects": [
                {"kind": "line", "line": {"direction": [0, 0, 1], "point": [0, 0, 0]}},
                {"kind": "line", "line": {"direction": [0, 0, 0], "point": [0, 0, 0]}}
            ]}"#,
        )
        .unwrap_err();
        assert!(err.to_string().contains("objects[1].line.direction"), "{err}");
    }

    #[test]
    fn syntax_errors_carry_positions() {
        let err = parse("{\n\"schema_version\": 1,\n\"id\": }").unwrap_err();
        match err {
            InputError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }
}
