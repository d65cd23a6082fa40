//! Per-role scoring of the dictatorial, beautiful and invisible features.
//!
//! Dictatorial is computed from decision points, invisible is computed at
//! zero burden and otherwise read from calibration data, beautiful is read
//! verbatim from annotations.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::model::{Ceremony, DecisionClass, ModelError};
use crate::term::RoleId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Symbol {
    Cross,
    Tilde,
    Tick,
    EmptyRole,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct FeatureSymbol {
    pub value: Symbol,
    pub uncertain: bool,
}

impl FeatureSymbol {
    pub const TICK: FeatureSymbol = FeatureSymbol {
        value: Symbol::Tick,
        uncertain: false,
    };
    pub const CROSS: FeatureSymbol = FeatureSymbol {
        value: Symbol::Cross,
        uncertain: false,
    };
    pub const TILDE: FeatureSymbol = FeatureSymbol {
        value: Symbol::Tilde,
        uncertain: false,
    };
    pub const EMPTY: FeatureSymbol = FeatureSymbol {
        value: Symbol::EmptyRole,
        uncertain: false,
    };

    pub fn uncertain(value: Symbol) -> Self {
        FeatureSymbol {
            value,
            uncertain: true,
        }
    }
}

impl fmt::Display for FeatureSymbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self.value {
            Symbol::Tick => "✓",
            Symbol::Cross => "✗",
            Symbol::Tilde => "~",
            Symbol::EmptyRole => "∅",
        })?;
        if self.uncertain {
            f.write_str("?")?;
        }
        Ok(())
    }
}

impl FromStr for FeatureSymbol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (base, uncertain) = match s.strip_suffix('?') {
            Some(b) => (b, true),
            None => (s, false),
        };
        let value = match base {
            "✓" => Symbol::Tick,
            "✗" => Symbol::Cross,
            "~" => Symbol::Tilde,
            "∅" => Symbol::EmptyRole,
            _ => return Err(format!("unknown feature symbol {s:?}")),
        };
        if value == Symbol::EmptyRole && uncertain {
            return Err("the empty-role symbol cannot be uncertain".into());
        }
        Ok(FeatureSymbol { value, uncertain })
    }
}

impl Serialize for FeatureSymbol {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for FeatureSymbol {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        String::deserialize(d)?
            .parse()
            .map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Feature {
    Dictatorial,
    Beautiful,
    Invisible,
}

impl Feature {
    pub const ALL: [Feature; 3] = [Feature::Dictatorial, Feature::Beautiful, Feature::Invisible];
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Feature::Dictatorial => "dictatorial",
            Feature::Beautiful => "beautiful",
            Feature::Invisible => "invisible",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BeautyAnnotation {
    pub symbol: FeatureSymbol,
    pub rationale: String,
}

/// Symbol for each human role whose burden is above zero.
pub type InvisibilityCalibration = BTreeMap<RoleId, FeatureSymbol>;

/// Contents of a corpus entry's `annotations.json`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Annotations {
    /// Row label in the feature table.
    pub table_row: String,
    /// Position of the row in the feature table, from 1.
    pub table_position: u32,
    pub beautiful: BTreeMap<RoleId, BeautyAnnotation>,
    #[serde(default)]
    pub invisible: InvisibilityCalibration,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FeatureError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("{0} is a technical role")]
    TechnicalRole(RoleId),
    #[error("missing calibration for role {role} of {ceremony}")]
    MissingCalibration { ceremony: String, role: RoleId },
    #[error("calibration for role {role} of {ceremony} is ✓ but its burden is above zero")]
    TickCalibration { ceremony: String, role: RoleId },
    #[error("missing beauty annotation for role {role} of {ceremony}")]
    MissingAnnotation { ceremony: String, role: RoleId },
    #[error("beauty annotation for role {role} of {ceremony} has no rationale")]
    EmptyRationale { ceremony: String, role: RoleId },
}

fn human(c: &Ceremony, r: &RoleId) -> Result<(), FeatureError> {
    match c.role(r) {
        None => Err(ModelError::NoSuchRole(r.clone()).into()),
        Some(role) if !role.is_human() => Err(FeatureError::TechnicalRole(r.clone())),
        Some(_) => Ok(()),
    }
}

pub fn score_dictatorial(c: &Ceremony, r: &RoleId) -> Result<FeatureSymbol, FeatureError> {
    human(c, r)?;
    if c.role_burden(r)?.empty_role {
        return Ok(FeatureSymbol::EMPTY);
    }
    let profile = c.decision_profile(r)?;
    let has = |class| profile.get(&class).copied().unwrap_or(0) > 0;
    Ok(if has(DecisionClass::Free) {
        FeatureSymbol::CROSS
    } else if has(DecisionClass::Constrained) {
        FeatureSymbol::TILDE
    } else {
        FeatureSymbol::TICK
    })
}

pub fn score_invisible(
    c: &Ceremony,
    r: &RoleId,
    calibration: &InvisibilityCalibration,
) -> Result<FeatureSymbol, FeatureError> {
    human(c, r)?;
    let burden = c.role_burden(r)?;
    if burden.empty_role || burden.total() == 0 {
        return Ok(FeatureSymbol::TICK);
    }
    match calibration.get(r) {
        None => Err(FeatureError::MissingCalibration {
            ceremony: c.name.clone(),
            role: r.clone(),
        }),
        Some(s) if s.value == Symbol::Tick => Err(FeatureError::TickCalibration {
            ceremony: c.name.clone(),
            role: r.clone(),
        }),
        Some(s) => Ok(*s),
    }
}

pub fn score_beautiful(
    c: &Ceremony,
    r: &RoleId,
    annotation: Option<&BeautyAnnotation>,
) -> Result<FeatureSymbol, FeatureError> {
    human(c, r)?;
    if c.role_burden(r)?.empty_role {
        return Ok(FeatureSymbol::EMPTY);
    }
    let missing = || FeatureError::MissingAnnotation {
        ceremony: c.name.clone(),
        role: r.clone(),
    };
    let a = annotation.ok_or_else(missing)?;
    if a.rationale.trim().is_empty() {
        return Err(FeatureError::EmptyRationale {
            ceremony: c.name.clone(),
            role: r.clone(),
        });
    }
    Ok(a.symbol)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatrixRow {
    pub ceremony: String,
    /// Display name of the human role.
    pub role: String,
    pub dictatorial: FeatureSymbol,
    pub beautiful: FeatureSymbol,
    pub invisible: FeatureSymbol,
}

impl MatrixRow {
    pub fn cell(&self, f: Feature) -> FeatureSymbol {
        match f {
            Feature::Dictatorial => self.dictatorial,
            Feature::Beautiful => self.beautiful,
            Feature::Invisible => self.invisible,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<MatrixRow>,
}

/// Rows for every human role of one ceremony.
pub fn score_ceremony(c: &Ceremony, ann: &Annotations) -> Result<Vec<MatrixRow>, FeatureError> {
    c.human_roles()
        .map(|role| {
            Ok(MatrixRow {
                ceremony: ann.table_row.clone(),
                role: role.display_name.clone(),
                dictatorial: score_dictatorial(c, &role.id)?,
                beautiful: score_beautiful(c, &role.id, ann.beautiful.get(&role.id))?,
                invisible: score_invisible(c, &role.id, &ann.invisible)?,
            })
        })
        .collect()
}

/// The feature table over annotated ceremonies, ordered by table position.
pub fn score_matrix(entries: &[(&Ceremony, &Annotations)]) -> Result<FeatureMatrix, FeatureError> {
    let mut sorted: Vec<&(&Ceremony, &Annotations)> = entries.iter().collect();
    sorted.sort_by_key(|(_, a)| a.table_position);
    let mut rows = Vec::new();
    for (c, a) in sorted {
        rows.extend(score_ceremony(c, a)?);
    }
    Ok(FeatureMatrix { rows })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct CellDiff {
    pub ceremony: String,
    pub role: String,
    pub feature: Feature,
    pub expected: Option<FeatureSymbol>,
    pub actual: Option<FeatureSymbol>,
}

impl fmt::Display for CellDiff {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let show = |s: Option<FeatureSymbol>| s.map_or("(absent)".to_string(), |s| s.to_string());
        write!(
            f,
            "{} / {} / {}: expected {}, got {}",
            self.ceremony,
            self.role,
            self.feature,
            show(self.expected),
            show(self.actual)
        )
    }
}

impl FeatureMatrix {
    pub fn cell_count(&self) -> usize {
        self.rows.len() * Feature::ALL.len()
    }

    fn row(&self, ceremony: &str, role: &str) -> Option<&MatrixRow> {
        self.rows
            .iter()
            .find(|r| r.ceremony == ceremony && r.role == role)
    }

    /// Cell-level differences against an expected matrix, in expected order
    /// followed by rows only present here.
    pub fn diff(&self, expected: &FeatureMatrix) -> Vec<CellDiff> {
        let mut out = Vec::new();
        for e in &expected.rows {
            let actual = self.row(&e.ceremony, &e.role);
            for f in Feature::ALL {
                let got = actual.map(|a| a.cell(f));
                if got != Some(e.cell(f)) {
                    out.push(CellDiff {
                        ceremony: e.ceremony.clone(),
                        role: e.role.clone(),
                        feature: f,
                        expected: Some(e.cell(f)),
                        actual: got,
                    });
                }
            }
        }
        for a in &self.rows {
            if expected.row(&a.ceremony, &a.role).is_none() {
                for f in Feature::ALL {
                    out.push(CellDiff {
                        ceremony: a.ceremony.clone(),
                        role: a.role.clone(),
                        feature: f,
                        expected: None,
                        actual: Some(a.cell(f)),
                    });
                }
            }
        }
        out
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("matrix serializes");
        s.push('\n');
        s
    }

    /// Aligned plain-text table.
    pub fn to_text(&self) -> String {
        let headers = ["ceremony", "role", "dictatorial", "beautiful", "invisible"];
        let cells: Vec<[String; 5]> = self
            .rows
            .iter()
            .map(|r| {
                [
                    r.ceremony.clone(),
                    r.role.clone(),
                    r.dictatorial.to_string(),
                    r.beautiful.to_string(),
                    r.invisible.to_string(),
                ]
            })
            .collect();
        let mut widths = headers.map(|h| h.chars().count());
        for row in &cells {
            for (w, c) in widths.iter_mut().zip(row) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |row: &[String]| {
            let padded: Vec<String> = row
                .iter()
                .zip(widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            padded.join("  ").trim_end().to_string()
        };
        let mut out = line(&headers.map(String::from));
        out.push('\n');
        out.push_str(
            &widths
                .iter()
                .map(|w| "-".repeat(*w))
                .collect::<Vec<_>>()
                .join("  "),
        );
        out.push('\n');
        for row in &cells {
            out.push_str(&line(row));
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn symbols_round_trip() {
        for s in ["✓", "✗", "~", "∅", "✓?", "✗?", "~?"] {
            assert_eq!(s.parse::<FeatureSymbol>().unwrap().to_string(), s);
        }
        assert!("∅?".parse::<FeatureSymbol>().is_err());
        assert!("x".parse::<FeatureSymbol>().is_err());
    }

    fn sample() -> Ceremony {
        parse(
            "ceremony \"s\" {
               role H human \"human\"; role E human \"idle\"; role S technical \"server\";
               channel n network between H S;
               step 1: H -> S over n: password;
               do S: STORE password;
               decision H at 1 constrained;
               artifact H \"password\" security_exclusive;
             }",
        )
        .unwrap()
    }

    #[test]
    fn dictatorial_from_decisions() {
        let c = sample();
        assert_eq!(
            score_dictatorial(&c, &"H".into()).unwrap(),
            FeatureSymbol::TILDE
        );
        assert_eq!(
            score_dictatorial(&c, &"E".into()).unwrap(),
            FeatureSymbol::EMPTY
        );
        assert!(matches!(
            score_dictatorial(&c, &"S".into()),
            Err(FeatureError::TechnicalRole(_))
        ));
    }

    #[test]
    fn invisible_needs_calibration_above_zero() {
        let c = sample();
        let mut cal = InvisibilityCalibration::new();
        assert!(matches!(
            score_invisible(&c, &"H".into(), &cal),
            Err(FeatureError::MissingCalibration { .. })
        ));
        assert_eq!(
            score_invisible(&c, &"E".into(), &cal).unwrap(),
            FeatureSymbol::TICK
        );
        cal.insert("H".into(), FeatureSymbol::TICK);
        assert!(matches!(
            score_invisible(&c, &"H".into(), &cal),
            Err(FeatureError::TickCalibration { .. })
        ));
        cal.insert("H".into(), FeatureSymbol::CROSS);
        assert_eq!(
            score_invisible(&c, &"H".into(), &cal).unwrap(),
            FeatureSymbol::CROSS
        );
    }

    #[test]
    fn diff_names_the_cell() {
        let row = |b: &str| MatrixRow {
            ceremony: "c".into(),
            role: "human".into(),
            dictatorial: FeatureSymbol::TICK,
            beautiful: b.parse().unwrap(),
            invisible: FeatureSymbol::CROSS,
        };
        let got = FeatureMatrix {
            rows: vec![row("✓")],
        };
        let want = FeatureMatrix {
            rows: vec![row("✓?")],
        };
        let d = got.diff(&want);
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].feature, Feature::Beautiful);
        assert_eq!(
            d[0].to_string(),
            "c / human / beautiful: expected ✓?, got ✓"
        );
    }
}
