//! Ground-truth environment of a run and the evaluation of terms against it.
//!
//! Function symbols with a fixed meaning in the world:
//!
//! | term                          | value                                  |
//! |-------------------------------|----------------------------------------|
//! | document atom `d`             | the document                           |
//! | trait atom (`face`, ...)      | identity of whoever presents it        |
//! | `photo/name/bio_info(d)`      | the document's owner                   |
//! | `number(d)`                   | the document's number                  |
//! | `flight_number(d)`            | flight printed on the document         |
//! | `flight_number(G, t)`         | flight assigned to gate `G` at time `t` |
//! | `flight&passenger(k, ...)`    | database record stored under key `k`   |
//! | `details(x)`                  | (passenger, flight) of a document/record |
//! | `scan(x)`, `code(x)`          | `x`                                    |
//!
//! Anything else evaluates to itself. Terms carrying a slip or forgery marker
//! are unknown to the world and also evaluate to themselves.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{RoleId, Term};

/// Suffix appended to leaves of a human transcription slip.
pub const SLIP_MARKER: &str = "~slip";
/// Suffix appended to leaves of attacker-made terms.
pub const FORGED_MARKER: &str = "@adv";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentFact {
    pub owner: String,
    pub genuine: bool,
    pub valid: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flight: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub number: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DbRecord {
    pub passenger: String,
    pub flight: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateAssignment {
    pub gate: String,
    pub time: String,
    pub flight: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Secret {
    pub role: RoleId,
    pub name: String,
    pub value: String,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BiometricTruth {
    pub identity: String,
    pub artifact: String,
    pub matches: bool,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current_time: Option<String>,
    /// Live traits (`face`, `bio-info`, `finger`) and who actually presents them.
    #[serde(default)]
    pub traits: BTreeMap<String, String>,
    #[serde(default)]
    pub document_facts: BTreeMap<String, DocumentFact>,
    #[serde(default)]
    pub bookings: BTreeMap<String, String>,
    #[serde(default)]
    pub gate_assignment: Vec<GateAssignment>,
    #[serde(default)]
    pub db_records: BTreeMap<String, DbRecord>,
    #[serde(default)]
    pub secrets: Vec<Secret>,
    #[serde(default)]
    pub biometric_match_truth: Vec<BiometricTruth>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("incomplete scenario: missing {0}")]
pub struct MissingFact(pub String);

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Value {
    Identity(String),
    Flight(String),
    Number(String),
    Document(String),
    Record { passenger: String, flight: String },
    Symbol(Term),
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Identity(x) => write!(f, "identity {x}"),
            Value::Flight(x) => write!(f, "flight {x}"),
            Value::Number(x) => write!(f, "number {x}"),
            Value::Document(x) => write!(f, "document {x}"),
            Value::Record { passenger, flight } => write!(f, "record ({passenger}, {flight})"),
            Value::Symbol(t) => write!(f, "{t}"),
        }
    }
}

pub fn is_tainted(t: &Term) -> bool {
    let mut tainted = false;
    t.visit(&mut |s| {
        if let Term::Atom(a) = s {
            if a.ends_with(SLIP_MARKER) || a.ends_with(FORGED_MARKER) {
                tainted = true;
            }
        }
    });
    tainted
}

impl Scenario {
    pub fn from_json(text: &str) -> Result<Scenario, serde_json::Error> {
        serde_json::from_str(text)
    }

    pub fn gate_flight(&self, gate: &str, time: &str) -> Option<&str> {
        self.gate_assignment
            .iter()
            .find(|g| g.gate == gate && g.time == time)
            .map(|g| g.flight.as_str())
    }

    pub fn biometric_truth(&self, identity: &str, artifact: &str) -> Option<bool> {
        self.biometric_match_truth
            .iter()
            .find(|b| b.identity == identity && b.artifact == artifact)
            .map(|b| b.matches)
    }

    /// Secrets held by a role, as terms with role references resolved.
    pub fn secrets_of<'a>(
        &'a self,
        role: &'a RoleId,
        is_role: &'a dyn Fn(&str) -> bool,
    ) -> impl Iterator<Item = (&'a str, Term)> + 'a {
        self.secrets
            .iter()
            .filter(move |s| &s.role == role)
            .map(move |s| {
                let t = crate::dsl::parse_term(&s.value)
                    .map(|t| t.resolve_roles(is_role))
                    .unwrap_or_else(|_| Term::atom(s.value.clone()));
                (s.name.as_str(), t)
            })
    }

    /// Value of a named secret, whichever role holds it.
    pub fn secret_value(&self, name: &str, is_role: &dyn Fn(&str) -> bool) -> Option<Term> {
        self.secrets.iter().find(|s| s.name == name).map(|s| {
            crate::dsl::parse_term(&s.value)
                .map(|t| t.resolve_roles(is_role))
                .unwrap_or_else(|_| Term::atom(s.value.clone()))
        })
    }

    /// Replace atoms naming a secret by the secret's value.
    pub fn instantiate(&self, t: &Term, is_role: &dyn Fn(&str) -> bool) -> Term {
        match t {
            Term::Atom(name) => self
                .secret_value(name, is_role)
                .unwrap_or_else(|| t.clone()),
            Term::App { func, args } => Term::app(
                func.clone(),
                args.iter().map(|a| self.instantiate(a, is_role)).collect(),
            ),
            _ => t.clone(),
        }
    }

    /// Every document atom a ceremony validates must have facts.
    pub fn check_total(&self, c: &crate::model::Ceremony) -> Result<(), MissingFact> {
        let vars: BTreeSet<&str> = c
            .script
            .iter()
            .filter_map(|e| e.as_activity()?.set.as_ref().map(|b| b.var.as_str()))
            .chain(self.secrets.iter().map(|s| s.name.as_str()))
            .collect();
        for e in &c.script {
            if let Some(a) = e.as_activity() {
                if a.kind == crate::model::ActivityKind::Validate {
                    if let Some(Term::Atom(d)) = a.args.first() {
                        if !vars.contains(d.as_str()) && !self.document_facts.contains_key(d) {
                            return Err(MissingFact(format!("document_facts[{d}]")));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

/// The scenario as seen during one run, with forged artifacts overriding
/// their genuineness.
pub struct World<'a> {
    pub scenario: &'a Scenario,
    pub forged: &'a BTreeSet<String>,
}

impl<'a> World<'a> {
    pub fn new(scenario: &'a Scenario, forged: &'a BTreeSet<String>) -> Self {
        World { scenario, forged }
    }

    fn time(&self) -> Result<&'a str, MissingFact> {
        self.scenario
            .current_time
            .as_deref()
            .ok_or_else(|| MissingFact("current_time".into()))
    }

    fn doc(&self, d: &str) -> Result<&'a DocumentFact, MissingFact> {
        self.scenario
            .document_facts
            .get(d)
            .ok_or_else(|| MissingFact(format!("document_facts[{d}]")))
    }

    /// Genuine, valid and not forged in this run.
    pub fn is_genuine(&self, d: &str) -> Result<bool, MissingFact> {
        let fact = self.doc(d)?;
        Ok(fact.genuine && fact.valid && !self.forged.contains(d))
    }

    fn lookup(&self, key: &Value, whole: &Term) -> Result<Value, MissingFact> {
        let k = match key {
            Value::Number(n) | Value::Identity(n) => n,
            _ => return Ok(Value::Symbol(whole.clone())),
        };
        // No record is an answer, not a gap in the scenario.
        Ok(match self.scenario.db_records.get(k) {
            Some(r) => Value::Record {
                passenger: r.passenger.clone(),
                flight: r.flight.clone(),
            },
            None => Value::Symbol(whole.clone()),
        })
    }

    pub fn eval(&self, t: &Term) -> Result<Value, MissingFact> {
        if is_tainted(t) {
            return Ok(Value::Symbol(t.clone()));
        }
        let symbol = || Ok(Value::Symbol(t.clone()));
        match t {
            Term::Atom(a) => {
                if a == "current_time" {
                    return Ok(Value::Symbol(Term::atom(self.time()?)));
                }
                if self.scenario.document_facts.contains_key(a) {
                    return Ok(Value::Document(a.clone()));
                }
                if let Some(who) = self.scenario.traits.get(a) {
                    return Ok(Value::Identity(who.clone()));
                }
                symbol()
            }
            Term::App { func, args } => match (func.as_str(), args.as_slice()) {
                ("scan" | "code", [x]) => self.eval(x),
                ("photo" | "name" | "bio_info" | "owner", [x]) => Ok(match self.eval(x)? {
                    Value::Document(d) => Value::Identity(self.doc(&d)?.owner.clone()),
                    Value::Record { passenger, .. } => Value::Identity(passenger),
                    v @ Value::Identity(_) => v,
                    _ => Value::Symbol(t.clone()),
                }),
                ("number", [x]) => Ok(match self.eval(x)? {
                    Value::Document(d) => Value::Number(self.doc(&d)?.number.clone().unwrap_or(d)),
                    _ => Value::Symbol(t.clone()),
                }),
                ("flight_number", [x]) => match self.eval(x)? {
                    Value::Document(d) => self
                        .doc(&d)?
                        .flight
                        .clone()
                        .map(Value::Flight)
                        .ok_or_else(|| MissingFact(format!("document_facts[{d}].flight"))),
                    Value::Record { flight, .. } => Ok(Value::Flight(flight)),
                    _ => symbol(),
                },
                ("flight_number", [Term::Role(gate), time]) => {
                    let time = match self.eval(time)? {
                        Value::Symbol(Term::Atom(t)) => t,
                        _ => return symbol(),
                    };
                    self.scenario
                        .gate_flight(gate.as_str(), &time)
                        .map(|f| Value::Flight(f.to_string()))
                        .ok_or_else(|| MissingFact(format!("gate_assignment[{gate}@{time}]")))
                }
                ("flight&passenger", [key, ..]) => {
                    let key = self.eval(key)?;
                    self.lookup(&key, t)
                }
                ("details", [x]) => match self.eval(x)? {
                    Value::Document(d) => {
                        let fact = self.doc(&d)?;
                        let flight = fact
                            .flight
                            .clone()
                            .ok_or_else(|| MissingFact(format!("document_facts[{d}].flight")))?;
                        Ok(Value::Record {
                            passenger: fact.owner.clone(),
                            flight,
                        })
                    }
                    v @ Value::Record { .. } => Ok(v),
                    _ => symbol(),
                },
                _ => symbol(),
            },
            Term::Role(_) | Term::Hidden { .. } => symbol(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse_term;

    fn boarding() -> Scenario {
        serde_json::from_str(
            r#"{
              "name": "t",
              "current_time": "t0",
              "traits": {"face": "alice"},
              "document_facts": {
                "id": {"owner": "alice", "genuine": true, "valid": true},
                "bp": {"owner": "alice", "genuine": true, "valid": true, "flight": "F1", "number": "BP-1"}
              },
              "bookings": {"alice": "F1"},
              "gate_assignment": [{"gate": "G", "time": "t0", "flight": "F2"}],
              "db_records": {"BP-1": {"passenger": "alice", "flight": "F1"}}
            }"#,
        )
        .unwrap()
    }

    fn eval(s: &Scenario, src: &str) -> Result<Value, MissingFact> {
        let t = parse_term(src).unwrap().resolve_roles(&|r| r == "G");
        World::new(s, &BTreeSet::new()).eval(&t)
    }

    #[test]
    fn accessors_follow_document_facts() {
        let s = boarding();
        assert_eq!(eval(&s, "face"), eval(&s, "photo(id)"));
        assert_eq!(
            eval(&s, "flight_number(bp)"),
            Ok(Value::Flight("F1".into()))
        );
        assert_eq!(
            eval(&s, "flight_number(G, current_time)"),
            Ok(Value::Flight("F2".into()))
        );
        assert_eq!(
            eval(&s, "details(bp)"),
            eval(&s, "details(flight&passenger(number(bp)))")
        );
        assert_eq!(
            eval(&s, "code(number(bp))"),
            Ok(Value::Number("BP-1".into()))
        );
    }

    #[test]
    fn tainted_terms_are_unknown() {
        let s = boarding();
        let t = parse_term("flight&passenger(number(bp))")
            .unwrap()
            .mark_leaves(SLIP_MARKER);
        let v = World::new(&s, &BTreeSet::new()).eval(&t).unwrap();
        assert_eq!(v, Value::Symbol(t));
    }

    #[test]
    fn missing_facts_are_named() {
        let mut s = boarding();
        s.gate_assignment.clear();
        assert_eq!(
            eval(&s, "flight_number(G, current_time)"),
            Err(MissingFact("gate_assignment[G@t0]".into()))
        );
    }

    #[test]
    fn forgery_overrides_genuineness() {
        let s = boarding();
        let forged: BTreeSet<String> = ["bp".to_string()].into();
        assert!(World::new(&s, &BTreeSet::new()).is_genuine("bp").unwrap());
        assert!(!World::new(&s, &forged).is_genuine("bp").unwrap());
    }
}
