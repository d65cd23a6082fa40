use serde::{Deserialize, Serialize};

use super::{Capability, EngineError, EventKind, Trace};
use crate::scenario::{MissingFact, Scenario, Value, World};
use crate::term::{RoleId, Term};

/// Terminal state that marks the goal as reached: `role.var = value`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuccessState {
    pub role: RoleId,
    pub var: String,
    pub value: Term,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum GoalKind {
    Authentication {
        subject: RoleId,
        verifier: RoleId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        binding: Option<Term>,
        success: SuccessState,
        #[serde(default)]
        requires: Vec<Term>,
    },
    Authorization {
        subject: RoleId,
        verifier: RoleId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        resource: Option<Term>,
        success: SuccessState,
        #[serde(default)]
        requires: Vec<Term>,
    },
    Secrecy {
        term: Term,
        allowed: Vec<RoleId>,
    },
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Goal {
    pub name: String,
    #[serde(flatten)]
    pub kind: GoalKind,
}

/// Contents of a corpus entry's `goals.json`.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoalSet {
    pub goals: Vec<Goal>,
    #[serde(default)]
    pub capability_pool: Vec<Capability>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GoalStatus {
    Satisfied,
    Violated,
    NotApplicable,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Verdict {
    pub goal: String,
    pub status: GoalStatus,
    pub witness: String,
    /// Short canonical statement of what failed; equal conditions mean the
    /// same violation reached by different runs.
    #[serde(skip)]
    pub condition: String,
}

fn source(t: &Term) -> String {
    crate::dsl::term_source(t, &|_| false)
}

struct Failure {
    condition: String,
    explanation: String,
}

fn predicate(trace: &Trace, world: &World, p: &Term) -> Result<Option<Failure>, PredicateError> {
    let fail = |explanation: String| {
        Ok(Some(Failure {
            condition: source(p),
            explanation,
        }))
    };
    let Term::App { func, args } = p else {
        return Err(PredicateError::Unknown(source(p)));
    };
    match (func.as_str(), args.as_slice()) {
        ("genuine", [d]) => match world.eval(d)? {
            Value::Document(name) => {
                if world.is_genuine(&name)? {
                    Ok(None)
                } else if trace.forged.contains(&name) {
                    fail(format!("{name} was forged by the attacker"))
                } else {
                    fail(format!("{name} is not a genuine, valid document"))
                }
            }
            v => fail(format!("{} is {v}, not a document", source(d))),
        },
        ("same", [a, b]) => {
            let (va, vb) = (world.eval(a)?, world.eval(b)?);
            if va == vb {
                Ok(None)
            } else {
                fail(format!("{} is {va} but {} is {vb}", source(a), source(b)))
            }
        }
        ("booked", [who, flight]) => {
            let (vw, vf) = (world.eval(who)?, world.eval(flight)?);
            let Value::Identity(person) = &vw else {
                return fail(format!("{} is {vw}, not a person", source(who)));
            };
            let booked = world.scenario.bookings.get(person);
            match (&vf, booked) {
                (Value::Flight(f), Some(b)) if f == b => Ok(None),
                (_, Some(b)) => fail(format!(
                    "{person} is booked on {b} but {} is {vf}",
                    source(flight)
                )),
                (_, None) => fail(format!("{person} holds no booking")),
            }
        }
        ("received", [Term::Role(r), t]) => {
            let got = trace.events.iter().any(|e| {
                e.kind == EventKind::Delivered
                    && e.actor == r.as_str()
                    && e.payload.iter().any(|x| x.contains(t))
            });
            if got {
                Ok(None)
            } else {
                fail(format!("{r} never received {}", source(t)))
            }
        }
        _ => Err(PredicateError::Unknown(source(p))),
    }
}

enum PredicateError {
    Unknown(String),
    Missing(MissingFact),
}

impl From<MissingFact> for PredicateError {
    fn from(m: MissingFact) -> Self {
        PredicateError::Missing(m)
    }
}

/// Verdict of one goal on a finished run.
pub fn check_goal(trace: &Trace, scenario: &Scenario, goal: &Goal) -> Result<Verdict, EngineError> {
    let bad = |reason: String| EngineError::BadGoal {
        goal: goal.name.clone(),
        reason,
    };
    let is_role = |s: &str| trace.is_role(s);
    let verdict = |status, witness: String, condition: String| Verdict {
        goal: goal.name.clone(),
        status,
        witness,
        condition,
    };
    for r in goal_roles(goal) {
        if !trace.is_role(r.as_str()) {
            return Err(bad(format!("unknown role {r}")));
        }
    }
    match &goal.kind {
        GoalKind::Authentication {
            success, requires, ..
        }
        | GoalKind::Authorization {
            success, requires, ..
        } => {
            let want = success.value.resolve_roles(&is_role);
            let state = format!("{}.{} = {}", success.role, success.var, source(&want));
            match trace.binding(&success.role, &success.var) {
                Some(v) if *v == want => {}
                Some(v) => {
                    let w = format!(
                        "{state} not reached ({}.{} = {})",
                        success.role,
                        success.var,
                        source(v)
                    );
                    return Ok(verdict(GoalStatus::NotApplicable, w, String::new()));
                }
                None => {
                    let w = format!("{state} not reached");
                    return Ok(verdict(GoalStatus::NotApplicable, w, String::new()));
                }
            }
            let at = trace
                .events
                .iter()
                .rev()
                .find(|e| {
                    e.kind == EventKind::Verdict
                        && e.actor == success.role.as_str()
                        && e.payload.first().and_then(Term::as_atom) == Some(success.var.as_str())
                })
                .map(|e| e.i);
            let world = World::new(scenario, &trace.forged);
            let mut failures = Vec::new();
            for p in requires {
                let p = scenario.instantiate(&p.resolve_roles(&is_role), &is_role);
                match predicate(trace, &world, &p) {
                    Ok(None) => {}
                    Ok(Some(f)) => failures.push(f),
                    Err(PredicateError::Unknown(p)) => {
                        return Err(bad(format!("unknown predicate {p}")))
                    }
                    Err(PredicateError::Missing(m)) => return Err(m.into()),
                }
            }
            if failures.is_empty() {
                return Ok(verdict(
                    GoalStatus::Satisfied,
                    format!("{state} with all requirements met"),
                    String::new(),
                ));
            }
            let at = at.map(|i| format!(" at event #{i}")).unwrap_or_default();
            let witness = format!(
                "{state}{at} although {}",
                failures
                    .iter()
                    .map(|f| format!("{} fails: {}", f.condition, f.explanation))
                    .collect::<Vec<_>>()
                    .join("; ")
            );
            let condition = failures
                .iter()
                .map(|f| f.condition.as_str())
                .collect::<Vec<_>>()
                .join(" & ");
            Ok(verdict(GoalStatus::Violated, witness, condition))
        }
        GoalKind::Secrecy { term, allowed } => {
            let term = scenario.instantiate(&term.resolve_roles(&is_role), &is_role);
            let shown = source(&term);
            if trace.attacker_knowledge.iter().any(|k| k.contains(&term)) {
                let at = trace
                    .events
                    .iter()
                    .find(|e| {
                        e.kind == EventKind::Intercepted
                            && e.payload.iter().any(|x| x.contains(&term))
                    })
                    .map(|e| format!(" at event #{}", e.i))
                    .unwrap_or_default();
                return Ok(verdict(
                    GoalStatus::Violated,
                    format!("attacker learned {shown}{at}"),
                    "attacker".into(),
                ));
            }
            let leak = trace.events.iter().find(|e| {
                e.kind == EventKind::Delivered
                    && !allowed.iter().any(|r| r.as_str() == e.actor)
                    && e.payload.iter().any(|x| x.contains(&term))
            });
            Ok(match leak {
                Some(e) => verdict(
                    GoalStatus::Violated,
                    format!("{shown} delivered to {} at event #{}", e.actor, e.i),
                    format!("delivered to {}", e.actor),
                ),
                None => verdict(
                    GoalStatus::Satisfied,
                    format!("{shown} stayed within {}", join_roles(allowed)),
                    String::new(),
                ),
            })
        }
    }
}

fn join_roles(rs: &[RoleId]) -> String {
    rs.iter().map(RoleId::as_str).collect::<Vec<_>>().join(", ")
}

fn goal_roles(goal: &Goal) -> Vec<&RoleId> {
    match &goal.kind {
        GoalKind::Authentication {
            subject,
            verifier,
            success,
            ..
        }
        | GoalKind::Authorization {
            subject,
            verifier,
            success,
            ..
        } => {
            vec![subject, verifier, &success.role]
        }
        GoalKind::Secrecy { allowed, .. } => allowed.iter().collect(),
    }
}
