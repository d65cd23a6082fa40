//! Ceremony object model: roles, channels, steps, activities, decision points
//! and artifacts, together with structural validation and per-role burden.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::term::{RoleId, Term};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoleKind {
    Human,
    Technical,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Role {
    pub id: RoleId,
    pub kind: RoleKind,
    pub display_name: String,
}

impl Role {
    pub fn is_human(&self) -> bool {
        self.kind == RoleKind::Human
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Medium {
    Network,
    Visual,
    Optical,
    FaceToFace,
}

impl Medium {
    pub const ALL: [Medium; 4] = [
        Medium::Network,
        Medium::Visual,
        Medium::Optical,
        Medium::FaceToFace,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            Medium::Network => "network",
            Medium::Visual => "visual",
            Medium::Optical => "optical",
            Medium::FaceToFace => "face_to_face",
        }
    }

    pub fn from_keyword(s: &str) -> Option<Medium> {
        Medium::ALL.into_iter().find(|m| m.keyword() == s)
    }

    /// Media that only make sense with a human at one end. A camera can
    /// read a screen unattended, so optical links between devices are fine.
    pub fn needs_human(self) -> bool {
        matches!(self, Medium::Visual | Medium::FaceToFace)
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Channel {
    pub id: String,
    pub endpoints: (RoleId, RoleId),
    pub medium: Medium,
    pub confidential: bool,
    pub authenticated: bool,
}

impl Channel {
    pub fn connects(&self, a: &RoleId, b: &RoleId) -> bool {
        (&self.endpoints.0 == a && &self.endpoints.1 == b)
            || (&self.endpoints.0 == b && &self.endpoints.1 == a)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ActivityKind {
    Validate,
    Match,
    Scan,
    ScanFrom,
    Display,
    Set,
    Query,
    Store,
    Issue,
    Recognise,
    Open,
    Enjoy,
    Begin,
    End,
}

impl ActivityKind {
    pub const ALL: [ActivityKind; 14] = [
        ActivityKind::Validate,
        ActivityKind::Match,
        ActivityKind::Scan,
        ActivityKind::ScanFrom,
        ActivityKind::Display,
        ActivityKind::Set,
        ActivityKind::Query,
        ActivityKind::Store,
        ActivityKind::Issue,
        ActivityKind::Recognise,
        ActivityKind::Open,
        ActivityKind::Enjoy,
        ActivityKind::Begin,
        ActivityKind::End,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            ActivityKind::Validate => "VALIDATE",
            ActivityKind::Match => "MATCH",
            ActivityKind::Scan => "SCAN",
            ActivityKind::ScanFrom => "SCAN_FROM",
            ActivityKind::Display => "DISPLAY",
            ActivityKind::Set => "SET",
            ActivityKind::Query => "QUERY",
            ActivityKind::Store => "STORE",
            ActivityKind::Issue => "ISSUE",
            ActivityKind::Recognise => "RECOGNISE",
            ActivityKind::Open => "OPEN",
            ActivityKind::Enjoy => "ENJOY",
            ActivityKind::Begin => "BEGIN",
            ActivityKind::End => "END",
        }
    }

    pub fn from_keyword(s: &str) -> Option<ActivityKind> {
        ActivityKind::ALL.into_iter().find(|k| k.keyword() == s)
    }

    /// VALIDATE, MATCH and RECOGNISE gate a verdict.
    pub fn is_check(self) -> bool {
        matches!(
            self,
            ActivityKind::Validate | ActivityKind::Match | ActivityKind::Recognise
        )
    }

    /// Lifecycle markers with no security semantics.
    pub fn is_marker(self) -> bool {
        matches!(
            self,
            ActivityKind::Begin | ActivityKind::End | ActivityKind::Enjoy | ActivityKind::Open
        )
    }
}

impl fmt::Display for ActivityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Condition {
    /// `success(label)`: every check recorded so far succeeded or was skipped.
    Success(String),
    /// `a = b`, compared structurally after substituting the actor's variables.
    Equals(Term, Term),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SetRule {
    Assign(Term),
    Conditional {
        condition: Condition,
        then: Term,
        otherwise: Term,
    },
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SetBinding {
    pub var: String,
    pub rule: SetRule,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Activity {
    pub actor: RoleId,
    pub kind: ActivityKind,
    pub args: Vec<Term>,
    pub is_check: bool,
    pub set: Option<SetBinding>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    Message,
    MetaActivity,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Step {
    pub index: u32,
    pub sender: RoleId,
    pub receiver: RoleId,
    pub channel: String,
    pub payload: Vec<Term>,
    /// Meta-activity dictated by a human, e.g. `H_SCAN`.
    pub dictated: Option<String>,
}

impl Step {
    pub fn kind(&self) -> StepKind {
        if self.dictated.is_some() {
            StepKind::MetaActivity
        } else {
            StepKind::Message
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Element {
    Step(Step),
    Activity(Activity),
}

impl Element {
    /// Roles that take part in this element.
    pub fn participants(&self) -> Vec<&RoleId> {
        match self {
            Element::Step(s) => vec![&s.sender, &s.receiver],
            Element::Activity(a) => vec![&a.actor],
        }
    }

    pub fn involves(&self, role: &RoleId) -> bool {
        self.participants().contains(&role)
    }

    pub fn terms(&self) -> Vec<&Term> {
        match self {
            Element::Step(s) => s.payload.iter().collect(),
            Element::Activity(a) => {
                let mut out: Vec<&Term> = a.args.iter().collect();
                if let Some(b) = &a.set {
                    match &b.rule {
                        SetRule::Assign(t) => out.push(t),
                        SetRule::Conditional {
                            condition,
                            then,
                            otherwise,
                        } => {
                            if let Condition::Equals(l, r) = condition {
                                out.push(l);
                                out.push(r);
                            }
                            out.push(then);
                            out.push(otherwise);
                        }
                    }
                }
                out
            }
        }
    }

    pub fn as_step(&self) -> Option<&Step> {
        match self {
            Element::Step(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_activity(&self) -> Option<&Activity> {
        match self {
            Element::Activity(a) => Some(a),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecisionClass {
    InitiateAbort,
    Free,
    Constrained,
    Forced,
}

impl DecisionClass {
    pub const ALL: [DecisionClass; 4] = [
        DecisionClass::InitiateAbort,
        DecisionClass::Free,
        DecisionClass::Constrained,
        DecisionClass::Forced,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            DecisionClass::InitiateAbort => "initiate_abort",
            DecisionClass::Free => "free",
            DecisionClass::Constrained => "constrained",
            DecisionClass::Forced => "forced",
        }
    }

    pub fn from_keyword(s: &str) -> Option<DecisionClass> {
        DecisionClass::ALL.into_iter().find(|c| c.keyword() == s)
    }
}

/// Where a decision point sits: a numbered step or the n-th `do` block (1-based).
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum ElementRef {
    Step(u32),
    Activity(u32),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DecisionPoint {
    pub role: RoleId,
    pub at: ElementRef,
    pub class: DecisionClass,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Artifact {
    pub role: RoleId,
    pub name: String,
    pub security_exclusive: bool,
    pub forgeable: bool,
    /// Character length, for secrets a human has to transcribe.
    pub length: Option<u32>,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Ceremony {
    pub name: String,
    pub roles: Vec<Role>,
    pub channels: Vec<Channel>,
    pub script: Vec<Element>,
    pub decisions: Vec<DecisionPoint>,
    pub artifacts: Vec<Artifact>,
}

/// Where a structural finding was detected.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Site {
    Ceremony,
    Role(usize),
    Channel(usize),
    Element(usize),
    Decision(usize),
    Artifact(usize),
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Finding {
    pub site: Site,
    pub message: String,
}

impl fmt::Display for Finding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq, Eq)]
pub enum ModelError {
    #[error("no such role {0}")]
    NoSuchRole(RoleId),
    #[error("role {0} is technical; only human roles are scored")]
    TechnicalRole(RoleId),
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Burden {
    pub check_count: usize,
    pub security_exclusive_actions: usize,
    pub artifacts_carried: usize,
    pub empty_role: bool,
    /// Characters of security-exclusive artifacts the role must transcribe.
    pub transcribed_chars: u32,
}

impl Burden {
    pub fn total(&self) -> usize {
        self.check_count + self.security_exclusive_actions + self.artifacts_carried
    }
}

/// Actor name used for the network attacker in traces.
pub const ATTACKER: &str = "attacker";

pub type DecisionProfile = BTreeMap<DecisionClass, usize>;

impl Ceremony {
    pub fn role(&self, id: &RoleId) -> Option<&Role> {
        self.roles.iter().find(|r| &r.id == id)
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.iter().find(|c| c.id == id)
    }

    pub fn is_human(&self, id: &RoleId) -> bool {
        self.role(id).map(Role::is_human).unwrap_or(false)
    }

    pub fn human_roles(&self) -> impl Iterator<Item = &Role> {
        self.roles.iter().filter(|r| r.is_human())
    }

    pub fn steps(&self) -> impl Iterator<Item = &Step> {
        self.script.iter().filter_map(Element::as_step)
    }

    pub fn step_count(&self) -> usize {
        self.steps().count()
    }

    /// Script position of a decision point reference.
    pub fn resolve(&self, at: ElementRef) -> Option<usize> {
        match at {
            ElementRef::Step(n) => self
                .script
                .iter()
                .position(|e| matches!(e, Element::Step(s) if s.index == n)),
            ElementRef::Activity(n) => self
                .script
                .iter()
                .enumerate()
                .filter(|(_, e)| matches!(e, Element::Activity(_)))
                .nth((n as usize).checked_sub(1)?)
                .map(|(i, _)| i),
        }
    }

    /// Inverse of [`Ceremony::resolve`].
    pub fn element_ref(&self, position: usize) -> Option<ElementRef> {
        match self.script.get(position)? {
            Element::Step(s) => Some(ElementRef::Step(s.index)),
            Element::Activity(_) => {
                let n = self.script[..=position]
                    .iter()
                    .filter(|e| matches!(e, Element::Activity(_)))
                    .count();
                Some(ElementRef::Activity(n as u32))
            }
        }
    }

    pub fn secret_artifacts(&self) -> impl Iterator<Item = &Artifact> {
        self.artifacts.iter().filter(|a| a.security_exclusive)
    }

    fn require_role(&self, r: &RoleId) -> Result<&Role, ModelError> {
        self.role(r)
            .ok_or_else(|| ModelError::NoSuchRole(r.clone()))
    }

    /// Security burden a role carries in this ceremony.
    pub fn role_burden(&self, r: &RoleId) -> Result<Burden, ModelError> {
        self.require_role(r)?;
        let secret_terms: Vec<(Term, &Artifact)> = self
            .secret_artifacts()
            .filter_map(|a| crate::dsl::parse_term(&a.name).ok().map(|t| (t, a)))
            .map(|(t, a)| {
                (
                    t.resolve_roles(&|s| self.role(&RoleId::new(s)).is_some()),
                    a,
                )
            })
            .collect();
        let mentions_secret = |e: &Element| {
            e.terms()
                .iter()
                .any(|t| secret_terms.iter().any(|(s, _)| t.contains(s)))
        };

        let mut burden = Burden::default();
        let mut involved = false;
        for e in &self.script {
            if !e.involves(r) {
                continue;
            }
            involved = true;
            match e {
                Element::Activity(a) if a.is_check => burden.check_count += 1,
                Element::Activity(a) if !a.kind.is_marker() => {
                    if mentions_secret(e) {
                        burden.security_exclusive_actions += 1;
                    }
                }
                Element::Step(s) if &s.sender == r => {
                    if mentions_secret(e) {
                        burden.security_exclusive_actions += 1;
                    }
                    for (t, a) in &secret_terms {
                        if s.payload.iter().any(|p| p.contains(t)) {
                            burden.transcribed_chars += a.length.unwrap_or(0);
                        }
                    }
                }
                _ => {}
            }
        }
        burden.empty_role = !involved;
        burden.artifacts_carried = self.secret_artifacts().filter(|a| &a.role == r).count();
        Ok(burden)
    }

    /// Tally of the role's decision-point classifications.
    pub fn decision_profile(&self, r: &RoleId) -> Result<DecisionProfile, ModelError> {
        self.require_role(r)?;
        let mut profile = DecisionProfile::new();
        for d in self.decisions.iter().filter(|d| &d.role == r) {
            *profile.entry(d.class).or_default() += 1;
        }
        Ok(profile)
    }

    /// Checks every structural invariant; an empty result means well-formed.
    pub fn validate(&self) -> Vec<Finding> {
        validate_ceremony(self)
    }
}

/// Returns every violated structural invariant of `c`.
pub fn validate_ceremony(c: &Ceremony) -> Vec<Finding> {
    let mut out = Vec::new();
    let mut push = |site: Site, message: String| out.push(Finding { site, message });

    if c.name.trim().is_empty() {
        push(Site::Ceremony, "ceremony name is empty".into());
    }

    let mut seen = BTreeSet::new();
    for (i, r) in c.roles.iter().enumerate() {
        if !seen.insert(&r.id) {
            push(Site::Role(i), format!("duplicate role {}", r.id));
        }
        if r.id.as_str() == ATTACKER {
            push(Site::Role(i), format!("role id {ATTACKER} is reserved"));
        }
    }
    let known = |r: &RoleId| c.role(r).is_some();

    let mut seen = BTreeSet::new();
    for (i, ch) in c.channels.iter().enumerate() {
        if !seen.insert(&ch.id) {
            push(Site::Channel(i), format!("duplicate channel {}", ch.id));
        }
        for end in [&ch.endpoints.0, &ch.endpoints.1] {
            if !known(end) {
                push(
                    Site::Channel(i),
                    format!("unknown role {end} in channel {}", ch.id),
                );
            }
        }
        if ch.endpoints.0 == ch.endpoints.1 {
            push(
                Site::Channel(i),
                format!("channel {} connects {} to itself", ch.id, ch.endpoints.0),
            );
        }
        if ch.medium.needs_human()
            && known(&ch.endpoints.0)
            && known(&ch.endpoints.1)
            && !c.is_human(&ch.endpoints.0)
            && !c.is_human(&ch.endpoints.1)
        {
            push(
                Site::Channel(i),
                format!(
                    "{} channel {} has no human endpoint",
                    ch.medium.keyword(),
                    ch.id
                ),
            );
        }
    }

    let mut expected_index = 1u32;
    for (i, e) in c.script.iter().enumerate() {
        let site = Site::Element(i);
        match e {
            Element::Step(s) => {
                if s.index != expected_index {
                    push(site, format!("non-contiguous step index {}", s.index));
                }
                expected_index = s.index.saturating_add(1);
                for r in [&s.sender, &s.receiver] {
                    if !known(r) {
                        push(site, format!("unknown role {r} at step {}", s.index));
                    }
                }
                if s.sender == s.receiver {
                    push(
                        site,
                        format!("step {} sends from {} to itself", s.index, s.sender),
                    );
                }
                match c.channel(&s.channel) {
                    None => push(
                        site,
                        format!("unknown channel {} at step {}", s.channel, s.index),
                    ),
                    Some(ch) => {
                        if !ch.connects(&s.sender, &s.receiver) {
                            push(
                                site,
                                format!(
                                    "step {}: {} and {} are not the endpoints of channel {}",
                                    s.index, s.sender, s.receiver, ch.id
                                ),
                            );
                        }
                    }
                }
                if s.payload.is_empty() {
                    push(site, format!("step {} has an empty payload", s.index));
                }
                if let Some(meta) = &s.dictated {
                    if known(&s.sender) && !c.is_human(&s.sender) {
                        push(
                            site,
                            format!(
                                "step {}: {meta} dictated by non-human {}",
                                s.index, s.sender
                            ),
                        );
                    }
                }
            }
            Element::Activity(a) => {
                let at = format!("{} of {}", a.kind, a.actor);
                if !known(&a.actor) {
                    push(site, format!("unknown role {} in {at}", a.actor));
                }
                if a.is_check != a.kind.is_check() {
                    push(site, format!("check flag inconsistent with {at}"));
                }
                match a.kind {
                    ActivityKind::Match if a.args.len() != 2 => push(
                        site,
                        format!("{at} takes exactly 2 arguments, found {}", a.args.len()),
                    ),
                    ActivityKind::Validate if a.args.len() != 1 => push(
                        site,
                        format!("{at} takes exactly 1 argument, found {}", a.args.len()),
                    ),
                    _ => {}
                }
                match (&a.set, a.kind) {
                    (None, ActivityKind::Set) => push(site, format!("{at} binds no variable")),
                    (Some(_), k) if k != ActivityKind::Set => {
                        push(site, format!("{at} cannot bind a variable"))
                    }
                    (Some(b), _) if b.var.is_empty() => {
                        push(site, format!("{at} binds an empty name"))
                    }
                    _ => {}
                }
            }
        }
        for t in e.terms() {
            let mut bad = None;
            t.visit(&mut |sub| {
                if let Term::Role(r) = sub {
                    if !known(r) && bad.is_none() {
                        bad = Some(format!("unknown role {r} in term"));
                    }
                }
            });
            if let Some(m) = bad {
                push(site, m);
            }
        }
    }

    for (i, d) in c.decisions.iter().enumerate() {
        let site = Site::Decision(i);
        let Some(role) = c.role(&d.role) else {
            push(site, format!("unknown role {} in decision point", d.role));
            continue;
        };
        match c.resolve(d.at) {
            None => push(
                site,
                format!("decision point of {} references missing {:?}", d.role, d.at),
            ),
            Some(pos) if !c.script[pos].involves(&d.role) => push(
                site,
                format!(
                    "decision point of {} at {:?} does not involve it",
                    d.role, d.at
                ),
            ),
            _ => {}
        }
        if !role.is_human() && matches!(d.class, DecisionClass::Free | DecisionClass::Constrained) {
            push(
                site,
                format!(
                    "technical role {} cannot make {} choices",
                    d.role,
                    d.class.keyword()
                ),
            );
        }
    }

    let mut seen = BTreeSet::new();
    for (i, a) in c.artifacts.iter().enumerate() {
        if !known(&a.role) {
            push(
                Site::Artifact(i),
                format!("unknown role {} for artifact {}", a.role, a.name),
            );
        }
        if !seen.insert((&a.role, &a.name)) {
            push(
                Site::Artifact(i),
                format!("duplicate artifact {} of {}", a.name, a.role),
            );
        }
    }

    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    const TINY: &str = r#"
ceremony "tiny" {
  role H human "human";
  role S technical "server";
  channel net network confidential authenticated between H S;
  step 1: H -> S over net: hello;
  do S: VALIDATE hello check;
  step 2: S -> H over net: ok;
  decision H at 1 initiate_abort;
  decision H at 1 free;
}
"#;

    #[test]
    fn empty_role_and_profile() {
        let c = parse(TINY).unwrap();
        let b = c.role_burden(&"S".into()).unwrap();
        assert_eq!(b.check_count, 1);
        assert!(!b.empty_role);
        let p = c.decision_profile(&"H".into()).unwrap();
        assert_eq!(p.get(&DecisionClass::Free), Some(&1));
        assert_eq!(p.get(&DecisionClass::InitiateAbort), Some(&1));
        assert_eq!(
            c.role_burden(&"X".into()),
            Err(ModelError::NoSuchRole("X".into()))
        );
    }

    #[test]
    fn undeclared_role_is_reported() {
        let mut c = parse(TINY).unwrap();
        if let Element::Step(s) = &mut c.script[2] {
            s.sender = RoleId::new("X");
        }
        let f = validate_ceremony(&c);
        assert!(
            f.iter().any(|f| f.message == "unknown role X at step 2"),
            "{f:?}"
        );
    }

    #[test]
    fn non_contiguous_steps_are_reported() {
        let mut c = parse(TINY).unwrap();
        if let Element::Step(s) = &mut c.script[2] {
            s.index = 4;
        }
        let f = validate_ceremony(&c);
        assert!(
            f.iter().any(|f| f.message == "non-contiguous step index 4"),
            "{f:?}"
        );
    }

    #[test]
    fn technical_roles_cannot_choose() {
        let mut c = parse(TINY).unwrap();
        c.decisions.push(DecisionPoint {
            role: "S".into(),
            at: ElementRef::Step(2),
            class: DecisionClass::Free,
        });
        assert_eq!(validate_ceremony(&c).len(), 1);
    }

    #[test]
    fn element_refs_round_trip() {
        let c = parse(TINY).unwrap();
        for i in 0..c.script.len() {
            assert_eq!(c.resolve(c.element_ref(i).unwrap()), Some(i));
        }
    }
}
