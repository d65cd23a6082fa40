//! Human deviations from the script and attacker capabilities.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::model::{ActivityKind, Ceremony, Element, SetRule};
use crate::term::RoleId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationKind {
    SkipCheck,
    MisperformCheck,
    MisdirectSend,
    BlindAccept,
    TranscribeError,
    DiscloseSecret,
}

impl MutationKind {
    pub const ALL: [MutationKind; 6] = [
        MutationKind::SkipCheck,
        MutationKind::MisperformCheck,
        MutationKind::MisdirectSend,
        MutationKind::BlindAccept,
        MutationKind::TranscribeError,
        MutationKind::DiscloseSecret,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            MutationKind::SkipCheck => "skip_check",
            MutationKind::MisperformCheck => "misperform_check",
            MutationKind::MisdirectSend => "misdirect_send",
            MutationKind::BlindAccept => "blind_accept",
            MutationKind::TranscribeError => "transcribe_error",
            MutationKind::DiscloseSecret => "disclose_secret",
        }
    }
}

impl fmt::Display for MutationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.keyword())
    }
}

impl FromStr for MutationKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        MutationKind::ALL
            .into_iter()
            .find(|k| k.keyword() == s)
            .ok_or_else(|| format!("unknown mutation kind {s}"))
    }
}

/// Script position (0-based) or artifact name.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Target {
    Element(usize),
    Artifact(String),
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Target::Element(i) => write!(f, "{i}"),
            Target::Artifact(a) => f.write_str(a),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Mutation {
    pub kind: MutationKind,
    pub role: RoleId,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub aux: Option<RoleId>,
}

impl Mutation {
    pub fn new(kind: MutationKind, role: impl Into<String>, target: Target) -> Self {
        Mutation {
            kind,
            role: RoleId::new(role),
            target,
            aux: None,
        }
    }

    pub fn with_aux(mut self, aux: impl Into<String>) -> Self {
        self.aux = Some(RoleId::new(aux));
        self
    }
}

impl Ord for Mutation {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (&self.target, self.kind, &self.role, &self.aux).cmp(&(
            &other.target,
            other.kind,
            &other.role,
            &other.aux,
        ))
    }
}

impl PartialOrd for Mutation {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// `kind:role@target` with an optional `->aux`.
impl fmt::Display for Mutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}@{}", self.kind, self.role, self.target)?;
        if let Some(aux) = &self.aux {
            write!(f, "->{aux}")?;
        }
        Ok(())
    }
}

impl FromStr for Mutation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let bad = || format!("malformed mutation {s:?}, expected kind:role@target[->aux]");
        let (kind, rest) = s.split_once(':').ok_or_else(bad)?;
        let (role, rest) = rest.split_once('@').ok_or_else(bad)?;
        let (target, aux) = match rest.split_once("->") {
            Some((t, a)) => (t, Some(RoleId::new(a))),
            None => (rest, None),
        };
        if role.is_empty() || target.is_empty() {
            return Err(bad());
        }
        let target = match target.parse::<usize>() {
            Ok(i) => Target::Element(i),
            Err(_) => Target::Artifact(target.to_string()),
        };
        Ok(Mutation {
            kind: kind.parse()?,
            role: RoleId::new(role),
            target,
            aux,
        })
    }
}

pub type MutationVector = BTreeSet<Mutation>;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CapabilityKind {
    ObserveChannel,
    InjectChannel,
    SpoofEndpoint,
    ForgeArtifact,
}

impl CapabilityKind {
    pub const ALL: [CapabilityKind; 4] = [
        CapabilityKind::ObserveChannel,
        CapabilityKind::InjectChannel,
        CapabilityKind::SpoofEndpoint,
        CapabilityKind::ForgeArtifact,
    ];

    pub fn keyword(self) -> &'static str {
        match self {
            CapabilityKind::ObserveChannel => "observe_channel",
            CapabilityKind::InjectChannel => "inject_channel",
            CapabilityKind::SpoofEndpoint => "spoof_endpoint",
            CapabilityKind::ForgeArtifact => "forge_artifact",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Capability {
    pub kind: CapabilityKind,
    /// Channel id, or artifact name for `forge_artifact`.
    pub target: String,
}

impl Capability {
    pub fn new(kind: CapabilityKind, target: impl Into<String>) -> Self {
        Capability {
            kind,
            target: target.into(),
        }
    }
}

impl fmt::Display for Capability {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.kind.keyword(), self.target)
    }
}

impl FromStr for Capability {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        let (kind, target) = s
            .split_once(':')
            .filter(|(_, t)| !t.is_empty())
            .ok_or_else(|| format!("malformed capability {s:?}, expected kind:target"))?;
        let kind = CapabilityKind::ALL
            .into_iter()
            .find(|k| k.keyword() == kind)
            .ok_or_else(|| format!("unknown capability kind {kind}"))?;
        Ok(Capability::new(kind, target))
    }
}

pub type CapabilitySet = BTreeSet<Capability>;

/// Why a mutation cannot apply to a ceremony, or `None` if it can.
pub fn mutation_problem(c: &Ceremony, m: &Mutation) -> Option<String> {
    if c.role(&m.role).is_none() {
        return Some(format!("unknown role {}", m.role));
    }
    if !c.is_human(&m.role) {
        return Some(format!("{} is not a human role", m.role));
    }
    if m.kind != MutationKind::MisdirectSend
        && m.kind != MutationKind::DiscloseSecret
        && m.aux.is_some()
    {
        return Some(format!("{} takes no auxiliary role", m.kind));
    }
    if let Some(aux) = &m.aux {
        if c.role(aux).is_none() {
            return Some(format!("unknown role {aux}"));
        }
    }
    let element = match &m.target {
        Target::Element(i) => match c.script.get(*i) {
            Some(e) => Some(e),
            None => return Some(format!("no script element {i}")),
        },
        Target::Artifact(_) => None,
    };
    match (m.kind, element, &m.target) {
        (
            MutationKind::SkipCheck | MutationKind::MisperformCheck,
            Some(Element::Activity(a)),
            _,
        ) if a.is_check && a.actor == m.role => None,
        (MutationKind::MisdirectSend, Some(Element::Step(s)), _) if s.sender == m.role => {
            match &m.aux {
                None => Some("misdirect_send needs a recipient".into()),
                Some(aux) if aux == &s.sender || aux == &s.receiver => {
                    Some(format!("{aux} is already an endpoint of step {}", s.index))
                }
                Some(_) => None,
            }
        }
        (MutationKind::TranscribeError, Some(Element::Step(s)), _) if s.sender == m.role => None,
        (MutationKind::BlindAccept, Some(Element::Activity(a)), Target::Element(i))
            if a.actor == m.role && is_decision_set(c, &m.role, *i) =>
        {
            None
        }
        (MutationKind::DiscloseSecret, None, Target::Artifact(name)) => {
            if !c
                .secret_artifacts()
                .any(|a| a.role == m.role && &a.name == name)
            {
                Some(format!(
                    "{} holds no security-exclusive artifact {name}",
                    m.role
                ))
            } else if m.aux.as_ref() == Some(&m.role) {
                Some(format!("{} cannot disclose to itself", m.role))
            } else {
                None
            }
        }
        _ => Some(format!("{} does not apply to target {}", m.kind, m.target)),
    }
}

fn is_decision_set(c: &Ceremony, role: &RoleId, position: usize) -> bool {
    let conditional = matches!(
        c.script.get(position),
        Some(Element::Activity(a)) if a.kind == ActivityKind::Set
            && matches!(a.set.as_ref().map(|b| &b.rule), Some(SetRule::Conditional { .. }))
    );
    conditional
        && c.decisions
            .iter()
            .any(|d| &d.role == role && c.resolve(d.at) == Some(position))
}

/// Every well-targeted single mutation of the given kinds, in canonical order.
pub fn candidate_mutations(
    c: &Ceremony,
    kinds: &[MutationKind],
    roles: Option<&[RoleId]>,
) -> Vec<Mutation> {
    let mut out = BTreeSet::new();
    let allowed = |r: &RoleId| roles.is_none_or(|rs| rs.contains(r));
    for role in c.human_roles().map(|r| &r.id).filter(|r| allowed(r)) {
        for &kind in kinds {
            let base = |target| Mutation {
                kind,
                role: role.clone(),
                target,
                aux: None,
            };
            match kind {
                MutationKind::DiscloseSecret => {
                    for a in c.secret_artifacts().filter(|a| &a.role == role) {
                        out.insert(base(Target::Artifact(a.name.clone())));
                    }
                }
                MutationKind::MisdirectSend => {
                    for (i, _) in c.script.iter().enumerate() {
                        for other in &c.roles {
                            let m = base(Target::Element(i)).with_aux(other.id.as_str());
                            if mutation_problem(c, &m).is_none() {
                                out.insert(m);
                            }
                        }
                    }
                }
                _ => {
                    for i in 0..c.script.len() {
                        let m = base(Target::Element(i));
                        if mutation_problem(c, &m).is_none() {
                            out.insert(m);
                        }
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

/// Why a capability cannot be granted, or `None` if it names a real target.
pub fn capability_problem(c: &Ceremony, cap: &Capability) -> Option<String> {
    let known = match cap.kind {
        CapabilityKind::ForgeArtifact => c.artifacts.iter().any(|a| a.name == cap.target),
        _ => c.channel(&cap.target).is_some(),
    };
    (!known).then(|| format!("{cap} names no such target"))
}

/// Whether a granted capability can have any effect on this ceremony.
pub fn capability_effective(c: &Ceremony, cap: &Capability) -> bool {
    match cap.kind {
        CapabilityKind::ForgeArtifact => c
            .artifacts
            .iter()
            .any(|a| a.name == cap.target && a.forgeable),
        CapabilityKind::ObserveChannel => c.channel(&cap.target).is_some_and(|ch| !ch.confidential),
        CapabilityKind::InjectChannel | CapabilityKind::SpoofEndpoint => {
            c.channel(&cap.target).is_some_and(|ch| !ch.authenticated)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mutation_text_round_trips() {
        for s in [
            "skip_check:A@4",
            "misdirect_send:H@3->E",
            "disclose_secret:H@pass(B)",
        ] {
            let m: Mutation = s.parse().unwrap();
            assert_eq!(m.to_string(), s);
        }
        assert!("skip_check:A".parse::<Mutation>().is_err());
        assert!("jump:A@1".parse::<Mutation>().is_err());
    }

    #[test]
    fn target_json_is_untagged() {
        let m = Mutation::new(MutationKind::SkipCheck, "A", Target::Element(3));
        assert_eq!(
            serde_json::to_string(&m).unwrap(),
            r#"{"kind":"skip_check","role":"A","target":3}"#
        );
        let d: Mutation =
            serde_json::from_str(r#"{"kind":"disclose_secret","role":"H","target":"pin"}"#)
                .unwrap();
        assert_eq!(d.target, Target::Artifact("pin".into()));
    }

    #[test]
    fn capability_parse() {
        let c: Capability = "observe_channel:optical".parse().unwrap();
        assert_eq!(c.kind, CapabilityKind::ObserveChannel);
        assert!("observe_channel:".parse::<Capability>().is_err());
    }
}
