//! Execution of a ceremony against a scenario, with human mutations and
//! attacker capabilities, and evaluation of security goals on the result.

mod goal;
mod mutation;
mod preset;

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

pub use goal::{check_goal, Goal, GoalKind, GoalSet, GoalStatus, SuccessState, Verdict};
pub use mutation::{
    candidate_mutations, capability_effective, capability_problem, mutation_problem, Capability,
    CapabilityKind, CapabilitySet, Mutation, MutationKind, MutationVector, Target,
};
pub use preset::{behavior_preset, Preset};

use crate::model::{ActivityKind, Ceremony, Condition, Element, SetRule, Step, ATTACKER};
use crate::scenario::{
    is_tainted, MissingFact, Scenario, Value, World, FORGED_MARKER, SLIP_MARKER,
};
use crate::term::{RoleId, Term};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum EngineError {
    #[error("invalid ceremony: {0}")]
    InvalidCeremony(String),
    #[error("mutation {mutation} is ill-targeted: {reason}")]
    IllTargeted { mutation: String, reason: String },
    #[error("conflicting mutations on target {0}")]
    Conflicting(String),
    #[error("capability {0}")]
    UnknownCapability(String),
    #[error(transparent)]
    Incomplete(#[from] MissingFact),
    #[error("goal {goal}: {reason}")]
    BadGoal { goal: String, reason: String },
    #[error("unknown behavior preset {0}")]
    UnknownPreset(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Sent,
    Delivered,
    Intercepted,
    Injected,
    LocalActivity,
    CheckResult,
    Verdict,
}

impl EventKind {
    pub fn keyword(self) -> &'static str {
        match self {
            EventKind::Sent => "sent",
            EventKind::Delivered => "delivered",
            EventKind::Intercepted => "intercepted",
            EventKind::Injected => "injected",
            EventKind::LocalActivity => "local_activity",
            EventKind::CheckResult => "check_result",
            EventKind::Verdict => "verdict",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckOutcome {
    Success,
    Failure,
    Skipped,
}

impl CheckOutcome {
    pub fn keyword(self) -> &'static str {
        match self {
            CheckOutcome::Success => "success",
            CheckOutcome::Failure => "failure",
            CheckOutcome::Skipped => "skipped",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Event {
    pub i: usize,
    pub kind: EventKind,
    pub actor: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub activity: Option<ActivityKind>,
    /// Script position the event belongs to; `None` for pre-run attacker or
    /// disclosure events.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub element: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
    pub payload: Vec<Term>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub outcome: Option<CheckOutcome>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mutation: Option<Mutation>,
}

pub type Bindings = BTreeMap<RoleId, BTreeMap<String, Term>>;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Trace {
    pub ceremony: String,
    pub scenario: String,
    pub roles: Vec<RoleId>,
    pub mutations: Vec<Mutation>,
    pub capabilities: Vec<Capability>,
    /// Granted capabilities the ceremony's channel flags neutralise.
    pub inert_capabilities: Vec<Capability>,
    pub events: Vec<Event>,
    pub bindings: Bindings,
    pub attacker_knowledge: BTreeSet<Term>,
    pub forged: BTreeSet<String>,
}

impl Trace {
    pub fn is_role(&self, s: &str) -> bool {
        self.roles.iter().any(|r| r.as_str() == s)
    }

    pub fn binding(&self, role: &RoleId, var: &str) -> Option<&Term> {
        self.bindings.get(role)?.get(var)
    }

    /// Number of script steps whose message was sent.
    pub fn steps_completed(&self) -> usize {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::Sent && e.element.is_some())
            .count()
    }
}

/// JSON export of a run. Field order is stable.
#[derive(Serialize)]
pub struct RunReport<'a> {
    pub ceremony: &'a str,
    pub scenario: &'a str,
    pub mutations: &'a [Mutation],
    pub capabilities: &'a [Capability],
    pub events: &'a [Event],
    pub bindings: &'a Bindings,
    pub verdicts: &'a [Verdict],
    pub attacker_knowledge: &'a BTreeSet<Term>,
    pub inert_capabilities: &'a [Capability],
}

impl<'a> RunReport<'a> {
    pub fn new(trace: &'a Trace, verdicts: &'a [Verdict]) -> Self {
        RunReport {
            ceremony: &trace.ceremony,
            scenario: &trace.scenario,
            mutations: &trace.mutations,
            capabilities: &trace.capabilities,
            events: &trace.events,
            bindings: &trace.bindings,
            verdicts,
            attacker_knowledge: &trace.attacker_knowledge,
            inert_capabilities: &trace.inert_capabilities,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("run report serializes");
        s.push('\n');
        s
    }
}

#[derive(Default)]
struct RoleState {
    vars: BTreeMap<String, Term>,
    /// Everything received or stored, in order.
    known: Vec<Term>,
}

struct Runner<'a> {
    c: &'a Ceremony,
    scenario: &'a Scenario,
    by_target: BTreeMap<usize, &'a Mutation>,
    caps: &'a CapabilitySet,
    states: BTreeMap<RoleId, RoleState>,
    attacker: BTreeSet<Term>,
    forged: BTreeSet<String>,
    checks: Vec<CheckOutcome>,
    events: Vec<Event>,
}

fn first_app_with_head(t: &Term, f: &str) -> Option<Term> {
    let mut found = None;
    t.visit(&mut |s| {
        if found.is_none() && matches!(s, Term::App { func, .. } if func == f) {
            found = Some(s.clone());
        }
    });
    found
}

impl<'a> Runner<'a> {
    fn is_role(&self, s: &str) -> bool {
        self.c.role(&RoleId::new(s)).is_some()
    }

    fn state(&mut self, r: &RoleId) -> &mut RoleState {
        self.states.entry(r.clone()).or_default()
    }

    fn push(&mut self, mut e: Event) {
        e.i = self.events.len();
        self.events.push(e);
    }

    fn event(kind: EventKind, actor: &str, element: Option<usize>, payload: Vec<Term>) -> Event {
        Event {
            i: 0,
            kind,
            actor: actor.to_string(),
            activity: None,
            element,
            channel: None,
            payload,
            outcome: None,
            mutation: None,
        }
    }

    /// The actor's view of a term: variables replaced by their values and
    /// hidden subterms replaced by the most recent matching received term.
    fn subst(&self, r: &RoleId, t: &Term) -> Term {
        let Some(st) = self.states.get(r) else {
            return t.clone();
        };
        match t {
            Term::Atom(a) => st.vars.get(a).cloned().unwrap_or_else(|| t.clone()),
            Term::App { func, args } => Term::app(
                func.clone(),
                args.iter().map(|a| self.subst(r, a)).collect(),
            ),
            Term::Hidden { func, .. } => st
                .known
                .iter()
                .rev()
                .find_map(|k| first_app_with_head(k, func))
                .unwrap_or_else(|| t.clone()),
            Term::Role(_) => t.clone(),
        }
    }

    fn world_eval(&self, t: &Term) -> Result<Value, MissingFact> {
        World::new(self.scenario, &self.forged).eval(t)
    }

    fn start(&mut self) {
        for r in &self.c.roles {
            let is_role = |s: &str| self.c.role(&RoleId::new(s)).is_some();
            let secrets: Vec<(String, Term)> = self
                .scenario
                .secrets_of(&r.id, &is_role)
                .map(|(n, t)| (n.to_string(), t))
                .collect();
            let st = self.states.entry(r.id.clone()).or_default();
            st.vars.extend(secrets);
        }

        for cap in self
            .caps
            .iter()
            .filter(|c| c.kind == CapabilityKind::ForgeArtifact)
        {
            if capability_effective(self.c, cap) {
                self.forged.insert(cap.target.clone());
                let payload = vec![Term::atom(format!("{}{FORGED_MARKER}", cap.target))];
                self.push(Self::event(EventKind::Injected, ATTACKER, None, payload));
            }
        }
    }

    /// Secrets given away by their holders, after the script has run.
    fn disclose(&mut self, disclosures: &[&Mutation]) {
        for m in disclosures {
            let Target::Artifact(name) = &m.target else {
                continue;
            };
            let artifact = crate::dsl::parse_term(name)
                .map(|t| t.resolve_roles(&|s| self.is_role(s)))
                .unwrap_or_else(|_| Term::atom(name.clone()));
            let value = self.subst(&m.role, &artifact);
            let mut sent = Self::event(EventKind::Sent, m.role.as_str(), None, vec![value.clone()]);
            sent.mutation = Some((*m).clone());
            self.push(sent);
            match &m.aux {
                None => {
                    self.attacker.insert(value.clone());
                    self.push(Self::event(
                        EventKind::Intercepted,
                        ATTACKER,
                        None,
                        vec![value],
                    ));
                }
                Some(aux) => {
                    self.state(aux).known.push(value.clone());
                    self.push(Self::event(
                        EventKind::Delivered,
                        aux.as_str(),
                        None,
                        vec![value],
                    ));
                }
            }
        }
    }

    fn receive(&mut self, sender: &RoleId, receiver: &RoleId, script: &[Term], values: &[Term]) {
        let sender_vars: BTreeSet<String> = self
            .states
            .get(sender)
            .map(|st| st.vars.keys().cloned().collect())
            .unwrap_or_default();
        let st = self.state(receiver);
        for (src, v) in script.iter().zip(values) {
            if let Term::Atom(name) = src {
                if sender_vars.contains(name) {
                    st.vars.insert(name.clone(), v.clone());
                }
            }
            st.known.push(v.clone());
        }
    }

    fn step(&mut self, pos: usize, s: &Step) {
        let mutation = self.by_target.get(&pos).copied();
        let mut values: Vec<Term> = s.payload.iter().map(|t| self.subst(&s.sender, t)).collect();
        let mut receiver = s.receiver.clone();
        match mutation.map(|m| m.kind) {
            Some(MutationKind::TranscribeError) => {
                values = values.iter().map(|v| v.mark_leaves(SLIP_MARKER)).collect();
            }
            Some(MutationKind::MisdirectSend) => {
                receiver = mutation.and_then(|m| m.aux.clone()).unwrap_or(receiver);
            }
            _ => {}
        }
        let channel = self.c.channel(&s.channel).expect("validated channel");
        let mut sent = Self::event(
            EventKind::Sent,
            s.sender.as_str(),
            Some(pos),
            values.clone(),
        );
        sent.channel = Some(s.channel.clone());
        sent.mutation = mutation.cloned();
        self.push(sent);

        let mut delivered = values.clone();
        let mut extra = None;
        let on_channel: Vec<&Capability> =
            self.caps.iter().filter(|c| c.target == s.channel).collect();
        for cap in on_channel {
            let forged: Vec<Term> = values
                .iter()
                .map(|v| v.mark_leaves(FORGED_MARKER))
                .collect();
            let observe = match cap.kind {
                CapabilityKind::ObserveChannel => !channel.confidential,
                CapabilityKind::SpoofEndpoint => !channel.authenticated && !channel.confidential,
                _ => false,
            };
            if observe {
                self.attacker.extend(values.iter().cloned());
                let mut e =
                    Self::event(EventKind::Intercepted, ATTACKER, Some(pos), values.clone());
                e.channel = Some(s.channel.clone());
                self.push(e);
            }
            let inject = match cap.kind {
                CapabilityKind::SpoofEndpoint | CapabilityKind::InjectChannel => {
                    !channel.authenticated
                }
                _ => false,
            };
            if inject {
                let mut e = Self::event(EventKind::Injected, ATTACKER, Some(pos), forged.clone());
                e.channel = Some(s.channel.clone());
                self.push(e);
                if cap.kind == CapabilityKind::SpoofEndpoint {
                    delivered = forged;
                } else {
                    extra = Some(forged);
                }
            }
        }
        for payload in std::iter::once(delivered).chain(extra) {
            let mut e = Self::event(
                EventKind::Delivered,
                receiver.as_str(),
                Some(pos),
                payload.clone(),
            );
            e.channel = Some(s.channel.clone());
            self.push(e);
            self.receive(&s.sender, &receiver, &s.payload, &payload);
        }
    }

    /// Documents and traits named in `args` that the actor never got hold of.
    fn missing_items(&self, actor: &RoleId, args: &[Term]) -> bool {
        let known = self
            .states
            .get(actor)
            .map(|st| st.known.as_slice())
            .unwrap_or_default();
        let mut missing = false;
        for a in args {
            a.visit(&mut |t| {
                if let Term::Atom(name) = t {
                    let item = self.scenario.document_facts.contains_key(name)
                        || self.scenario.traits.contains_key(name);
                    if item && !known.iter().any(|k| k.contains(t)) {
                        missing = true;
                    }
                }
            });
        }
        missing
    }

    fn check(
        &self,
        actor: &RoleId,
        kind: ActivityKind,
        args: &[Term],
    ) -> Result<bool, MissingFact> {
        if kind != ActivityKind::Recognise && self.missing_items(actor, args) {
            return Ok(false);
        }
        match (kind, args) {
            (ActivityKind::Validate, [d]) => {
                if is_tainted(d) {
                    return Ok(false);
                }
                match self.world_eval(d)? {
                    Value::Document(name) => {
                        World::new(self.scenario, &self.forged).is_genuine(&name)
                    }
                    _ => Err(MissingFact(format!("document_facts[{d}]"))),
                }
            }
            (ActivityKind::Match, [a, b]) => {
                let (va, vb) = (self.world_eval(a)?, self.world_eval(b)?);
                if let Some(truth) = self
                    .biometric_truth(a, &vb)
                    .or_else(|| self.biometric_truth(b, &va))
                {
                    return Ok(truth);
                }
                Ok(va == vb)
            }
            (ActivityKind::Recognise, [t]) => Ok(!t.contains_hidden()
                && self
                    .states
                    .get(actor)
                    .is_some_and(|st| st.known.iter().any(|k| k.contains(t)))),
            _ => Ok(true),
        }
    }

    /// Explicit biometric outcome for a presented trait against a document.
    fn biometric_truth(&self, doc_side: &Term, trait_value: &Value) -> Option<bool> {
        let Term::App { func, args } = doc_side else {
            return None;
        };
        if !matches!(func.as_str(), "photo" | "bio_info") {
            return None;
        }
        let (Some(Term::Atom(d)), Value::Identity(who)) = (args.first(), trait_value) else {
            return None;
        };
        self.scenario.biometric_truth(who, d)
    }

    fn activity(&mut self, pos: usize, a: &crate::model::Activity) -> Result<(), EngineError> {
        let mutation = self.by_target.get(&pos).copied();
        let args: Vec<Term> = a.args.iter().map(|t| self.subst(&a.actor, t)).collect();
        if a.is_check {
            let outcome = match mutation.map(|m| m.kind) {
                Some(MutationKind::SkipCheck) => CheckOutcome::Skipped,
                Some(MutationKind::MisperformCheck) => CheckOutcome::Success,
                _ if self.check(&a.actor, a.kind, &args)? => CheckOutcome::Success,
                _ => CheckOutcome::Failure,
            };
            self.checks.push(outcome);
            let mut e = Self::event(EventKind::CheckResult, a.actor.as_str(), Some(pos), args);
            e.activity = Some(a.kind);
            e.outcome = Some(outcome);
            e.mutation = mutation.cloned();
            self.push(e);
            return Ok(());
        }
        if let Some(binding) = &a.set {
            let value = match &binding.rule {
                SetRule::Assign(t) => self.subst(&a.actor, t),
                SetRule::Conditional {
                    condition,
                    then,
                    otherwise,
                } => {
                    let holds = mutation.is_some_and(|m| m.kind == MutationKind::BlindAccept)
                        || match condition {
                            Condition::Success(_) => {
                                self.checks.iter().all(|o| *o != CheckOutcome::Failure)
                            }
                            Condition::Equals(l, r) => {
                                self.subst(&a.actor, l) == self.subst(&a.actor, r)
                            }
                        };
                    self.subst(&a.actor, if holds { then } else { otherwise })
                }
            };
            self.state(&a.actor)
                .vars
                .insert(binding.var.clone(), value.clone());
            let mut e = Self::event(
                EventKind::Verdict,
                a.actor.as_str(),
                Some(pos),
                vec![Term::atom(binding.var.clone()), value],
            );
            e.activity = Some(a.kind);
            e.mutation = mutation.cloned();
            self.push(e);
            return Ok(());
        }
        if a.kind == ActivityKind::Query {
            if let Some(key) = args.first() {
                if !is_tainted(key) {
                    let probe = Term::app("flight&passenger", vec![key.clone()]);
                    self.world_eval(&probe)?;
                }
            }
        }
        if matches!(
            a.kind,
            ActivityKind::Store | ActivityKind::Issue | ActivityKind::Scan | ActivityKind::ScanFrom
        ) {
            let st = self.state(&a.actor);
            st.known.extend(args.iter().cloned());
        }
        let mut e = Self::event(EventKind::LocalActivity, a.actor.as_str(), Some(pos), args);
        e.activity = Some(a.kind);
        self.push(e);
        Ok(())
    }
}

/// Executes the script once. Deterministic in all inputs.
pub fn run(
    c: &Ceremony,
    scenario: &Scenario,
    mutations: &MutationVector,
    capabilities: &CapabilitySet,
) -> Result<Trace, EngineError> {
    if let Some(f) = c.validate().into_iter().next() {
        return Err(EngineError::InvalidCeremony(f.message));
    }
    scenario.check_total(c)?;
    let mut by_target: BTreeMap<usize, &Mutation> = BTreeMap::new();
    let mut artifact_targets = BTreeSet::new();
    let mut disclosures = Vec::new();
    for m in mutations {
        if let Some(reason) = mutation_problem(c, m) {
            return Err(EngineError::IllTargeted {
                mutation: m.to_string(),
                reason,
            });
        }
        let fresh = match &m.target {
            Target::Element(i) => by_target.insert(*i, m).is_none(),
            Target::Artifact(a) => {
                disclosures.push(m);
                artifact_targets.insert(a.clone())
            }
        };
        if !fresh {
            return Err(EngineError::Conflicting(m.target.to_string()));
        }
    }
    for cap in capabilities {
        if let Some(reason) = capability_problem(c, cap) {
            return Err(EngineError::UnknownCapability(reason));
        }
    }

    let mut runner = Runner {
        c,
        scenario,
        by_target,
        caps: capabilities,
        states: BTreeMap::new(),
        attacker: BTreeSet::new(),
        forged: BTreeSet::new(),
        checks: Vec::new(),
        events: Vec::new(),
    };
    runner.start();
    for (pos, e) in c.script.iter().enumerate() {
        match e {
            Element::Step(s) => runner.step(pos, s),
            Element::Activity(a) => runner.activity(pos, a)?,
        }
    }
    runner.disclose(&disclosures);

    let bindings = c
        .roles
        .iter()
        .map(|r| {
            let vars = runner
                .states
                .get(&r.id)
                .map(|st| st.vars.clone())
                .unwrap_or_default();
            (r.id.clone(), vars)
        })
        .collect();
    Ok(Trace {
        ceremony: c.name.clone(),
        scenario: scenario.name.clone(),
        roles: c.roles.iter().map(|r| r.id.clone()).collect(),
        mutations: mutations.iter().cloned().collect(),
        capabilities: capabilities.iter().cloned().collect(),
        inert_capabilities: capabilities
            .iter()
            .filter(|cap| !capability_effective(c, cap))
            .cloned()
            .collect(),
        events: runner.events,
        bindings,
        attacker_knowledge: runner.attacker,
        forged: runner.forged,
    })
}
