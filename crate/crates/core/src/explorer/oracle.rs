//! Brute-force reference for [`super::explore`]: its own candidate discovery,
//! naive recursive enumeration, sequential runs and a pairwise minimality
//! filter.

use std::collections::BTreeSet;

use super::{
    ExplorationConfig, ExplorationStats, ExploreError, Violation, ViolationSet, MAX_MUTATIONS,
};
use crate::engine::{
    check_goal, run, Capability, CapabilitySet, Goal, GoalStatus, Mutation, MutationKind,
    MutationVector, Target,
};
use crate::model::{ActivityKind, Ceremony, Element, SetRule};
use crate::scenario::Scenario;

fn applies(c: &Ceremony, m: &Mutation) -> bool {
    let pos = match m.target {
        Target::Element(i) => i,
        Target::Artifact(ref name) => {
            return m.kind == MutationKind::DiscloseSecret
                && c.artifacts
                    .iter()
                    .any(|a| a.role == m.role && &a.name == name && a.security_exclusive);
        }
    };
    let Some(e) = c.script.get(pos) else {
        return false;
    };
    match (m.kind, e) {
        (MutationKind::SkipCheck | MutationKind::MisperformCheck, Element::Activity(a)) => {
            a.actor == m.role && a.kind.is_check()
        }
        (MutationKind::TranscribeError, Element::Step(s)) => s.sender == m.role,
        (MutationKind::MisdirectSend, Element::Step(s)) => {
            s.sender == m.role
                && m.aux
                    .as_ref()
                    .is_some_and(|x| x != &s.sender && x != &s.receiver)
        }
        (MutationKind::BlindAccept, Element::Activity(a)) => {
            a.actor == m.role
                && a.kind == ActivityKind::Set
                && matches!(
                    a.set.as_ref().map(|b| &b.rule),
                    Some(SetRule::Conditional { .. })
                )
                && c.decisions
                    .iter()
                    .any(|d| d.role == m.role && c.resolve(d.at) == Some(pos))
        }
        _ => false,
    }
}

fn candidates(c: &Ceremony, cfg: &ExplorationConfig) -> Vec<Mutation> {
    let mut out = BTreeSet::new();
    for role in &c.roles {
        if !role.is_human() || cfg.roles.as_ref().is_some_and(|rs| !rs.contains(&role.id)) {
            continue;
        }
        for &kind in &cfg.mutation_kinds {
            let mut targets: Vec<Target> = (0..c.script.len()).map(Target::Element).collect();
            targets.extend(c.artifacts.iter().map(|a| Target::Artifact(a.name.clone())));
            for target in targets {
                let auxes: Vec<Option<_>> = if kind == MutationKind::MisdirectSend {
                    c.roles.iter().map(|r| Some(r.id.clone())).collect()
                } else {
                    vec![None]
                };
                for aux in auxes {
                    let m = Mutation {
                        kind,
                        role: role.id.clone(),
                        target: target.clone(),
                        aux,
                    };
                    if applies(c, &m) {
                        out.insert(m);
                    }
                }
            }
        }
    }
    out.into_iter().collect()
}

fn choose(
    cands: &[Mutation],
    k: usize,
    from: usize,
    current: &mut Vec<Mutation>,
    out: &mut Vec<MutationVector>,
) {
    out.push(current.iter().cloned().collect());
    if current.len() == k {
        return;
    }
    for i in from..cands.len() {
        if current.iter().any(|m| m.target == cands[i].target) {
            continue;
        }
        current.push(cands[i].clone());
        choose(cands, k, i + 1, current, out);
        current.pop();
    }
}

fn power_set(
    pool: &[Capability],
    i: usize,
    current: &mut CapabilitySet,
    out: &mut Vec<CapabilitySet>,
) {
    if i == pool.len() {
        out.push(current.clone());
        return;
    }
    power_set(pool, i + 1, current, out);
    if current.insert(pool[i].clone()) {
        power_set(pool, i + 1, current, out);
        current.remove(&pool[i]);
    }
}

pub fn oracle_explore(
    c: &Ceremony,
    s: &Scenario,
    goals: &[Goal],
    cfg: &ExplorationConfig,
) -> Result<ViolationSet, ExploreError> {
    if cfg.max_mutations > MAX_MUTATIONS {
        return Err(ExploreError::StateSpaceTooLarge(cfg.max_mutations));
    }
    let cands = candidates(c, cfg);
    let mut vectors = Vec::new();
    choose(&cands, cfg.max_mutations, 0, &mut Vec::new(), &mut vectors);
    let mut subsets = Vec::new();
    power_set(
        &cfg.capability_pool,
        0,
        &mut CapabilitySet::new(),
        &mut subsets,
    );
    let subsets: Vec<CapabilitySet> = subsets
        .into_iter()
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();

    let mut raw = Vec::new();
    let mut runs = 0;
    for m in &vectors {
        for a in &subsets {
            runs += 1;
            let trace = run(c, s, m, a)?;
            for g in goals {
                let v = check_goal(&trace, s, g)?;
                if v.status == GoalStatus::Violated {
                    raw.push(Violation {
                        mutations: m.iter().cloned().collect(),
                        capabilities: a.iter().cloned().collect(),
                        goal: v.goal,
                        witness: v.witness,
                        condition: v.condition,
                    });
                }
            }
        }
    }
    let mut violations: Vec<Violation> = raw
        .iter()
        .filter(|v| !raw.iter().any(|w| w.subsumes(v) && !v.subsumes(w)))
        .cloned()
        .collect();
    super::sort_violations(&mut violations);
    Ok(ViolationSet {
        ceremony: c.name.clone(),
        scenario: s.name.clone(),
        violations,
        stats: ExplorationStats {
            vectors_examined: vectors.len(),
            runs_executed: runs,
        },
    })
}
