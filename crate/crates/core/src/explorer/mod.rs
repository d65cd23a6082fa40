//! Bounded exhaustive search for goal violations over human mutation vectors
//! and attacker capability subsets.

mod oracle;

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write;

use rayon::prelude::*;
use serde::Serialize;

pub use oracle::oracle_explore;

use crate::engine::{
    candidate_mutations, check_goal, run, Capability, CapabilitySet, EngineError, Goal, GoalStatus,
    Mutation, MutationKind, MutationVector,
};
use crate::model::Ceremony;
use crate::scenario::Scenario;
use crate::term::RoleId;

/// Largest supported mutation bound.
pub const MAX_MUTATIONS: usize = 6;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ExplorationConfig {
    pub max_mutations: usize,
    pub mutation_kinds: Vec<MutationKind>,
    pub capability_pool: Vec<Capability>,
    /// Only mutate these roles; `None` means every human role.
    pub roles: Option<Vec<RoleId>>,
}

impl ExplorationConfig {
    pub fn new(max_mutations: usize) -> Self {
        ExplorationConfig {
            max_mutations,
            mutation_kinds: MutationKind::ALL.to_vec(),
            capability_pool: Vec::new(),
            roles: None,
        }
    }

    pub fn kinds(mut self, kinds: &[MutationKind]) -> Self {
        self.mutation_kinds = kinds.to_vec();
        self
    }

    pub fn pool(mut self, pool: &[Capability]) -> Self {
        self.capability_pool = pool.to_vec();
        self
    }

    pub fn roles(mut self, roles: &[RoleId]) -> Self {
        self.roles = Some(roles.to_vec());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExploreError {
    #[error("state-space too large: mutation bound {0} exceeds {MAX_MUTATIONS}")]
    StateSpaceTooLarge(usize),
    #[error(transparent)]
    Engine(#[from] EngineError),
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct Violation {
    pub mutations: Vec<Mutation>,
    pub capabilities: Vec<Capability>,
    pub goal: String,
    pub witness: String,
    #[serde(skip)]
    pub condition: String,
}

impl Violation {
    fn sort_key(&self) -> (usize, &[Mutation], &[Capability], &str, &str) {
        (
            self.mutations.len(),
            &self.mutations,
            &self.capabilities,
            &self.goal,
            &self.condition,
        )
    }

    /// Whether `self` is reached by a sub-configuration of `other` with the
    /// same failing condition.
    pub fn subsumes(&self, other: &Violation) -> bool {
        self.goal == other.goal
            && self.condition == other.condition
            && self.mutations.iter().all(|m| other.mutations.contains(m))
            && self
                .capabilities
                .iter()
                .all(|c| other.capabilities.contains(c))
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct ExplorationStats {
    pub vectors_examined: usize,
    pub runs_executed: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ViolationSet {
    pub ceremony: String,
    pub scenario: String,
    pub violations: Vec<Violation>,
    pub stats: ExplorationStats,
}

/// Equality ignores the statistics, which depend on how a search was run.
impl PartialEq for ViolationSet {
    fn eq(&self, other: &Self) -> bool {
        self.ceremony == other.ceremony
            && self.scenario == other.scenario
            && self.violations == other.violations
    }
}

impl Eq for ViolationSet {}

impl ViolationSet {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("violation set serializes");
        s.push('\n');
        s
    }

    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} / {}: {} minimal violation(s), {} vectors, {} runs\n",
            self.ceremony,
            self.scenario,
            self.violations.len(),
            self.stats.vectors_examined,
            self.stats.runs_executed
        );
        for v in &self.violations {
            let ms = v
                .mutations
                .iter()
                .map(Mutation::to_string)
                .collect::<Vec<_>>();
            let cs = v
                .capabilities
                .iter()
                .map(Capability::to_string)
                .collect::<Vec<_>>();
            let _ = writeln!(
                out,
                "  {}: mutations [{}] capabilities [{}]\n    {}",
                v.goal,
                ms.join(", "),
                cs.join(", "),
                v.witness
            );
        }
        out
    }
}

/// Mutation vectors of size `0..=k` over `candidates` with pairwise distinct
/// targets, in lexicographic order.
pub fn enumerate_vectors(candidates: &[Mutation], k: usize) -> Vec<MutationVector> {
    let mut out = vec![MutationVector::new()];
    let mut frontier: Vec<(usize, Vec<&Mutation>)> = vec![(0, Vec::new())];
    for _ in 0..k {
        let mut next = Vec::new();
        for (start, chosen) in &frontier {
            for (i, m) in candidates.iter().enumerate().skip(*start) {
                if chosen.iter().any(|c| c.target == m.target) {
                    continue;
                }
                let mut v = chosen.clone();
                v.push(m);
                out.push(v.iter().map(|m| (*m).clone()).collect());
                next.push((i + 1, v));
            }
        }
        frontier = next;
    }
    out
}

pub(crate) fn capability_subsets(pool: &[Capability]) -> Vec<CapabilitySet> {
    let pool: Vec<&Capability> = pool.iter().collect::<BTreeSet<_>>().into_iter().collect();
    let mut subsets: Vec<CapabilitySet> = (0u64..1 << pool.len())
        .map(|bits| {
            pool.iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, c)| (*c).clone())
                .collect()
        })
        .collect();
    subsets.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    subsets
}

pub(crate) fn run_violations(
    c: &Ceremony,
    s: &Scenario,
    goals: &[Goal],
    m: &MutationVector,
    a: &CapabilitySet,
) -> Result<Vec<Violation>, EngineError> {
    let trace = run(c, s, m, a)?;
    let mut out = Vec::new();
    for g in goals {
        let v = check_goal(&trace, s, g)?;
        if v.status == GoalStatus::Violated {
            out.push(Violation {
                mutations: m.iter().cloned().collect(),
                capabilities: a.iter().cloned().collect(),
                goal: v.goal,
                witness: v.witness,
                condition: v.condition,
            });
        }
    }
    Ok(out)
}

fn subsets_of<T: Clone + Ord>(items: &[T]) -> Vec<Vec<T>> {
    (0u64..1 << items.len())
        .map(|bits| {
            items
                .iter()
                .enumerate()
                .filter(|(i, _)| bits & (1 << i) != 0)
                .map(|(_, x)| x.clone())
                .collect()
        })
        .collect()
}

/// Keeps a violation only if no strictly smaller configuration reaches the
/// same goal failure.
fn minimal(raw: Vec<Violation>) -> Vec<Violation> {
    type Key = (String, String, Vec<Mutation>, Vec<Capability>);
    let present: HashSet<Key> = raw
        .iter()
        .map(|v| {
            (
                v.goal.clone(),
                v.condition.clone(),
                v.mutations.clone(),
                v.capabilities.clone(),
            )
        })
        .collect();
    let mut kept: Vec<Violation> = raw
        .into_iter()
        .filter(|v| {
            subsets_of(&v.mutations).into_iter().all(|ms| {
                subsets_of(&v.capabilities).into_iter().all(|cs| {
                    (ms.len() == v.mutations.len() && cs.len() == v.capabilities.len())
                        || !present.contains(&(v.goal.clone(), v.condition.clone(), ms.clone(), cs))
                })
            })
        })
        .collect();
    kept.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    kept
}

pub(crate) fn sort_violations(vs: &mut [Violation]) {
    vs.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
}

/// Every minimal violation reachable within the configured bound.
pub fn explore(
    c: &Ceremony,
    s: &Scenario,
    goals: &[Goal],
    cfg: &ExplorationConfig,
) -> Result<ViolationSet, ExploreError> {
    if cfg.max_mutations > MAX_MUTATIONS {
        return Err(ExploreError::StateSpaceTooLarge(cfg.max_mutations));
    }
    let candidates = candidate_mutations(c, &cfg.mutation_kinds, cfg.roles.as_deref());
    let vectors = enumerate_vectors(&candidates, cfg.max_mutations);
    let subsets = capability_subsets(&cfg.capability_pool);
    let jobs: Vec<(&MutationVector, &CapabilitySet)> = vectors
        .iter()
        .flat_map(|m| subsets.iter().map(move |a| (m, a)))
        .collect();
    let found: Vec<Vec<Violation>> = jobs
        .par_iter()
        .map(|(m, a)| run_violations(c, s, goals, m, a))
        .collect::<Result<_, _>>()?;
    Ok(ViolationSet {
        ceremony: c.name.clone(),
        scenario: s.name.clone(),
        violations: minimal(found.into_iter().flatten().collect()),
        stats: ExplorationStats {
            vectors_examined: vectors.len(),
            runs_executed: jobs.len(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::Target;

    fn m(i: usize) -> Mutation {
        Mutation::new(MutationKind::SkipCheck, "A", Target::Element(i))
    }

    #[test]
    fn vector_counts_are_binomial() {
        let cands: Vec<Mutation> = (0..5).map(m).collect();
        assert_eq!(enumerate_vectors(&cands, 0).len(), 1);
        assert_eq!(enumerate_vectors(&cands, 1).len(), 6);
        assert_eq!(enumerate_vectors(&cands, 2).len(), 16);
    }

    #[test]
    fn vectors_never_repeat_a_target() {
        let mut cands: Vec<Mutation> = (0..3).map(m).collect();
        cands.push(Mutation::new(
            MutationKind::MisperformCheck,
            "A",
            Target::Element(0),
        ));
        cands.sort();
        for v in enumerate_vectors(&cands, 3) {
            let targets: BTreeSet<_> = v.iter().map(|m| &m.target).collect();
            assert_eq!(targets.len(), v.len());
        }
    }

    #[test]
    fn supersets_are_not_minimal() {
        let viol = |ms: Vec<Mutation>| Violation {
            mutations: ms,
            capabilities: vec![],
            goal: "g".into(),
            witness: String::new(),
            condition: "c".into(),
        };
        let kept = minimal(vec![
            viol(vec![m(1), m(2)]),
            viol(vec![m(1)]),
            viol(vec![m(3)]),
        ]);
        assert_eq!(kept, vec![viol(vec![m(1)]), viol(vec![m(3)])]);
    }
}
