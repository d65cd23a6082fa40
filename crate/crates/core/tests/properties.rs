use std::collections::BTreeSet;
use std::sync::OnceLock;

use ceremonies::corpus::{Corpus, CorpusEntry};
use ceremonies::dsl::{parse, parse_term, serialize};
use ceremonies::engine::{
    candidate_mutations, run, Capability, CapabilityKind, CapabilitySet, CheckOutcome, EventKind,
    MutationKind, MutationVector, Target, Trace,
};
use ceremonies::explorer::{explore, ExplorationConfig};
use ceremonies::features::FeatureSymbol;
use ceremonies::scenario::Scenario;
use ceremonies::{RoleId, Term};
use proptest::prelude::*;

fn corpus() -> &'static [CorpusEntry] {
    static CORPUS: OnceLock<Vec<CorpusEntry>> = OnceLock::new();
    CORPUS.get_or_init(|| Corpus::default().load_all().expect("corpus loads"))
}

const ATOMS: [&str; 5] = ["a", "b", "nonce", "key", "url"];
const FUNCS: [&str; 3] = ["f", "hash", "enc"];

fn term_source(roles: usize) -> impl Strategy<Value = String> {
    let leaf = prop_oneof![
        prop::sample::select(ATOMS.to_vec()).prop_map(str::to_string),
        (0..roles).prop_map(|i| format!("R{i}")),
    ];
    leaf.prop_recursive(2, 6, 2, |inner| {
        (
            prop::sample::select(FUNCS.to_vec()),
            prop::collection::vec(inner, 1..3),
        )
            .prop_map(|(f, args)| format!("{f}({})", args.join(", ")))
    })
}

#[derive(Clone, Debug)]
enum Line {
    Step {
        from: usize,
        to: usize,
        payload: Vec<String>,
    },
    Store {
        actor: usize,
        args: Vec<String>,
    },
}

/// Source text of a random valid ceremony whose channels are network links.
fn ceremony_source() -> impl Strategy<Value = String> {
    (2usize..5)
        .prop_flat_map(|n| {
            let roles = prop::collection::vec(any::<bool>(), n);
            let flags = prop::collection::vec((any::<bool>(), any::<bool>()), n * (n - 1) / 2);
            let line = prop_oneof![
                (0..n, 1..n, prop::collection::vec(term_source(n), 1..3)).prop_map(
                    move |(from, off, payload)| Line::Step {
                        from,
                        to: (from + off) % n,
                        payload
                    }
                ),
                (0..n, prop::collection::vec(term_source(n), 1..3))
                    .prop_map(|(actor, args)| Line::Store { actor, args }),
            ];
            (Just(n), roles, flags, prop::collection::vec(line, 0..8))
        })
        .prop_map(|(n, humans, flags, lines)| {
            let mut src = String::from("ceremony \"generated\" {\n");
            for (i, human) in humans.iter().enumerate() {
                let kind = if *human { "human" } else { "technical" };
                src.push_str(&format!("  role R{i} {kind} \"role {i}\";\n"));
            }
            let mut pairs = Vec::new();
            for a in 0..n {
                for b in a + 1..n {
                    pairs.push((a, b));
                }
            }
            for ((a, b), (conf, auth)) in pairs.iter().zip(&flags) {
                let mut f = String::new();
                if *conf {
                    f.push_str(" confidential");
                }
                if *auth {
                    f.push_str(" authenticated");
                }
                src.push_str(&format!(
                    "  channel c{a}{b} network{f} between R{a} R{b};\n"
                ));
            }
            let mut step = 0;
            for l in lines {
                match l {
                    Line::Step { from, to, payload } => {
                        step += 1;
                        let (a, b) = (from.min(to), from.max(to));
                        src.push_str(&format!(
                            "  step {step}: R{from} -> R{to} over c{a}{b}: {};\n",
                            payload.join(", ")
                        ));
                    }
                    Line::Store { actor, args } => {
                        src.push_str(&format!("  do R{actor}: STORE {};\n", args.join(", ")));
                    }
                }
            }
            src.push_str("}\n");
            src
        })
}

fn empty_scenario() -> Scenario {
    serde_json::from_str(r#"{"name": "empty"}"#).unwrap()
}

/// Channel guarantees that hold for every trace without leaking mutations.
fn channel_guarantees(c: &ceremonies::Ceremony, t: &Trace) -> Result<(), String> {
    for ev in &t.events {
        let Some(ch) = ev.channel.as_deref().and_then(|id| c.channel(id)) else {
            continue;
        };
        match ev.kind {
            EventKind::Injected if ch.authenticated => {
                return Err(format!("injected on {}", ch.id))
            }
            EventKind::Intercepted if ch.confidential => {
                return Err(format!("intercepted on {}", ch.id))
            }
            _ => {}
        }
    }
    Ok(())
}

fn capability_sets(c: &ceremonies::Ceremony) -> Vec<Capability> {
    let kinds = [
        CapabilityKind::ObserveChannel,
        CapabilityKind::SpoofEndpoint,
        CapabilityKind::InjectChannel,
    ];
    c.channels
        .iter()
        .flat_map(|ch| {
            kinds
                .iter()
                .map(move |&k| Capability::new(k, ch.id.clone()))
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn generated_ceremonies_round_trip(src in ceremony_source()) {
        let c = parse(&src).unwrap();
        let text = serialize(&c).unwrap();
        prop_assert_eq!(&parse(&text).unwrap(), &c);
        prop_assert_eq!(serialize(&parse(&text).unwrap()).unwrap(), text);
    }

    #[test]
    fn terms_round_trip_through_json(src in term_source(3)) {
        let t = parse_term(&src).unwrap();
        let json = serde_json::to_string(&t).unwrap();
        let back: Term = serde_json::from_str(&json).unwrap();
        prop_assert_eq!(back, t);
    }

    #[test]
    fn capabilities_respect_channel_flags(src in ceremony_source(), picks in prop::collection::vec(any::<bool>(), 64)) {
        let c = parse(&src).unwrap();
        let caps: CapabilitySet = capability_sets(&c)
            .into_iter()
            .zip(picks)
            .filter(|(_, keep)| *keep)
            .map(|(cap, _)| cap)
            .collect();
        let t = run(&c, &empty_scenario(), &MutationVector::new(), &caps).unwrap();
        prop_assert_eq!(t.steps_completed(), c.step_count());
        if let Err(e) = channel_guarantees(&c, &t) {
            return Err(TestCaseError::fail(e));
        }
        let confidential: BTreeSet<String> = t
            .events
            .iter()
            .filter(|e| e.kind == EventKind::Sent)
            .filter(|e| e.channel.as_deref().and_then(|id| c.channel(id)).is_some_and(|ch| !ch.confidential))
            .flat_map(|e| e.payload.iter().map(|p| p.to_string()))
            .collect();
        for k in &t.attacker_knowledge {
            prop_assert!(confidential.contains(&k.to_string()), "attacker learned {}", k);
        }
    }

    #[test]
    fn skipping_a_check_leaves_other_successes(entry in 0..14usize, scenario in 0..4usize, base in 0..64usize, extra in 0..64usize) {
        let e = &corpus()[entry % corpus().len()];
        let s = &e.scenarios[scenario % e.scenarios.len()];
        let skips = candidate_mutations(&e.ceremony, &[MutationKind::SkipCheck], None);
        prop_assume!(!skips.is_empty());
        let others = candidate_mutations(&e.ceremony, &MutationKind::ALL, None);
        let first = &others[base % others.len()];
        let skip = &skips[extra % skips.len()];
        prop_assume!(first.target != skip.target);

        let before: MutationVector = [first.clone()].into_iter().collect();
        let mut after = before.clone();
        after.insert(skip.clone());
        let outcomes = |m: &MutationVector| -> Vec<(usize, CheckOutcome)> {
            run(&e.ceremony, s, m, &CapabilitySet::new())
                .unwrap()
                .events
                .iter()
                .filter(|ev| ev.kind == EventKind::CheckResult)
                .filter_map(|ev| Some((ev.element?, ev.outcome?)))
                .collect()
        };
        let Target::Element(skipped) = skip.target else { unreachable!() };
        let after_outcomes = outcomes(&after);
        for (pos, outcome) in outcomes(&before) {
            if pos == skipped || outcome != CheckOutcome::Success {
                continue;
            }
            let now = after_outcomes.iter().find(|(p, _)| *p == pos).map(|(_, o)| *o);
            prop_assert_ne!(now, Some(CheckOutcome::Failure), "check at {} of {} flipped", pos, e.id);
        }
    }
}

#[test]
fn empty_roles_contribute_no_mutations() {
    for e in corpus() {
        let cands = candidate_mutations(&e.ceremony, &MutationKind::ALL, None);
        for r in e.ceremony.human_roles() {
            if e.ceremony.role_burden(&r.id).unwrap().empty_role {
                assert!(
                    cands.iter().all(|m| m.role != r.id),
                    "{} has mutations for {}",
                    e.id,
                    r.id
                );
            }
        }
    }
}

#[test]
fn restricting_to_an_empty_role_changes_nothing() {
    for id in ["flight-boarding-iii", "flight-boarding-iv"] {
        let e = corpus().iter().find(|e| e.id == id).unwrap();
        for s in &e.scenarios {
            let all = ExplorationConfig::new(1).pool(&e.goals.capability_pool);
            let without_attendant = all.clone().roles(&[RoleId::new("P")]);
            let a = explore(&e.ceremony, s, &e.goals.goals, &all).unwrap();
            let b = explore(&e.ceremony, s, &e.goals.goals, &without_attendant).unwrap();
            assert_eq!(a, b, "{id} / {}", s.name);
            let only_attendant = all.clone().roles(&[RoleId::new("A")]).pool(&[]);
            let c = explore(&e.ceremony, s, &e.goals.goals, &only_attendant).unwrap();
            assert_eq!(c.stats.vectors_examined, 1);
        }
    }
}

#[test]
fn honest_scenarios_have_no_baseline_violation() {
    for e in corpus() {
        let cfg = ExplorationConfig::new(1).pool(&e.goals.capability_pool);
        let found = explore(&e.ceremony, e.honest(), &e.goals.goals, &cfg).unwrap();
        assert!(
            found
                .violations
                .iter()
                .all(|v| !(v.mutations.is_empty() && v.capabilities.is_empty())),
            "{} reports a violation of the compliant run",
            e.id
        );
    }
}

#[test]
fn feature_symbols_round_trip() {
    for s in ["✓", "✗", "~", "∅", "✓?", "✗?", "~?"] {
        let sym: FeatureSymbol = s.parse().unwrap();
        assert_eq!(sym.to_string(), s);
        let json = serde_json::to_string(&sym).unwrap();
        assert_eq!(serde_json::from_str::<FeatureSymbol>(&json).unwrap(), sym);
    }
    assert!("∅?".parse::<FeatureSymbol>().is_err());
}

#[test]
fn scenarios_round_trip_through_json() {
    for e in corpus() {
        for s in &e.scenarios {
            let json = serde_json::to_string(s).unwrap();
            assert_eq!(&serde_json::from_str::<Scenario>(&json).unwrap(), s);
        }
    }
}

#[test]
fn attendant_burden_falls_across_boarding_versions() {
    let count = |id: &str| {
        let e = corpus().iter().find(|e| e.id == id).unwrap();
        e.ceremony
            .role_burden(&RoleId::new("A"))
            .unwrap()
            .check_count
    };
    let counts: Vec<usize> = [
        "flight-boarding-i",
        "flight-boarding-ii",
        "flight-boarding-iii",
        "flight-boarding-iv",
    ]
    .iter()
    .map(|id| count(id))
    .collect();
    assert!(counts.windows(2).all(|w| w[0] >= w[1]), "{counts:?}");
    assert_eq!(counts[2..], [0, 0]);
}
