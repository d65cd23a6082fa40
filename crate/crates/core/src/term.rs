//! Uninterpreted symbolic terms.

use std::cmp::Ordering;
use std::fmt;
use std::hash::{Hash, Hasher};

/// Identifier of a ceremony participant, e.g. `H`, `P`, `DB`.
#[derive(
    Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize,
)]
#[serde(transparent)]
pub struct RoleId(pub String);

impl RoleId {
    pub fn new(id: impl Into<String>) -> Self {
        RoleId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for RoleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for RoleId {
    fn from(s: &str) -> Self {
        RoleId(s.to_string())
    }
}

/// A symbolic value exchanged or inspected during a ceremony.
///
/// `Hidden` is the parameter-hiding notation `f(_)`: it names the shape of a
/// term without its content. Two hidden terms are equal iff their function
/// names are equal; the recorded arity only matters for printing.
#[derive(Clone, Debug)]
pub enum Term {
    Atom(String),
    App { func: String, args: Vec<Term> },
    Role(RoleId),
    Hidden { func: String, arity: usize },
}

impl Term {
    pub fn atom(name: impl Into<String>) -> Term {
        Term::Atom(name.into())
    }

    pub fn app(func: impl Into<String>, args: Vec<Term>) -> Term {
        Term::App {
            func: func.into(),
            args,
        }
    }

    pub fn role(id: impl Into<String>) -> Term {
        Term::Role(RoleId(id.into()))
    }

    pub fn hidden(func: impl Into<String>, arity: usize) -> Term {
        Term::Hidden {
            func: func.into(),
            arity,
        }
    }

    /// Head symbol: atom name, function name or role id.
    pub fn head(&self) -> &str {
        match self {
            Term::Atom(a) => a,
            Term::App { func, .. } | Term::Hidden { func, .. } => func,
            Term::Role(r) => r.as_str(),
        }
    }

    pub fn as_atom(&self) -> Option<&str> {
        match self {
            Term::Atom(a) => Some(a),
            _ => None,
        }
    }

    pub fn contains_hidden(&self) -> bool {
        match self {
            Term::Hidden { .. } => true,
            Term::App { args, .. } => args.iter().any(Term::contains_hidden),
            _ => false,
        }
    }

    /// True if `needle` occurs in `self` (reflexively).
    pub fn contains(&self, needle: &Term) -> bool {
        if self == needle {
            return true;
        }
        match self {
            Term::App { args, .. } => args.iter().any(|a| a.contains(needle)),
            _ => false,
        }
    }

    /// Pre-order walk over all subterms.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a Term)) {
        f(self);
        if let Term::App { args, .. } = self {
            for a in args {
                a.visit(f);
            }
        }
    }

    /// Rename every leaf symbol by appending `marker`. Function symbols are
    /// kept so the shape of the term survives.
    pub fn mark_leaves(&self, marker: &str) -> Term {
        match self {
            Term::Atom(a) => Term::Atom(format!("{a}{marker}")),
            Term::Role(r) => Term::Atom(format!("{r}{marker}")),
            Term::App { func, args } => Term::App {
                func: func.clone(),
                args: args.iter().map(|a| a.mark_leaves(marker)).collect(),
            },
            Term::Hidden { .. } => self.clone(),
        }
    }

    /// Turn atoms naming a role into role references.
    pub fn resolve_roles(&self, is_role: &dyn Fn(&str) -> bool) -> Term {
        match self {
            Term::Atom(a) if is_role(a) => Term::Role(RoleId(a.clone())),
            Term::App { func, args } => Term::App {
                func: func.clone(),
                args: args.iter().map(|a| a.resolve_roles(is_role)).collect(),
            },
            _ => self.clone(),
        }
    }

    fn rank(&self) -> u8 {
        match self {
            Term::Atom(_) => 0,
            Term::App { .. } => 1,
            Term::Role(_) => 2,
            Term::Hidden { .. } => 3,
        }
    }
}

impl PartialEq for Term {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Term {}

impl PartialOrd for Term {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Term {
    fn cmp(&self, other: &Self) -> Ordering {
        match (self, other) {
            (Term::Atom(a), Term::Atom(b)) => a.cmp(b),
            (Term::App { func: f, args: a }, Term::App { func: g, args: b }) => {
                f.cmp(g).then_with(|| a.cmp(b))
            }
            (Term::Role(a), Term::Role(b)) => a.cmp(b),
            (Term::Hidden { func: f, .. }, Term::Hidden { func: g, .. }) => f.cmp(g),
            _ => self.rank().cmp(&other.rank()),
        }
    }
}

impl Hash for Term {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.rank().hash(state);
        match self {
            Term::Atom(a) => a.hash(state),
            Term::App { func, args } => {
                func.hash(state);
                args.hash(state);
            }
            Term::Role(r) => r.hash(state),
            Term::Hidden { func, .. } => func.hash(state),
        }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Term::Atom(a) => f.write_str(a),
            Term::Role(r) => write!(f, "{r}"),
            Term::App { func, args } => {
                write!(f, "{func}(")?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
            Term::Hidden { func, arity } => {
                write!(f, "{func}(")?;
                for i in 0..(*arity).max(1) {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    f.write_str("_")?;
                }
                f.write_str(")")
            }
        }
    }
}

/// Display a term list as `a, b, c`.
pub fn join_terms(terms: &[Term]) -> String {
    terms
        .iter()
        .map(|t| t.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Terms serialize as their source text. Role references come back as plain
/// atoms and are re-resolved against the ceremony that uses them.
impl serde::Serialize for Term {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&crate::dsl::term_source(self, &|_| false))
    }
}

impl<'de> serde::Deserialize<'de> for Term {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Term, D::Error> {
        let text = String::deserialize(d)?;
        crate::dsl::parse_term(&text).map_err(serde::de::Error::custom)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hidden_terms_compare_by_name_only() {
        assert_eq!(Term::hidden("QR", 1), Term::hidden("QR", 2));
        assert_ne!(Term::hidden("QR", 1), Term::hidden("pass", 1));
        assert_ne!(
            Term::hidden("QR", 1),
            Term::app("QR", vec![Term::atom("x")])
        );
    }

    #[test]
    fn marking_keeps_shape() {
        let t = Term::app("host_key", vec![Term::role("S")]);
        let m = t.mark_leaves("@adv");
        assert_eq!(m.head(), "host_key");
        assert_eq!(m.to_string(), "host_key(S@adv)");
        assert_ne!(m, t);
    }

    #[test]
    fn containment_is_structural() {
        let url = Term::app("url", vec![Term::atom("file")]);
        let referral = Term::app("referrer", vec![url.clone()]);
        assert!(referral.contains(&url));
        assert!(!url.contains(&referral));
    }
}
