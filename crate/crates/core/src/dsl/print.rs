use std::fmt::Write;

use super::lexer::is_ident_char;
use super::DslError;
use crate::model::{Activity, Ceremony, Condition, Element, ElementRef, RoleKind, SetRule, Step};
use crate::term::Term;

const RESERVED: [&str; 7] = ["_", "check", "set", "dictated", "if", "then", "else"];

fn bare_ok(s: &str) -> bool {
    !s.is_empty() && s.chars().all(is_ident_char) && !s.contains("->") && !RESERVED.contains(&s)
}

fn quote(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        if matches!(c, '"' | '\\') {
            out.push('\\');
        }
        out.push(c);
    }
    out.push('"');
    out
}

fn symbol(s: &str, is_role: &dyn Fn(&str) -> bool) -> String {
    if bare_ok(s) && !is_role(s) {
        s.to_string()
    } else {
        quote(s)
    }
}

fn write_term(out: &mut String, t: &Term, is_role: &dyn Fn(&str) -> bool) {
    match t {
        Term::Atom(a) => out.push_str(&symbol(a, is_role)),
        Term::Role(r) => out.push_str(r.as_str()),
        Term::Hidden { func, arity } => {
            out.push_str(&symbol(func, &|_| false));
            out.push('(');
            out.push_str(&vec!["_"; (*arity).max(1)].join(", "));
            out.push(')');
        }
        Term::App { func, args } => {
            out.push_str(&symbol(func, &|_| false));
            out.push('(');
            for (i, a) in args.iter().enumerate() {
                if i > 0 {
                    out.push_str(", ");
                }
                write_term(out, a, is_role);
            }
            out.push(')');
        }
    }
}

/// Source form of a term, quoting atoms that would otherwise read as roles.
pub fn term_source(t: &Term, is_role: &dyn Fn(&str) -> bool) -> String {
    let mut s = String::new();
    write_term(&mut s, t, is_role);
    s
}

fn terms(ts: &[Term], is_role: &dyn Fn(&str) -> bool) -> String {
    ts.iter()
        .map(|t| term_source(t, is_role))
        .collect::<Vec<_>>()
        .join(", ")
}

fn step_line(s: &Step, is_role: &dyn Fn(&str) -> bool) -> String {
    let mut line = format!(
        "step {}: {} -> {} over {}: {}",
        s.index,
        s.sender,
        s.receiver,
        s.channel,
        terms(&s.payload, is_role)
    );
    if let Some(m) = &s.dictated {
        let _ = write!(line, " dictated {m}");
    }
    line
}

fn activity_line(a: &Activity, is_role: &dyn Fn(&str) -> bool) -> String {
    let mut line = format!("do {}: {} {}", a.actor, a.kind, terms(&a.args, is_role));
    if a.is_check {
        line.push_str(" check");
    }
    if let Some(b) = &a.set {
        let _ = write!(line, " set {}", b.var);
        match &b.rule {
            SetRule::Assign(t) => {
                let _ = write!(line, " = {}", term_source(t, is_role));
            }
            SetRule::Conditional {
                condition,
                then,
                otherwise,
            } => {
                let cond = match condition {
                    Condition::Success(label) => format!("success({})", symbol(label, &|_| false)),
                    Condition::Equals(l, r) => {
                        format!("{} = {}", term_source(l, is_role), term_source(r, is_role))
                    }
                };
                let _ = write!(
                    line,
                    " if {cond} then {} else {}",
                    term_source(then, is_role),
                    term_source(otherwise, is_role)
                );
            }
        }
    }
    line
}

/// Canonical source text for a valid ceremony. Output is deterministic and
/// parses back to an equal ceremony.
pub fn serialize(c: &Ceremony) -> Result<String, DslError> {
    if let Some(f) = c.validate().into_iter().next() {
        return Err(DslError::InvalidCeremony(f.message));
    }
    let is_role = |s: &str| c.roles.iter().any(|r| r.id.as_str() == s);
    let mut out = String::new();
    let _ = writeln!(out, "ceremony {} {{", quote(&c.name));
    for r in &c.roles {
        let kind = match r.kind {
            RoleKind::Human => "human",
            RoleKind::Technical => "technical",
        };
        let _ = writeln!(out, "  role {} {kind} {};", r.id, quote(&r.display_name));
    }
    if !c.channels.is_empty() {
        out.push('\n');
    }
    for ch in &c.channels {
        let mut flags = String::new();
        if ch.confidential {
            flags.push_str(" confidential");
        }
        if ch.authenticated {
            flags.push_str(" authenticated");
        }
        let _ = writeln!(
            out,
            "  channel {} {}{flags} between {} {};",
            ch.id,
            ch.medium.keyword(),
            ch.endpoints.0,
            ch.endpoints.1
        );
    }
    if !c.script.is_empty() {
        out.push('\n');
    }
    for e in &c.script {
        let line = match e {
            Element::Step(s) => step_line(s, &is_role),
            Element::Activity(a) => activity_line(a, &is_role),
        };
        let _ = writeln!(out, "  {line};");
    }
    if !c.decisions.is_empty() {
        out.push('\n');
    }
    for d in &c.decisions {
        let at = match d.at {
            ElementRef::Step(n) => n.to_string(),
            ElementRef::Activity(n) => format!("do {n}"),
        };
        let _ = writeln!(out, "  decision {} at {at} {};", d.role, d.class.keyword());
    }
    if !c.artifacts.is_empty() {
        out.push('\n');
    }
    for a in &c.artifacts {
        let mut flags = String::new();
        if a.security_exclusive {
            flags.push_str(" security_exclusive");
        }
        if a.forgeable {
            flags.push_str(" forgeable");
        }
        if let Some(n) = a.length {
            let _ = write!(flags, " length {n}");
        }
        let _ = writeln!(out, "  artifact {} {}{flags};", a.role, quote(&a.name));
    }
    out.push_str("}\n");
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn quotes_atoms_that_collide() {
        let is_role = |s: &str| s == "B";
        assert_eq!(term_source(&Term::atom("B"), &is_role), "\"B\"");
        assert_eq!(term_source(&Term::role("B"), &is_role), "B");
        assert_eq!(term_source(&Term::atom("check"), &is_role), "\"check\"");
        assert_eq!(
            term_source(&Term::atom("https://web.whatsapp.com/"), &is_role),
            "\"https://web.whatsapp.com/\""
        );
    }

    #[test]
    fn invalid_ceremony_is_refused() {
        let mut c = parse("ceremony \"x\" { role H human \"h\"; }").unwrap();
        c.roles.push(c.roles[0].clone());
        assert!(matches!(serialize(&c), Err(DslError::InvalidCeremony(_))));
    }

    #[test]
    fn round_trip_simple() {
        let src = "ceremony \"x\" {\n  role H human \"h\";\n  role S technical \"s\";\n\n  channel n network confidential between H S;\n\n  step 1: H -> S over n: \"S\", f(S, a);\n  do S: SET v set v if a = f(S, a) then ok else \"else\";\n}\n";
        let c = parse(src).unwrap();
        let text = serialize(&c).unwrap();
        assert_eq!(text, src);
        assert_eq!(parse(&text).unwrap(), c);
    }
}
