use std::collections::BTreeSet;

use super::lexer::{tokenize, Tok, Token};
use super::{ParseError, SourceSpan};
use crate::model::{
    Activity, ActivityKind, Artifact, Ceremony, Channel, Condition, DecisionClass, DecisionPoint,
    Element, ElementRef, Medium, Role, RoleKind, SetBinding, SetRule, Site, Step,
};
use crate::term::{RoleId, Term};

/// Statement positions, kept apart from the ceremony so equality ignores them.
#[derive(Default)]
struct Spans {
    roles: Vec<SourceSpan>,
    channels: Vec<SourceSpan>,
    elements: Vec<SourceSpan>,
    decisions: Vec<SourceSpan>,
    artifacts: Vec<SourceSpan>,
    ceremony: Option<SourceSpan>,
}

impl Spans {
    fn of(&self, site: Site) -> Option<&SourceSpan> {
        match site {
            Site::Ceremony => self.ceremony.as_ref(),
            Site::Role(i) => self.roles.get(i),
            Site::Channel(i) => self.channels.get(i),
            Site::Element(i) => self.elements.get(i),
            Site::Decision(i) => self.decisions.get(i),
            Site::Artifact(i) => self.artifacts.get(i),
        }
    }
}

struct Parser<'a> {
    toks: Vec<Token>,
    pos: usize,
    file: &'a str,
    roles: BTreeSet<String>,
}

type PResult<T> = Result<T, ParseError>;

impl<'a> Parser<'a> {
    fn new(text: &str, file: &'a str) -> PResult<Self> {
        let toks = tokenize(text, file)?;
        Ok(Parser {
            toks,
            pos: 0,
            file,
            roles: BTreeSet::new(),
        })
    }

    fn span_at(&self, (line, column): (usize, usize)) -> SourceSpan {
        SourceSpan {
            file: self.file.to_string(),
            line,
            column,
        }
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.pos].tok
    }

    fn peek_ident(&self) -> Option<&str> {
        match self.peek() {
            Tok::Ident(s) => Some(s),
            _ => None,
        }
    }

    fn bump(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn here(&self) -> SourceSpan {
        self.span_at(self.toks[self.pos].start)
    }

    /// Error for a missing token inside a statement. When the offending token
    /// starts on a later line, the statement was cut short; blame the end of
    /// the previous token instead.
    fn unexpected(&self, expected: &[&str]) -> ParseError {
        let found = &self.toks[self.pos];
        let at = match (&found.tok, self.pos.checked_sub(1)) {
            (Tok::Eof, _) | (_, None) => found.start,
            (_, Some(prev)) => {
                let prev = &self.toks[prev];
                if found.start.0 > prev.end.0 {
                    (prev.end.0, prev.end.1 + 1)
                } else {
                    found.start
                }
            }
        };
        ParseError {
            span: self.span_at(at),
            message: format!("expected {}, found {}", expected.join(" or "), found.tok),
            expected: expected.iter().map(|s| s.to_string()).collect(),
        }
    }

    fn expect(&mut self, tok: Tok, name: &str) -> PResult<Token> {
        if *self.peek() == tok {
            Ok(self.bump())
        } else {
            Err(self.unexpected(&[name]))
        }
    }

    fn keyword(&mut self, kw: &str) -> PResult<()> {
        if self.peek_ident() == Some(kw) {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(&[kw]))
        }
    }

    fn eat_keyword(&mut self, kw: &str) -> bool {
        if self.peek_ident() == Some(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn ident(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Tok::Ident(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn string(&mut self, what: &str) -> PResult<String> {
        match self.peek() {
            Tok::Str(s) => {
                let s = s.clone();
                self.bump();
                Ok(s)
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn number(&mut self, what: &str) -> PResult<u32> {
        match self.peek() {
            Tok::Ident(s) if s.chars().all(|c| c.is_ascii_digit()) => {
                let n = s.parse().map_err(|_| self.unexpected(&[what]))?;
                self.bump();
                Ok(n)
            }
            _ => Err(self.unexpected(&[what])),
        }
    }

    fn role_id(&mut self) -> PResult<RoleId> {
        self.ident("role").map(RoleId)
    }

    /// Collect declared role ids up front so terms can refer to roles
    /// declared later in the file.
    fn prescan_roles(&mut self) {
        let mut at_statement = true;
        for w in self.toks.windows(2) {
            if at_statement {
                if let (Tok::Ident(kw), Tok::Ident(id)) = (&w[0].tok, &w[1].tok) {
                    if kw == "role" {
                        self.roles.insert(id.clone());
                    }
                }
            }
            at_statement = matches!(w[0].tok, Tok::Semi | Tok::LBrace);
        }
    }

    fn term(&mut self) -> PResult<Term> {
        let (name, quoted) = match self.peek() {
            Tok::Ident(s) => (s.clone(), false),
            Tok::Str(s) => (s.clone(), true),
            _ => return Err(self.unexpected(&["term"])),
        };
        self.bump();
        if *self.peek() != Tok::LParen {
            return Ok(if !quoted && self.roles.contains(&name) {
                Term::Role(RoleId(name))
            } else {
                Term::Atom(name)
            });
        }
        self.bump();
        if self.peek_ident() == Some("_") {
            let mut arity = 0;
            loop {
                self.keyword("_")?;
                arity += 1;
                match self.peek() {
                    Tok::Comma => {
                        self.bump();
                    }
                    Tok::RParen => {
                        self.bump();
                        return Ok(Term::Hidden { func: name, arity });
                    }
                    _ => return Err(self.unexpected(&["`,`", "`)`"])),
                }
            }
        }
        let mut args = vec![self.term()?];
        loop {
            match self.peek() {
                Tok::Comma => {
                    self.bump();
                    args.push(self.term()?);
                }
                Tok::RParen => {
                    self.bump();
                    return Ok(Term::App { func: name, args });
                }
                _ => return Err(self.unexpected(&["`,`", "`)`"])),
            }
        }
    }

    fn terms(&mut self) -> PResult<Vec<Term>> {
        let mut out = vec![self.term()?];
        while *self.peek() == Tok::Comma {
            self.bump();
            out.push(self.term()?);
        }
        Ok(out)
    }

    fn condition(&mut self) -> PResult<Condition> {
        let left = self.term()?;
        if *self.peek() == Tok::Eq {
            self.bump();
            return Ok(Condition::Equals(left, self.term()?));
        }
        match left {
            Term::App { func, args } if func == "success" && args.len() == 1 => {
                match args.into_iter().next() {
                    Some(Term::Atom(label)) => Ok(Condition::Success(label)),
                    _ => Err(self.unexpected(&["`=`"])),
                }
            }
            _ => Err(self.unexpected(&["`=`"])),
        }
    }

    fn ceremony(&mut self) -> PResult<(Ceremony, Spans)> {
        self.prescan_roles();
        let mut spans = Spans::default();
        if self.peek_ident() != Some("ceremony") {
            return Err(ParseError {
                span: self.here(),
                message: format!("expected `ceremony`, found {}", self.peek()),
                expected: vec!["ceremony".into()],
            });
        }
        spans.ceremony = Some(self.here());
        self.bump();
        let name = self.string("ceremony name")?;
        self.expect(Tok::LBrace, "`{`")?;
        let mut c = Ceremony {
            name,
            roles: vec![],
            channels: vec![],
            script: vec![],
            decisions: vec![],
            artifacts: vec![],
        };
        loop {
            let start = self.here();
            let kw = match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    break;
                }
                Tok::Ident(kw) => kw.clone(),
                _ => {
                    return Err(ParseError {
                        span: start,
                        message: format!("expected a declaration or `}}`, found {}", self.peek()),
                        expected: ITEM_KEYWORDS
                            .iter()
                            .map(|s| s.to_string())
                            .chain(["}".into()])
                            .collect(),
                    })
                }
            };
            if !ITEM_KEYWORDS.contains(&kw.as_str()) {
                return Err(ParseError {
                    span: start,
                    message: format!("unknown declaration `{kw}`"),
                    expected: ITEM_KEYWORDS.iter().map(|s| s.to_string()).collect(),
                });
            }
            self.bump();
            match kw.as_str() {
                "role" => {
                    c.roles.push(self.role_decl()?);
                    spans.roles.push(start);
                }
                "channel" => {
                    c.channels.push(self.channel_decl()?);
                    spans.channels.push(start);
                }
                "step" => {
                    c.script.push(Element::Step(self.step_decl()?));
                    spans.elements.push(start);
                }
                "do" => {
                    c.script.push(Element::Activity(self.activity_decl()?));
                    spans.elements.push(start);
                }
                "decision" => {
                    c.decisions.push(self.decision_decl()?);
                    spans.decisions.push(start);
                }
                _ => {
                    c.artifacts.push(self.artifact_decl()?);
                    spans.artifacts.push(start);
                }
            }
            self.expect(Tok::Semi, "`;`")?;
        }
        if *self.peek() != Tok::Eof {
            return Err(ParseError {
                span: self.here(),
                message: format!("unexpected {} after ceremony", self.peek()),
                expected: vec![],
            });
        }
        Ok((c, spans))
    }

    fn role_decl(&mut self) -> PResult<Role> {
        let id = self.role_id()?;
        let kind = match self.peek_ident() {
            Some("human") => RoleKind::Human,
            Some("technical") => RoleKind::Technical,
            _ => return Err(self.unexpected(&["human", "technical"])),
        };
        self.bump();
        let display_name = self.string("display name")?;
        Ok(Role {
            id,
            kind,
            display_name,
        })
    }

    fn channel_decl(&mut self) -> PResult<Channel> {
        let id = self.ident("channel name")?;
        let medium = match self.peek_ident().and_then(Medium::from_keyword) {
            Some(m) => m,
            None => return Err(self.unexpected(&["network", "visual", "optical", "face_to_face"])),
        };
        self.bump();
        let (mut confidential, mut authenticated) = (false, false);
        loop {
            if !confidential && self.eat_keyword("confidential") {
                confidential = true;
            } else if !authenticated && self.eat_keyword("authenticated") {
                authenticated = true;
            } else {
                break;
            }
        }
        if self.peek_ident() != Some("between") {
            return Err(self.unexpected(&["confidential", "authenticated", "between"]));
        }
        self.bump();
        let a = self.role_id()?;
        let b = self.role_id()?;
        Ok(Channel {
            id,
            endpoints: (a, b),
            medium,
            confidential,
            authenticated,
        })
    }

    fn step_decl(&mut self) -> PResult<Step> {
        let index = self.number("step number")?;
        self.expect(Tok::Colon, "`:`")?;
        let sender = self.role_id()?;
        self.expect(Tok::Arrow, "`->`")?;
        let receiver = self.role_id()?;
        self.keyword("over")?;
        let channel = self.ident("channel")?;
        self.expect(Tok::Colon, "`:`")?;
        let payload = self.terms()?;
        let dictated = if self.eat_keyword("dictated") {
            Some(self.ident("meta-activity name")?)
        } else {
            None
        };
        if *self.peek() != Tok::Semi {
            let mut exp = vec!["`,`", "`;`"];
            if dictated.is_none() {
                exp.insert(1, "dictated");
            }
            return Err(self.unexpected(&exp));
        }
        Ok(Step {
            index,
            sender,
            receiver,
            channel,
            payload,
            dictated,
        })
    }

    fn activity_decl(&mut self) -> PResult<Activity> {
        let actor = self.role_id()?;
        self.expect(Tok::Colon, "`:`")?;
        let kind = match self.peek_ident().and_then(ActivityKind::from_keyword) {
            Some(k) => k,
            None => return Err(self.unexpected(&["activity kind"])),
        };
        self.bump();
        let args = self.terms()?;
        let is_check = self.eat_keyword("check");
        let set = if self.eat_keyword("set") {
            let var = self.ident("variable")?;
            let rule = if *self.peek() == Tok::Eq {
                self.bump();
                SetRule::Assign(self.term()?)
            } else if self.eat_keyword("if") {
                let condition = self.condition()?;
                self.keyword("then")?;
                let then = self.term()?;
                self.keyword("else")?;
                let otherwise = self.term()?;
                SetRule::Conditional {
                    condition,
                    then,
                    otherwise,
                }
            } else {
                return Err(self.unexpected(&["`=`", "if"]));
            };
            Some(SetBinding { var, rule })
        } else {
            None
        };
        if *self.peek() != Tok::Semi {
            let mut exp = vec!["`;`"];
            if set.is_none() {
                exp.insert(0, "set");
                if !is_check {
                    exp.insert(0, "check");
                    exp.insert(0, "`,`");
                }
            }
            return Err(self.unexpected(&exp));
        }
        Ok(Activity {
            actor,
            kind,
            args,
            is_check,
            set,
        })
    }

    fn decision_decl(&mut self) -> PResult<DecisionPoint> {
        let role = self.role_id()?;
        self.keyword("at")?;
        let at = if self.eat_keyword("do") {
            ElementRef::Activity(self.number("activity number")?)
        } else {
            ElementRef::Step(self.number("step number or `do`")?)
        };
        let class = match self.peek_ident().and_then(DecisionClass::from_keyword) {
            Some(c) => c,
            None => {
                return Err(self.unexpected(&["initiate_abort", "free", "constrained", "forced"]))
            }
        };
        self.bump();
        Ok(DecisionPoint { role, at, class })
    }

    fn artifact_decl(&mut self) -> PResult<Artifact> {
        let role = self.role_id()?;
        let name = self.string("artifact name")?;
        let (mut security_exclusive, mut forgeable, mut length) = (false, false, None);
        loop {
            if !security_exclusive && self.eat_keyword("security_exclusive") {
                security_exclusive = true;
            } else if !forgeable && self.eat_keyword("forgeable") {
                forgeable = true;
            } else if length.is_none() && self.eat_keyword("length") {
                length = Some(self.number("length")?);
            } else {
                break;
            }
        }
        Ok(Artifact {
            role,
            name,
            security_exclusive,
            forgeable,
            length,
        })
    }
}

const ITEM_KEYWORDS: [&str; 6] = ["role", "channel", "step", "do", "decision", "artifact"];

/// Parse ceremony source text. Structural problems are reported as errors
/// at the offending statement.
pub fn parse(text: &str) -> Result<Ceremony, ParseError> {
    parse_named(text, "<input>")
}

/// As [`parse`], with `file` recorded in error spans.
pub fn parse_named(text: &str, file: &str) -> Result<Ceremony, ParseError> {
    let mut p = Parser::new(text, file)?;
    let (c, spans) = p.ceremony()?;
    if let Some(f) = crate::model::validate_ceremony(&c).into_iter().next() {
        let span = spans.of(f.site).cloned().unwrap_or(SourceSpan {
            file: file.to_string(),
            line: 1,
            column: 1,
        });
        return Err(ParseError {
            span,
            message: f.message,
            expected: vec![],
        });
    }
    Ok(c)
}

/// Parse a standalone term such as `flight_number(G, current_time)`. Role
/// references are not resolved.
pub fn parse_term(text: &str) -> Result<Term, ParseError> {
    let mut p = Parser::new(text, "<term>")?;
    let t = p.term()?;
    if *p.peek() != Tok::Eof {
        return Err(p.unexpected(&["end of term"]));
    }
    Ok(t)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_ceremony() {
        let c = parse("ceremony \"solo\" { role H human \"human\"; }").unwrap();
        assert_eq!(c.roles.len(), 1);
        assert!(c.script.is_empty());
    }

    #[test]
    fn missing_over_clause() {
        let src = "ceremony \"x\" {\n role H human \"h\";\n role S technical \"s\";\n channel n network between H S;\n step 1: H -> S n: hi;\n}\n";
        let e = parse(src).unwrap_err();
        assert_eq!(e.span.line, 5);
        assert_eq!(e.expected, vec!["over".to_string()]);
    }

    #[test]
    fn missing_semicolon_blames_previous_line() {
        let src = "ceremony \"x\" {\n role H human \"h\"\n role S technical \"s\";\n}\n";
        let e = parse(src).unwrap_err();
        assert_eq!(e.span.line, 2, "{e}");
    }

    #[test]
    fn unknown_role_reports_statement() {
        let src = "ceremony \"x\" {\n role H human \"h\";\n role S technical \"s\";\n channel n network between H S;\n step 1: H -> X over n: hi;\n}\n";
        let e = parse(src).unwrap_err();
        assert_eq!(e.span.line, 5);
        assert!(e.message.contains("unknown role X"), "{e}");
    }

    #[test]
    fn terms_resolve_roles_and_hidden() {
        let src = "ceremony \"x\" {\n role H human \"h\";\n role B technical \"b\";\n channel v visual between H B;\n step 1: B -> H over v: QR(pass(B));\n do H: RECOGNISE QR(_) check;\n}\n";
        let c = parse(src).unwrap();
        let step = c.script[0].as_step().unwrap();
        assert_eq!(
            step.payload[0],
            Term::app("QR", vec![Term::app("pass", vec![Term::role("B")])])
        );
        let act = c.script[1].as_activity().unwrap();
        assert_eq!(act.args[0], Term::hidden("QR", 1));
    }

    #[test]
    fn standalone_terms() {
        assert_eq!(
            parse_term("flight&passenger(_, _)").unwrap(),
            Term::hidden("flight&passenger", 2)
        );
        assert!(parse_term("f(a,").is_err());
    }
}
