use crate::model::{Activity, Ceremony, Condition, Element, SetRule, Step};
use crate::term::join_terms;

struct Canvas {
    centers: Vec<usize>,
    lines: Vec<String>,
}

impl Canvas {
    fn lifelines(&self) -> Vec<char> {
        let width = self.centers.last().map(|c| c + 1).unwrap_or(0);
        let mut row = vec![' '; width];
        for &c in &self.centers {
            row[c] = '|';
        }
        row
    }

    fn overlay(row: &mut Vec<char>, at: usize, text: &str) {
        for (i, ch) in text.chars().enumerate() {
            let x = at + i;
            if x >= row.len() {
                row.resize(x + 1, ' ');
            }
            row[x] = ch;
        }
    }

    fn push(&mut self, row: Vec<char>) {
        let s: String = row.into_iter().collect();
        self.lines.push(s.trim_end().to_string());
    }

    fn centered(&mut self, labels: &[String]) {
        let mut row = vec![' '; self.centers.last().map(|c| c + 1).unwrap_or(0)];
        for (label, &c) in labels.iter().zip(&self.centers) {
            let len = label.chars().count();
            Self::overlay(&mut row, c.saturating_sub(len / 2), label);
        }
        self.push(row);
    }

    fn arrow(&mut self, from: usize, to: usize, label: &str) {
        let (lo, hi) = (from.min(to), from.max(to));
        let mut row = self.lifelines();
        Self::overlay(&mut row, lo + 2, label);
        self.push(row);
        let mut row = self.lifelines();
        for x in row.iter_mut().take(hi).skip(lo + 1) {
            *x = '-';
        }
        if to > from {
            row[hi - 1] = '>';
        } else {
            row[lo + 1] = '<';
        }
        self.push(row);
    }

    fn boxed(&mut self, at: usize, text: &str) {
        let mut row = self.lifelines();
        Self::overlay(&mut row, at, &format!("[{text}]"));
        self.push(row);
    }
}

fn step_label(s: &Step) -> String {
    match &s.dictated {
        Some(m) => format!("{}. {m} {}", s.index, join_terms(&s.payload)),
        None => format!("{}. {}", s.index, join_terms(&s.payload)),
    }
}

fn activity_label(a: &Activity) -> String {
    let mut text = format!("{} {}", a.kind, join_terms(&a.args));
    if let Some(b) = &a.set {
        match &b.rule {
            SetRule::Assign(t) => text.push_str(&format!(" := {t}")),
            SetRule::Conditional {
                condition,
                then,
                otherwise,
            } => {
                let cond = match condition {
                    Condition::Success(l) => format!("success({l})"),
                    Condition::Equals(l, r) => format!("{l} = {r}"),
                };
                text.push_str(&format!(", if {cond} then {then} else {otherwise}"));
            }
        }
    }
    text
}

/// ASCII message sequence chart: one lifeline per role in declaration order,
/// numbered arrows for steps, `[...]` boxes for local activities.
pub fn render_msc(c: &Ceremony) -> String {
    let headers: Vec<String> = c.roles.iter().map(|r| r.id.to_string()).collect();
    let names: Vec<String> = c
        .roles
        .iter()
        .map(|r| format!("({})", r.display_name))
        .collect();
    let spacing = names
        .iter()
        .chain(&headers)
        .map(|s| s.chars().count() + 3)
        .max()
        .unwrap_or(0)
        .max(16);
    let centers: Vec<usize> = (0..c.roles.len())
        .map(|i| spacing / 2 + i * spacing)
        .collect();
    let column = |id: &crate::term::RoleId| {
        c.roles
            .iter()
            .position(|r| &r.id == id)
            .map(|i| centers[i])
            .unwrap_or(0)
    };

    let mut canvas = Canvas {
        centers: centers.clone(),
        lines: vec![format!("ceremony {}", c.name)],
    };
    canvas.centered(&headers);
    canvas.centered(&names);
    let life = canvas.lifelines();
    canvas.push(life);
    for e in &c.script {
        match e {
            Element::Step(s) => {
                canvas.arrow(column(&s.sender), column(&s.receiver), &step_label(s))
            }
            Element::Activity(a) => canvas.boxed(column(&a.actor), &activity_label(a)),
        }
    }
    let life = canvas.lifelines();
    canvas.push(life);
    canvas.centered(&headers);
    let mut out = canvas.lines.join("\n");
    out.push('\n');
    out
}

/// Number of arrow lines in a rendered chart.
pub fn arrow_count(chart: &str) -> usize {
    chart
        .lines()
        .filter(|l| l.contains("->|") || l.contains("|<-"))
        .count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsl::parse;

    #[test]
    fn single_column_no_arrows() {
        let c = parse("ceremony \"solo\" { role H human \"human\"; }").unwrap();
        let chart = render_msc(&c);
        assert_eq!(arrow_count(&chart), 0);
        assert!(chart.lines().nth(1).unwrap().trim() == "H");
    }

    #[test]
    fn arrows_point_both_ways() {
        let src = "ceremony \"x\" { role H human \"h\"; role S technical \"s\"; channel n network between H S; step 1: H -> S over n: a; do S: STORE a; step 2: S -> H over n: b; }";
        let chart = render_msc(&parse(src).unwrap());
        assert_eq!(arrow_count(&chart), 2);
        assert!(chart.contains("->|"));
        assert!(chart.contains("|<-"));
        assert!(chart.contains("[STORE a]"));
    }
}
