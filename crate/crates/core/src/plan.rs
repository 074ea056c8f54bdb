//! Plan text grammar shared by transcripts and agents.
//!
//! ```text
//! plan   := "wait" | action (("," | ";") action)*
//! action := ("stack" | "unstack") ws box_id
//! ```
//!
//! Keywords are case-insensitive; box ids are `[A-Za-z0-9_-]+`.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::model::{is_id_char, Action};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("plan parse error at byte {offset}: {message}")]
pub struct PlanParseError {
    pub offset: usize,
    pub message: String,
}

/// An ordered action list; a plan that waits is exactly `[Wait]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Plan {
    pub actions: Vec<Action>,
}

impl Plan {
    pub fn wait() -> Self {
        Plan {
            actions: vec![Action::Wait],
        }
    }

    /// Empty action lists render as `wait`.
    pub fn from_actions(actions: Vec<Action>) -> Self {
        if actions.is_empty() {
            Plan::wait()
        } else {
            Plan { actions }
        }
    }

    pub fn is_wait(&self) -> bool {
        self.actions.iter().all(|a| *a == Action::Wait)
    }

    /// Non-wait actions.
    pub fn moves(&self) -> impl Iterator<Item = &Action> {
        self.actions.iter().filter(|a| **a != Action::Wait)
    }
}

impl fmt::Display for Plan {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_wait() {
            return f.write_str("wait");
        }
        for (i, a) in self.moves().enumerate() {
            if i > 0 {
                f.write_str("; ")?;
            }
            write!(f, "{a}")?;
        }
        Ok(())
    }
}

struct Cursor<'a> {
    s: &'a str,
    pos: usize,
    base: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<char> {
        self.s[self.pos..].chars().next()
    }

    fn skip_ws(&mut self) -> usize {
        let start = self.pos;
        while let Some(c) = self.peek().filter(|c| c.is_whitespace()) {
            self.pos += c.len_utf8();
        }
        self.pos - start
    }

    fn take_while(&mut self, f: impl Fn(char) -> bool) -> &'a str {
        let start = self.pos;
        while let Some(c) = self.peek().filter(|c| f(*c)) {
            self.pos += c.len_utf8();
        }
        &self.s[start..self.pos]
    }

    fn err(&self, message: impl Into<String>) -> PlanParseError {
        PlanParseError {
            offset: self.base + self.pos,
            message: message.into(),
        }
    }
}

fn parse_exact(s: &str, base: usize) -> Result<Plan, PlanParseError> {
    let mut c = Cursor { s, pos: 0, base };
    c.skip_ws();
    if c.pos == s.len() {
        return Err(c.err("empty plan"));
    }
    let mut actions = Vec::new();
    loop {
        let at = c.pos;
        let word = c.take_while(|ch| ch.is_ascii_alphabetic());
        let kind = word.to_ascii_lowercase();
        if kind == "wait" && actions.is_empty() {
            c.skip_ws();
            if c.pos == s.len() {
                return Ok(Plan::wait());
            }
            return Err(c.err("`wait` must stand alone"));
        }
        if kind != "stack" && kind != "unstack" {
            c.pos = at;
            return Err(c.err(format!(
                "expected `stack`, `unstack` or `wait`, found {word:?}"
            )));
        }
        if c.skip_ws() == 0 {
            return Err(c.err("expected whitespace before box id"));
        }
        let id = c.take_while(is_id_char);
        if id.is_empty() {
            return Err(c.err("expected box id"));
        }
        actions.push(if kind == "stack" {
            Action::Stack(id.to_string())
        } else {
            Action::Unstack(id.to_string())
        });
        c.skip_ws();
        match c.peek() {
            None => return Ok(Plan { actions }),
            Some(',') | Some(';') => {
                c.pos += 1;
                c.skip_ws();
            }
            Some(ch) => return Err(c.err(format!("unexpected {ch:?}"))),
        }
    }
}

/// Byte ranges of the bodies of ``` fenced blocks.
fn fenced_blocks(text: &str) -> Vec<(usize, usize)> {
    let mut blocks = Vec::new();
    let mut open: Option<usize> = None;
    let mut offset = 0;
    for line in text.split_inclusive('\n') {
        if line.trim_start().starts_with("```") {
            match open.take() {
                Some(start) => blocks.push((start, offset)),
                None => open = Some(offset + line.len()),
            }
        }
        offset += line.len();
    }
    blocks
}

fn last_matching_line(text: &str, base: usize) -> Option<Plan> {
    let mut offset = 0;
    let mut found = None;
    for line in text.split_inclusive('\n') {
        if !line.trim_start().starts_with("```") {
            if let Ok(p) = parse_exact(line, base + offset) {
                found = Some(p);
            }
        }
        offset += line.len();
    }
    found
}

/// Parses a whole reply; a single fenced block may wrap the plan, in which
/// case its last grammar-valid line is taken.
pub fn parse_plan(text: &str) -> Result<Plan, PlanParseError> {
    let err = match parse_exact(text, 0) {
        Ok(p) => return Ok(p),
        Err(e) => e,
    };
    match fenced_blocks(text).as_slice() {
        [(start, end)] => last_matching_line(&text[*start..*end], *start).ok_or(err),
        _ => Err(err),
    }
}

/// Accepts the last grammar-valid line anywhere in the reply.
pub fn parse_plan_lenient(text: &str) -> Result<Plan, PlanParseError> {
    parse_plan(text).or_else(|e| last_matching_line(text, 0).ok_or(e))
}
