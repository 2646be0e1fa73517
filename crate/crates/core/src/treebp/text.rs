//! Parenthesized text form: `node := "(v" ["!"] { " [" s s' "]" node } ")"`
//! with signs `+`/`-`, e.g. `(v [-+](v))`. A `!` marks a node.

use std::fmt;
use std::str::FromStr;

use super::{ClauseType, TreeFormula};
use crate::error::{Error, Result};
use crate::Sign;

impl fmt::Display for TreeFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        enum Item<'a> {
            Node(&'a TreeFormula),
            Edge(ClauseType, &'a TreeFormula),
            Close,
        }
        let mut stack = vec![Item::Node(self)];
        while let Some(item) = stack.pop() {
            let node = match item {
                Item::Close => {
                    f.write_str(")")?;
                    continue;
                }
                Item::Edge(ct, node) => {
                    write!(f, " {ct}")?;
                    node
                }
                Item::Node(node) => node,
            };
            f.write_str(if node.is_marked() { "(v!" } else { "(v" })?;
            stack.push(Item::Close);
            for (ct, c) in node.children().iter().rev() {
                stack.push(Item::Edge(*ct, c));
            }
        }
        Ok(())
    }
}

struct Frame {
    marked: bool,
    children: Vec<(ClauseType, TreeFormula)>,
    pending: Option<ClauseType>,
}

struct Cursor<'a> {
    chars: std::iter::Peekable<std::str::CharIndices<'a>>,
}

impl Cursor<'_> {
    fn skip_ws(&mut self) {
        while self.chars.next_if(|(_, c)| c.is_whitespace()).is_some() {}
    }

    fn expect(&mut self, want: char) -> Result<()> {
        match self.chars.next() {
            Some((_, c)) if c == want => Ok(()),
            Some((i, c)) => Err(err(format!("expected `{want}` at offset {i}, found `{c}`"))),
            None => Err(err(format!("expected `{want}`, found end of input"))),
        }
    }

    fn sign(&mut self) -> Result<Sign> {
        match self.chars.next() {
            Some((i, c)) => Sign::from_symbol(c)
                .ok_or_else(|| err(format!("expected a sign at offset {i}, found `{c}`"))),
            None => Err(err("expected a sign, found end of input")),
        }
    }

    /// Consumes `(v` and an optional `!`.
    fn open(&mut self) -> Result<Frame> {
        self.skip_ws();
        self.expect('(')?;
        self.expect('v')?;
        let marked = self.chars.next_if(|&(_, c)| c == '!').is_some();
        Ok(Frame {
            marked,
            children: Vec::new(),
            pending: None,
        })
    }
}

fn err(msg: impl Into<String>) -> Error {
    Error::Parse {
        line: 1,
        msg: msg.into(),
    }
}

impl FromStr for TreeFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut cur = Cursor {
            chars: s.char_indices().peekable(),
        };
        let mut stack = vec![cur.open()?];
        loop {
            cur.skip_ws();
            match cur.chars.next() {
                Some((_, '[')) => {
                    let parent = cur.sign()?;
                    let child = cur.sign()?;
                    cur.expect(']')?;
                    stack.last_mut().expect("stack is nonempty").pending =
                        Some(ClauseType::new(parent, child));
                    stack.push(cur.open()?);
                }
                Some((_, ')')) => {
                    let frame = stack.pop().expect("stack is nonempty");
                    let node = TreeFormula::with_mark(frame.children, frame.marked);
                    match stack.last_mut() {
                        Some(parent) => {
                            let ct = parent.pending.take().expect("a child follows an edge");
                            parent.children.push((ct, node));
                        }
                        None => {
                            cur.skip_ws();
                            if let Some((i, c)) = cur.chars.next() {
                                return Err(err(format!("trailing `{c}` at offset {i}")));
                            }
                            return Ok(node);
                        }
                    }
                }
                Some((i, c)) => return Err(err(format!("unexpected `{c}` at offset {i}"))),
                None => return Err(err("unbalanced parentheses")),
            }
        }
    }
}
