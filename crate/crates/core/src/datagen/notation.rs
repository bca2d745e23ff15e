//! Compact tree notation used by template banks:
//! `Sequence[a, b]`, `Fallback[a, b]`, `Leaf` and `Leaf(key=value, …)`.
//! Leaf kinds come from the whitelist.

use crate::bt_model::{BtNode, LeafKind, NodeWhitelist};

pub fn parse_tree(src: &str, whitelist: &NodeWhitelist) -> Result<BtNode, String> {
    let mut p = Parser { src, pos: 0, whitelist };
    let node = p.node()?;
    p.skip_ws();
    if p.pos != src.len() {
        return Err(format!("trailing input at byte {}", p.pos));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    whitelist: &'a NodeWhitelist,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.peek().is_some_and(char::is_whitespace) {
            self.pos += 1;
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn eat(&mut self, c: char) -> bool {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), String> {
        if self.eat(c) {
            Ok(())
        } else {
            Err(format!("expected `{c}` at byte {}", self.pos))
        }
    }

    fn word(&mut self) -> Result<&str, String> {
        self.skip_ws();
        let start = self.pos;
        while self
            .peek()
            .is_some_and(|c| c.is_alphanumeric() || matches!(c, '_' | '-' | '{' | '}' | '.'))
        {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(format!("expected a name at byte {start}"));
        }
        Ok(&self.src[start..self.pos])
    }

    fn node(&mut self) -> Result<BtNode, String> {
        let name = self.word()?.to_string();
        if name == "Sequence" || name == "Fallback" {
            self.expect('[')?;
            let mut children = vec![self.node()?];
            while self.eat(',') {
                children.push(self.node()?);
            }
            self.expect(']')?;
            return Ok(if name == "Sequence" {
                BtNode::sequence(children)
            } else {
                BtNode::fallback(children)
            });
        }
        let mut node = match self.whitelist.kind_of(&name) {
            Some(LeafKind::Action) => BtNode::action(&name),
            Some(LeafKind::Condition) => BtNode::condition(&name),
            None => return Err(format!("`{name}` is not whitelisted")),
        };
        if self.eat('(') {
            loop {
                let key = self.word()?.to_string();
                self.expect('=')?;
                let value = self.word()?.to_string();
                node = node.with_param(key, value);
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(')')?;
        }
        Ok(node)
    }
}
