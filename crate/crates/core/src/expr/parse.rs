use alloc::boxed::Box;
use alloc::format;
use alloc::string::ToString;

use super::Node;
use crate::phasespace::Chart;
use crate::{Error, Result};

pub(super) struct Parser<'a, F> {
    src: &'a [u8],
    text: &'a str,
    pos: usize,
    chart: &'a Chart,
    defs: &'a F,
}

impl<'a, F> Parser<'a, F>
where
    F: Fn(&str) -> Option<Node>,
{
    pub(super) fn new(text: &'a str, chart: &'a Chart, defs: &'a F) -> Self {
        Parser { src: text.as_bytes(), text, pos: 0, chart, defs }
    }

    pub(super) fn parse(mut self) -> Result<Node> {
        let n = self.expr()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.error(format!("unexpected `{}`", self.src[self.pos] as char)));
        }
        Ok(n)
    }

    fn error(&self, msg: impl Into<alloc::string::String>) -> Error {
        Error::Syntax { pos: self.pos, msg: msg.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<u8> {
        self.skip_ws();
        self.src.get(self.pos).copied()
    }

    fn expr(&mut self) -> Result<Node> {
        let mut lhs = self.term()?;
        while let Some(c @ (b'+' | b'-')) = self.peek() {
            self.pos += 1;
            let rhs = self.term()?;
            lhs = if c == b'+' {
                Node::Add(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Sub(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn term(&mut self) -> Result<Node> {
        let mut lhs = self.factor()?;
        while let Some(c @ (b'*' | b'/')) = self.peek() {
            self.pos += 1;
            let rhs = self.factor()?;
            lhs = if c == b'*' {
                Node::Mul(Box::new(lhs), Box::new(rhs))
            } else {
                Node::Div(Box::new(lhs), Box::new(rhs))
            };
        }
        Ok(lhs)
    }

    fn factor(&mut self) -> Result<Node> {
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        let mut base = self.atom()?;
        if self.peek() == Some(b'^') {
            self.pos += 1;
            let k = self.exponent()?;
            base = Node::Pow(Box::new(base), k);
        }
        Ok(if negative { Node::Neg(Box::new(base)) } else { base })
    }

    fn exponent(&mut self) -> Result<i32> {
        let start = self.pos;
        let negative = self.peek() == Some(b'-');
        if negative {
            self.pos += 1;
        }
        self.skip_ws();
        let digits = self.pos;
        while self.pos < self.src.len() && self.src[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if digits == self.pos {
            self.pos = start;
            return Err(self.error("expected an integer exponent"));
        }
        let k: i32 = self.text[digits..self.pos]
            .parse()
            .map_err(|_| Error::Syntax { pos: digits, msg: "exponent out of range".to_string() })?;
        Ok(if negative { -k } else { k })
    }

    fn atom(&mut self) -> Result<Node> {
        match self.peek() {
            Some(b'(') => {
                self.pos += 1;
                let n = self.expr()?;
                if self.peek() != Some(b')') {
                    return Err(self.error("expected `)`"));
                }
                self.pos += 1;
                Ok(n)
            }
            Some(c) if c.is_ascii_digit() || c == b'.' => self.number(),
            Some(c) if c.is_ascii_alphabetic() || c == b'_' => self.ident(),
            Some(c) => Err(self.error(format!("unexpected `{}`", c as char))),
            None => Err(self.error("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Node> {
        let start = self.pos;
        let digits = |p: &mut Self| {
            while p.pos < p.src.len() && p.src[p.pos].is_ascii_digit() {
                p.pos += 1;
            }
        };
        digits(self);
        if self.src.get(self.pos) == Some(&b'.') {
            self.pos += 1;
            digits(self);
        }
        if matches!(self.src.get(self.pos), Some(b'e' | b'E')) {
            let save = self.pos;
            self.pos += 1;
            if matches!(self.src.get(self.pos), Some(b'+' | b'-')) {
                self.pos += 1;
            }
            let d = self.pos;
            digits(self);
            if d == self.pos {
                self.pos = save;
            }
        }
        let text = &self.text[start..self.pos];
        match text.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(Node::Const(v)),
            _ => Err(Error::Syntax { pos: start, msg: format!("invalid number `{text}`") }),
        }
    }

    fn ident(&mut self) -> Result<Node> {
        let start = self.pos;
        while self.pos < self.src.len()
            && (self.src[self.pos].is_ascii_alphanumeric() || self.src[self.pos] == b'_')
        {
            self.pos += 1;
        }
        let name = &self.text[start..self.pos];
        if let Some(i) = self.chart.resolve(name) {
            return Ok(Node::Var(i));
        }
        if let Some(n) = (self.defs)(name) {
            return Ok(n);
        }
        Err(Error::UnknownVariable { name: name.to_string(), pos: start })
    }
}
