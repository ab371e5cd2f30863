use std::fmt;

use num_traits::{One, Zero};
use thiserror::Error;

use super::indices::check_well_formed;
use super::{is_concrete_name, rat, sym, Expr, Index, Rational, Registry, Symmetry, Variance};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ParseErrorKind {
    Syntax,
    Arity,
    UnbalancedVariance,
    PatternInGround,
}

#[derive(Clone, Debug, PartialEq, Eq, Error)]
pub struct ParseError {
    pub kind: ParseErrorKind,
    /// Byte offset into the input.
    pub position: usize,
    pub message: String,
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "at byte {}: {}", self.position, self.message)
    }
}

/// Parses a ground expression with the built-in head registry.
pub fn parse_expr(text: &str) -> Result<Expr, ParseError> {
    Parser::new(&mut Registry::default()).ground(text)
}

/// Parses an expression that may contain `x?`, `xs??` and `mu?`.
pub fn parse_pattern(text: &str) -> Result<Expr, ParseError> {
    Parser::new(&mut Registry::default()).pattern(text)
}

/// Recursive-descent parser over the expression grammar:
///
/// ```text
/// sum     := ['+'|'-'] term (('+'|'-') term)*
/// term    := factor ('*' factor)*
/// factor  := number ['/' number] | '(' sum ')' | 'd' '[' index ']' '(' sum ')'
///          | ident '?' | ident '??' | ident ['[' index (',' index)* ']']
/// index   := ('^'|'_') name ['?']
/// ```
pub struct Parser<'r> {
    registry: &'r mut Registry,
    src: Vec<(usize, char)>,
    pos: usize,
    len: usize,
    allow_patterns: bool,
}

impl<'r> Parser<'r> {
    pub fn new(registry: &'r mut Registry) -> Self {
        Parser { registry, src: Vec::new(), pos: 0, len: 0, allow_patterns: false }
    }

    pub fn ground(&mut self, text: &str) -> Result<Expr, ParseError> {
        self.allow_patterns = false;
        let e = self.run(text)?;
        check_well_formed(&e).map_err(|err| ParseError {
            kind: ParseErrorKind::UnbalancedVariance,
            position: 0,
            message: err.to_string(),
        })?;
        Ok(e)
    }

    pub fn pattern(&mut self, text: &str) -> Result<Expr, ParseError> {
        self.allow_patterns = true;
        self.run(text)
    }

    fn run(&mut self, text: &str) -> Result<Expr, ParseError> {
        self.src = text.char_indices().collect();
        self.len = text.len();
        self.pos = 0;
        let e = self.sum()?;
        self.skip_ws();
        if self.pos < self.src.len() {
            return Err(self.err(format!("unexpected `{}`", self.src[self.pos].1)));
        }
        Ok(e)
    }

    fn offset(&self) -> usize {
        self.src.get(self.pos).map_or(self.len, |&(o, _)| o)
    }

    fn err(&self, message: impl Into<String>) -> ParseError {
        ParseError { kind: ParseErrorKind::Syntax, position: self.offset(), message: message.into() }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.src.len() && self.src[self.pos].1.is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.src.get(self.pos).map(|&(_, c)| c)
    }

    fn peek_raw(&self) -> Option<char> {
        self.src.get(self.pos).map(|&(_, c)| c)
    }

    fn eat(&mut self, c: char) -> bool {
        if self.peek() == Some(c) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, c: char) -> Result<(), ParseError> {
        if self.eat(c) {
            Ok(())
        } else {
            match self.peek() {
                Some(found) => Err(self.err(format!("expected `{c}`, found `{found}`"))),
                None => Err(self.err(format!("expected `{c}`, found end of input"))),
            }
        }
    }

    fn sum(&mut self) -> Result<Expr, ParseError> {
        let mut terms = Vec::new();
        let mut negate = if self.eat('-') {
            true
        } else {
            self.eat('+');
            false
        };
        loop {
            let t = self.term()?;
            let t = if negate { t.neg() } else { t };
            match t {
                Expr::Sum(inner) => terms.extend(inner),
                t => terms.push(t),
            }
            if self.eat('+') {
                negate = false;
            } else if self.eat('-') {
                negate = true;
            } else {
                break;
            }
        }
        Ok(Expr::sum(terms))
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut coeff = Rational::one();
        let mut factors = Vec::new();
        loop {
            match self.factor()? {
                Expr::Num(q) => coeff *= q,
                Expr::Product(c, fs) => {
                    coeff *= c;
                    factors.extend(fs);
                }
                f => factors.push(f),
            }
            if !self.eat('*') {
                break;
            }
        }
        if coeff.is_zero() {
            return Ok(Expr::Num(coeff));
        }
        Ok(Expr::product(coeff, factors))
    }

    fn factor(&mut self) -> Result<Expr, ParseError> {
        match self.peek() {
            Some(c) if c.is_ascii_digit() => self.number(),
            Some('(') => {
                self.pos += 1;
                let e = self.sum()?;
                self.expect(')')?;
                Ok(e)
            }
            Some(c) if is_ident_start(c) => self.atom(),
            Some(c) => Err(self.err(format!("unexpected `{c}`"))),
            None => Err(self.err("unexpected end of input")),
        }
    }

    fn number(&mut self) -> Result<Expr, ParseError> {
        let num = self.integer()?;
        let save = self.pos;
        if self.eat('/') {
            if matches!(self.peek(), Some(c) if c.is_ascii_digit()) {
                let den = self.integer()?;
                if den == 0 {
                    return Err(self.err("zero denominator"));
                }
                return Ok(Expr::Num(Rational::new(num, den)));
            }
            self.pos = save;
            return Err(self.err("expected denominator after `/`"));
        }
        Ok(Expr::Num(rat(num)))
    }

    fn integer(&mut self) -> Result<i64, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek_raw(), Some(c) if c.is_ascii_digit()) {
            self.pos += 1;
        }
        let text: String = self.src[start..self.pos].iter().map(|&(_, c)| c).collect();
        text.parse().map_err(|_| {
            self.pos = start;
            self.err("integer literal out of range")
        })
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        self.skip_ws();
        let start = self.pos;
        while matches!(self.peek_raw(), Some(c) if is_ident_char(c)) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.err("expected identifier"));
        }
        Ok(self.src[start..self.pos].iter().map(|&(_, c)| c).collect())
    }

    fn atom(&mut self) -> Result<Expr, ParseError> {
        let start_offset = self.offset();
        let name = self.ident()?;
        if self.peek_raw() == Some('?') {
            if !self.allow_patterns {
                return Err(ParseError {
                    kind: ParseErrorKind::PatternInGround,
                    position: start_offset,
                    message: format!("pattern variable `{name}?` in a ground expression"),
                });
            }
            self.pos += 1;
            if self.peek_raw() == Some('?') {
                self.pos += 1;
                return Ok(Expr::SeqVar(sym(&name)));
            }
            return Ok(Expr::Var(sym(&name)));
        }
        let mut indices = Vec::new();
        if self.peek_raw() == Some('[') {
            self.pos += 1;
            loop {
                indices.push(self.index()?);
                if !self.eat(',') {
                    break;
                }
            }
            self.expect(']')?;
        }
        if name == "d" && !indices.is_empty() {
            if indices.len() != 1 {
                return Err(ParseError {
                    kind: ParseErrorKind::Arity,
                    position: start_offset,
                    message: "a derivative takes exactly one index".into(),
                });
            }
            self.expect('(')?;
            let operand = self.sum()?;
            self.expect(')')?;
            return Ok(Expr::partial(indices.pop().unwrap(), operand));
        }
        let head = match self.registry.get(&name) {
            Some(h) if h.arity != indices.len() => {
                return Err(ParseError {
                    kind: ParseErrorKind::Arity,
                    position: start_offset,
                    message: format!(
                        "`{}` takes {} indices, got {}",
                        name,
                        h.arity,
                        indices.len()
                    ),
                })
            }
            Some(h) => h.clone(),
            None => self.registry.declare(&name, indices.len(), Symmetry::None).map_err(|m| {
                ParseError { kind: ParseErrorKind::Arity, position: start_offset, message: m }
            })?,
        };
        Ok(Expr::tensor(head, indices))
    }

    fn index(&mut self) -> Result<Index, ParseError> {
        let variance = match self.peek() {
            Some('^') => Variance::Upper,
            Some('_') => Variance::Lower,
            _ => return Err(self.err("expected `^` or `_` before index name")),
        };
        self.pos += 1;
        let name = if matches!(self.peek_raw(), Some(c) if c.is_ascii_digit()) {
            let start = self.pos;
            while matches!(self.peek_raw(), Some(c) if c.is_ascii_digit()) {
                self.pos += 1;
            }
            self.src[start..self.pos].iter().map(|&(_, c)| c).collect()
        } else {
            self.ident()?
        };
        let is_pattern = self.peek_raw() == Some('?');
        if is_pattern {
            if !self.allow_patterns {
                return Err(ParseError {
                    kind: ParseErrorKind::PatternInGround,
                    position: self.offset(),
                    message: format!("pattern index `{name}?` in a ground expression"),
                });
            }
            if is_concrete_name(&name) {
                return Err(self.err("a concrete index cannot be a pattern variable"));
            }
            self.pos += 1;
        }
        Ok(Index { name: sym(&name), variance, is_pattern })
    }
}

fn is_ident_start(c: char) -> bool {
    c.is_alphabetic()
}

fn is_ident_char(c: char) -> bool {
    c.is_alphanumeric() || c == '_' || c == '\''
}
