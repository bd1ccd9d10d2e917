//! Parser for the IML surface syntax produced by the printer. `//` starts a comment.

use super::syntax::{IExp, Process};
use crate::bir::syntax::Label;
use crate::bits::Bits;
use std::sync::Arc;

#[derive(Clone, Debug, PartialEq, Eq, thiserror::Error)]
#[error("IML parse error at token {pos}: {msg}")]
pub struct ParseError {
    pub pos: usize,
    pub msg: String,
}

#[derive(Clone, Debug, PartialEq, Eq)]
enum Tok {
    Ident(String),
    /// Decimal literal with an optional `:width` suffix.
    Num(u128, Option<usize>),
    Lit(Bits),
    Label(String),
    Sym(&'static str),
}

const SYMBOLS: [&str; 27] = [
    "<=", "<>", "<<", ">>", "!^", "(", ")", "[", "]", "{", "}", ",", ";", ":", "=", "<", "+", "-", "*", "/", "%", "|", "∧", "∨", "⊻",
    "¬", "⊥",
];

fn lex(src: &str) -> Result<Vec<Tok>, ParseError> {
    let err = |msg: String| ParseError { pos: 0, msg };
    let mut toks = Vec::new();
    let cs: Vec<char> = src.chars().collect();
    let mut i = 0;
    let word = |i: &mut usize| {
        let st = *i;
        while *i < cs.len() && (cs[*i].is_ascii_alphanumeric() || cs[*i] == '_' || cs[*i] == '\'') {
            *i += 1;
        }
        cs[st..*i].iter().collect::<String>()
    };
    while i < cs.len() {
        let c = cs[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && cs.get(i + 1) == Some(&'/') {
            while i < cs.len() && cs[i] != '\n' {
                i += 1;
            }
        } else if c == '@' {
            i += 1;
            let w = word(&mut i);
            if w.is_empty() {
                return Err(err("empty label after `@`".into()));
            }
            toks.push(Tok::Label(w));
        } else if c.is_ascii_digit() {
            let w = word(&mut i);
            if w.starts_with("0x") || w.starts_with("0b") {
                toks.push(Tok::Lit(Bits::parse(&w).ok_or_else(|| err(format!("bad literal `{w}`")))?));
            } else {
                let v: u128 = w.parse().map_err(|_| err(format!("bad number `{w}`")))?;
                let width = if cs.get(i) == Some(&':') && cs.get(i + 1).is_some_and(char::is_ascii_digit) {
                    i += 1;
                    let d = word(&mut i);
                    Some(d.parse().map_err(|_| err(format!("bad width `{d}`")))?)
                } else {
                    None
                };
                toks.push(Tok::Num(v, width));
            }
        } else if c.is_alphabetic() || c == '_' {
            toks.push(Tok::Ident(word(&mut i)));
        } else {
            let rest: String = cs[i..cs.len().min(i + 2)].iter().collect();
            let sym = SYMBOLS
                .iter()
                .find(|s| rest.starts_with(**s))
                .or(match c {
                    '&' => Some(&"∧"),
                    '~' => Some(&"¬"),
                    _ => None,
                })
                .ok_or_else(|| err(format!("unexpected character `{c}`")))?;
            i += if matches!(c, '&' | '~') { 1 } else { sym.chars().count() };
            toks.push(Tok::Sym(sym));
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
}

const LEVELS: [&[&str]; 7] = [&["∨"], &["∧"], &["⊻"], &["=", "<>", "<", "<="], &["<<", ">>"], &["+", "-"], &["*", "/", "%"]];

impl Parser {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError { pos: self.pos, msg: msg.into() })
    }

    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn next(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).cloned();
        self.pos += 1;
        t
    }

    fn is_sym(&self, s: &str) -> bool {
        matches!(self.peek(), Some(Tok::Sym(x)) if *x == s)
    }

    fn is_kw(&self, k: &str) -> bool {
        matches!(self.peek(), Some(Tok::Ident(x)) if x == k)
    }

    fn eat_sym(&mut self, s: &str) -> bool {
        if self.is_sym(s) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_sym(&mut self, s: &str) -> Result<(), ParseError> {
        if self.eat_sym(s) {
            Ok(())
        } else {
            self.err(format!("expected `{s}`, found {:?}", self.peek()))
        }
    }

    fn expect_kw(&mut self, k: &str) -> Result<(), ParseError> {
        if self.is_kw(k) {
            self.pos += 1;
            Ok(())
        } else {
            self.err(format!("expected `{k}`, found {:?}", self.peek()))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match self.next() {
            Some(Tok::Ident(s)) => Ok(s),
            other => {
                self.pos -= 1;
                self.err(format!("expected identifier, found {other:?}"))
            }
        }
    }

    fn exp_list(&mut self, close: &str) -> Result<Vec<IExp>, ParseError> {
        let mut out = Vec::new();
        if self.eat_sym(close) {
            return Ok(out);
        }
        loop {
            out.push(self.exp()?);
            if self.eat_sym(close) {
                return Ok(out);
            }
            self.expect_sym(",")?;
        }
    }

    fn exp(&mut self) -> Result<IExp, ParseError> {
        self.exp_level(0)
    }

    fn exp_level(&mut self, level: usize) -> Result<IExp, ParseError> {
        if level == LEVELS.len() {
            return self.unary();
        }
        let mut lhs = self.exp_level(level + 1)?;
        loop {
            let op = match self.peek() {
                Some(Tok::Sym(s)) if LEVELS[level].contains(s) => *s,
                _ => return Ok(lhs),
            };
            self.pos += 1;
            let rhs = self.exp_level(level + 1)?;
            lhs = IExp::bin(op, lhs, rhs);
        }
    }

    fn unary(&mut self) -> Result<IExp, ParseError> {
        if self.eat_sym("¬") {
            return Ok(IExp::app("¬", vec![self.unary()?]));
        }
        match self.next() {
            Some(Tok::Sym("⊥")) => Ok(IExp::Bot),
            Some(Tok::Sym("(")) => {
                let e = self.exp()?;
                self.expect_sym(")")?;
                Ok(e)
            }
            Some(Tok::Lit(b)) => Ok(IExp::Bits(b)),
            Some(Tok::Num(v, Some(w))) => {
                if w < 128 && v >> w != 0 {
                    return self.err(format!("{v} does not fit in {w} bits"));
                }
                Ok(IExp::word(v, w))
            }
            Some(Tok::Num(v, None)) => self.err(format!("literal {v} needs a width, as in {v}:8")),
            Some(Tok::Ident(name)) if name == "bot" => Ok(IExp::Bot),
            Some(Tok::Ident(name)) => {
                if self.eat_sym("(") {
                    Ok(IExp::App(name, self.exp_list(")")?))
                } else {
                    Ok(IExp::Var(name))
                }
            }
            other => {
                self.pos -= 1;
                self.err(format!("expected expression, found {other:?}"))
            }
        }
    }

    fn channel(&mut self) -> Result<(String, Vec<IExp>), ParseError> {
        let chan = self.ident()?;
        let ids = if self.eat_sym("[") { self.exp_list("]")? } else { Vec::new() };
        Ok((chan, ids))
    }

    fn par(&mut self) -> Result<Process, ParseError> {
        let p = self.seq()?;
        if self.eat_sym("|") {
            Ok(Process::par(p, self.par()?))
        } else {
            Ok(p)
        }
    }

    /// The continuation after `;`. A missing one is `0`. Prefixes bind tighter than `|`.
    fn after_semi(&mut self) -> Result<Process, ParseError> {
        self.expect_sym(";")?;
        if self.peek().is_none() || self.is_sym(")") || self.is_sym("|") {
            Ok(Process::Nil)
        } else {
            self.seq()
        }
    }

    fn seq(&mut self) -> Result<Process, ParseError> {
        match self.next() {
            Some(Tok::Num(0, None)) => Ok(Process::Nil),
            Some(Tok::Sym("(")) => {
                let p = self.par()?;
                self.expect_sym(")")?;
                Ok(p)
            }
            Some(Tok::Sym("!^")) => {
                self.expect_sym("{")?;
                let counter = self.ident()?;
                self.expect_sym("<=")?;
                let bound = match self.next() {
                    Some(Tok::Num(m, None)) => m as u64,
                    _ => return self.err("expected a replication bound"),
                };
                self.expect_sym("}")?;
                let body = self.seq()?;
                let cont = if self.is_sym(";") { self.after_semi()? } else { Process::Nil };
                Ok(Process::repl(&counter, bound, body, cont))
            }
            Some(Tok::Ident(k)) => match k.as_str() {
                "new" => {
                    let var = self.ident()?;
                    self.expect_sym(":")?;
                    let ty = self.ident()?;
                    let Some(bits) = ty.strip_prefix("fixed_").and_then(|n| n.parse().ok()) else {
                        return self.err(format!("expected fixed_N, found `{ty}`"));
                    };
                    Ok(Process::new_(&var, bits, self.after_semi()?))
                }
                "in" => {
                    self.expect_sym("(")?;
                    let (chan, ids) = self.channel()?;
                    self.expect_sym(",")?;
                    let var = self.ident()?;
                    self.expect_sym(")")?;
                    Ok(Process::In { chan, ids, var, cont: Arc::new(self.after_semi()?) })
                }
                "out" => {
                    self.expect_sym("(")?;
                    let (chan, ids) = self.channel()?;
                    self.expect_sym(",")?;
                    let payload = self.exp()?;
                    self.expect_sym(")")?;
                    Ok(Process::Out { chan, ids, payload, cont: Arc::new(self.after_semi()?) })
                }
                "event" => {
                    let name = self.ident()?;
                    let args = if self.eat_sym("(") { self.exp_list(")")? } else { Vec::new() };
                    Ok(Process::Event { name, args, cont: Arc::new(self.after_semi()?) })
                }
                "let" => {
                    let var = self.ident()?;
                    self.expect_sym("=")?;
                    let exp = self.exp()?;
                    self.expect_kw("in")?;
                    Ok(Process::let_(&var, exp, self.seq()?))
                }
                "if" => {
                    let cond = self.exp()?;
                    self.expect_kw("then")?;
                    let then = self.seq()?;
                    let else_ = if self.is_kw("else") {
                        self.pos += 1;
                        self.seq()?
                    } else {
                        Process::Nil
                    };
                    Ok(Process::if_(cond, then, else_))
                }
                "assume" => {
                    let cond = self.exp()?;
                    Ok(Process::assume(cond, self.after_semi()?))
                }
                "run" => {
                    self.expect_sym("(")?;
                    let pc = match self.next() {
                        Some(Tok::Label(l)) => Label::parse(&l),
                        _ => return self.err("expected `@label`"),
                    };
                    let args = if self.eat_sym(",") {
                        self.expect_sym("(")?;
                        self.exp_list(")")?
                    } else {
                        Vec::new()
                    };
                    self.expect_sym(")")?;
                    Ok(Process::Run { pc, args, slot: 0 })
                }
                other => self.err(format!("unknown process keyword `{other}`")),
            },
            other => {
                self.pos = self.pos.saturating_sub(1);
                self.err(format!("expected a process, found {other:?}"))
            }
        }
    }
}

/// Parses a process and numbers its `run` sites.
pub fn parse_process(src: &str) -> Result<Process, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let proc_ = p.par()?;
    if p.pos < p.toks.len() {
        return p.err(format!("trailing input starting at {:?}", p.peek()));
    }
    Ok(proc_.number_runs().0)
}

pub fn parse_exp(src: &str) -> Result<IExp, ParseError> {
    let mut p = Parser { toks: lex(src)?, pos: 0 };
    let e = p.exp()?;
    if p.pos < p.toks.len() {
        return p.err("trailing input after expression");
    }
    Ok(e)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_xor_client_shape() {
        let src = "new x: fixed_64; let c = conc1(x) in let e = exclusive_or(c, pad) in out(c, e); 0";
        let p = parse_process(src).unwrap();
        assert_eq!(p.to_string(), src);
    }

    #[test]
    fn parses_channels_branches_and_par() {
        let src = "(in(c[1:8], x); if (x = 3:8) then (event ok(x); 0) else (0) | out(c[1:8], 3:8); 0)";
        let p = parse_process(src).unwrap();
        assert_eq!(p.to_string(), src);
    }

    #[test]
    fn parses_repl_and_run() {
        let p = parse_process("!^{t<=3} (out(c, t); 0); run(@100, (k, 0x0f))").unwrap();
        let Process::Repl { bound: 3, cont, .. } = &p else { panic!("{p:?}") };
        assert!(matches!(**cont, Process::Run { slot: 0, .. }));
        assert_eq!(parse_process(&p.to_string()).unwrap(), p);
    }

    #[test]
    fn precedence() {
        let e = parse_exp("a + b * c = d ∧ ¬e").unwrap();
        assert_eq!(e.to_string(), "(((a + (b * c)) = d) ∧ ¬e)");
    }

    #[test]
    fn rejects_garbage() {
        assert!(parse_process("new x; 0").is_err());
        assert!(parse_process("out(c, 5); 0").is_err());
        assert!(parse_process("0 0").is_err());
    }
}
