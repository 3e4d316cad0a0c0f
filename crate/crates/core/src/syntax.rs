//! Text syntax for polynomials, formulas, ODE systems and hybrid programs.
//!
//! Precedence, loosest first: `->`, `|`, `&`, `!`, comparisons, `+ -`,
//! `* /`, unary minus, `^`. Programs: `++` is looser than `;`.

use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::hp::HybridProgram;
use crate::ode::OdeSystem;
use crate::poly::{Polynomial, Rational, VarId, VarTable};
use crate::semialg::{Formula, Rel};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("{line}:{col}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub col: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ParseErrorKind {
    #[error("unexpected {found}, expected {expected}")]
    Unexpected { found: String, expected: String },
    #[error("undeclared variable `{0}`")]
    Undeclared(String),
    #[error("not a polynomial: {0}")]
    NonPolynomial(String),
    #[error("division by zero")]
    DivisionByZero,
    #[error("unexpected character `{0}`")]
    BadChar(char),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Ident(String),
    Prime,
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    LBrace,
    RBrace,
    Comma,
    Semi,
    Dot,
    Define,
    Question,
    Rel(Rel),
    Amp,
    Bar,
    Bang,
    Arrow,
    Choice,
    Eof,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Num(n) => write!(f, "number `{n}`"),
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Eof => write!(f, "end of input"),
            Tok::Rel(r) => write!(f, "`{}`", r.symbol()),
            t => {
                let s = match t {
                    Tok::Prime => "'",
                    Tok::Plus => "+",
                    Tok::Minus => "-",
                    Tok::Star => "*",
                    Tok::Slash => "/",
                    Tok::Caret => "^",
                    Tok::LParen => "(",
                    Tok::RParen => ")",
                    Tok::LBrace => "{",
                    Tok::RBrace => "}",
                    Tok::Comma => ",",
                    Tok::Semi => ";",
                    Tok::Dot => ".",
                    Tok::Define => ":=",
                    Tok::Question => "?",
                    Tok::Amp => "&",
                    Tok::Bar => "|",
                    Tok::Bang => "!",
                    Tok::Arrow => "->",
                    _ => "++",
                };
                write!(f, "`{s}`")
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
struct Pos {
    line: usize,
    col: usize,
}

fn lex(text: &str) -> Result<Vec<(Tok, Pos)>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0, 1, 1);
    let err = |pos: Pos, kind| ParseError {
        line: pos.line,
        col: pos.col,
        kind,
    };
    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        let next = chars.get(i + 1).copied();
        let mut width = 1;
        let tok = match c {
            '\n' => {
                i += 1;
                line += 1;
                col = 1;
                continue;
            }
            c if c.is_whitespace() => {
                i += 1;
                col += 1;
                continue;
            }
            '#' => {
                while i < chars.len() && chars[i] != '\n' {
                    i += 1;
                }
                continue;
            }
            '0'..='9' => {
                let start = i;
                let mut j = i;
                while j < chars.len() && chars[j].is_ascii_digit() {
                    j += 1;
                }
                let int_part: String = chars[start..j].iter().collect();
                let mut value = Rational::from_integer(int_part.parse::<BigInt>().expect("digits"));
                if j + 1 < chars.len() && chars[j] == '.' && chars[j + 1].is_ascii_digit() {
                    let frac_start = j + 1;
                    j = frac_start;
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    let frac: String = chars[frac_start..j].iter().collect();
                    let num = frac.parse::<BigInt>().expect("digits");
                    let den = num_traits::pow(BigInt::from(10), frac.len());
                    value += Rational::new(num, den);
                }
                width = j - i;
                Tok::Num(value)
            }
            c if c.is_alphabetic() || c == '_' => {
                let mut j = i;
                while j < chars.len() && (chars[j].is_alphanumeric() || chars[j] == '_') {
                    j += 1;
                }
                width = j - i;
                Tok::Ident(chars[i..j].iter().collect())
            }
            '\'' => Tok::Prime,
            '+' if next == Some('+') => {
                width = 2;
                Tok::Choice
            }
            '+' => Tok::Plus,
            '-' if next == Some('>') => {
                width = 2;
                Tok::Arrow
            }
            '-' => Tok::Minus,
            '*' => Tok::Star,
            '/' => Tok::Slash,
            '^' => Tok::Caret,
            '(' => Tok::LParen,
            ')' => Tok::RParen,
            '{' => Tok::LBrace,
            '}' => Tok::RBrace,
            ',' => Tok::Comma,
            ';' => Tok::Semi,
            '.' => Tok::Dot,
            '?' => Tok::Question,
            ':' if next == Some('=') => {
                width = 2;
                Tok::Define
            }
            '=' if next == Some('=') => {
                width = 2;
                Tok::Rel(Rel::Eq)
            }
            '=' => Tok::Rel(Rel::Eq),
            '!' if next == Some('=') => {
                width = 2;
                Tok::Rel(Rel::Ne)
            }
            '!' => Tok::Bang,
            '>' if next == Some('=') => {
                width = 2;
                Tok::Rel(Rel::Ge)
            }
            '>' => Tok::Rel(Rel::Gt),
            '<' if next == Some('=') => {
                width = 2;
                Tok::Rel(Rel::Le)
            }
            '<' => Tok::Rel(Rel::Lt),
            '&' if next == Some('&') => {
                width = 2;
                Tok::Amp
            }
            '&' => Tok::Amp,
            '|' if next == Some('|') => {
                width = 2;
                Tok::Bar
            }
            '|' => Tok::Bar,
            c => return Err(err(pos, ParseErrorKind::BadChar(c))),
        };
        out.push((tok, pos));
        i += width;
        col += width;
    }
    out.push((Tok::Eof, Pos { line, col }));
    Ok(out)
}

struct Parser<'v> {
    toks: Vec<(Tok, Pos)>,
    at: usize,
    vars: &'v VarTable,
}

type PResult<T> = Result<T, ParseError>;

impl<'v> Parser<'v> {
    fn new(text: &str, vars: &'v VarTable) -> PResult<Self> {
        Ok(Self {
            toks: lex(text)?,
            at: 0,
            vars,
        })
    }

    fn peek(&self) -> &Tok {
        &self.toks[self.at].0
    }

    fn peek2(&self) -> &Tok {
        &self.toks[(self.at + 1).min(self.toks.len() - 1)].0
    }

    fn pos(&self) -> Pos {
        self.toks[self.at].1
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.at].0.clone();
        if self.at + 1 < self.toks.len() {
            self.at += 1;
        }
        t
    }

    fn error_at(&self, pos: Pos, kind: ParseErrorKind) -> ParseError {
        ParseError {
            line: pos.line,
            col: pos.col,
            kind,
        }
    }

    fn unexpected(&self, expected: &str) -> ParseError {
        self.error_at(
            self.pos(),
            ParseErrorKind::Unexpected {
                found: self.peek().to_string(),
                expected: expected.to_string(),
            },
        )
    }

    fn expect(&mut self, t: Tok, what: &str) -> PResult<()> {
        if *self.peek() == t {
            self.bump();
            Ok(())
        } else {
            Err(self.unexpected(what))
        }
    }

    fn finish(&self) -> PResult<()> {
        if *self.peek() == Tok::Eof {
            Ok(())
        } else {
            Err(self.unexpected("end of input"))
        }
    }

    fn variable(&mut self) -> PResult<VarId> {
        let pos = self.pos();
        match self.bump() {
            Tok::Ident(name) => self
                .vars
                .lookup(&name)
                .ok_or_else(|| self.error_at(pos, ParseErrorKind::Undeclared(name))),
            _ => {
                self.at -= 1;
                Err(self.unexpected("a variable"))
            }
        }
    }

    // --- polynomials ---

    fn expr(&mut self) -> PResult<Polynomial> {
        let mut acc = self.term()?;
        loop {
            match self.peek() {
                Tok::Plus => {
                    self.bump();
                    acc = &acc + &self.term()?;
                }
                Tok::Minus => {
                    self.bump();
                    acc = &acc - &self.term()?;
                }
                _ => return Ok(acc),
            }
        }
    }

    fn term(&mut self) -> PResult<Polynomial> {
        let mut acc = self.unary()?;
        loop {
            match self.peek() {
                Tok::Star => {
                    self.bump();
                    acc = &acc * &self.unary()?;
                }
                Tok::Slash => {
                    self.bump();
                    let pos = self.pos();
                    let d = self.unary()?;
                    match d.constant_value() {
                        Some(c) if c.is_zero() => return Err(self.error_at(pos, ParseErrorKind::DivisionByZero)),
                        Some(c) => acc = acc.scale(&c.recip()),
                        None => {
                            return Err(self.error_at(
                                pos,
                                ParseErrorKind::NonPolynomial("division by a non-constant".into()),
                            ))
                        }
                    }
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> PResult<Polynomial> {
        if *self.peek() == Tok::Minus {
            self.bump();
            return Ok(-self.unary()?);
        }
        self.power()
    }

    fn power(&mut self) -> PResult<Polynomial> {
        let base = self.atom()?;
        if *self.peek() != Tok::Caret {
            return Ok(base);
        }
        self.bump();
        let pos = self.pos();
        let negative = if *self.peek() == Tok::Minus {
            self.bump();
            true
        } else {
            false
        };
        let k = match self.bump() {
            Tok::Num(n) if n.is_integer() => n.to_integer().to_i64(),
            _ => None,
        };
        let Some(k) = k.filter(|&k| k <= u32::MAX as i64) else {
            self.at -= 1;
            return Err(self.unexpected("an integer exponent"));
        };
        let k = if negative { -k } else { k };
        base.try_pow(k).map_err(|_| {
            self.error_at(
                pos,
                ParseErrorKind::NonPolynomial("negative power of a non-constant".into()),
            )
        })
    }

    fn atom(&mut self) -> PResult<Polynomial> {
        match self.peek().clone() {
            Tok::Num(n) => {
                self.bump();
                Ok(Polynomial::constant(n))
            }
            Tok::Ident(_) => Ok(Polynomial::var(self.variable()?)),
            Tok::LParen => {
                self.bump();
                let p = self.expr()?;
                self.expect(Tok::RParen, "`)`")?;
                Ok(p)
            }
            _ => Err(self.unexpected("a term")),
        }
    }

    // --- formulas ---

    fn formula(&mut self) -> PResult<Formula> {
        let lhs = self.disjunction()?;
        if *self.peek() == Tok::Arrow {
            self.bump();
            let rhs = self.formula()?;
            return Ok(Formula::implies(lhs, rhs));
        }
        Ok(lhs)
    }

    fn disjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.conjunction()?];
        while *self.peek() == Tok::Bar {
            self.bump();
            parts.push(self.conjunction()?);
        }
        Ok(Formula::or(parts))
    }

    fn conjunction(&mut self) -> PResult<Formula> {
        let mut parts = vec![self.negation()?];
        while *self.peek() == Tok::Amp {
            self.bump();
            parts.push(self.negation()?);
        }
        Ok(Formula::and(parts))
    }

    fn negation(&mut self) -> PResult<Formula> {
        match self.peek() {
            Tok::Bang => {
                self.bump();
                Ok(Formula::not(self.negation()?))
            }
            Tok::Ident(k) if k == "forall" || k == "exists" => {
                let universal = k == "forall";
                self.bump();
                let mut vs = vec![self.variable()?];
                while matches!(self.peek(), Tok::Ident(_)) {
                    vs.push(self.variable()?);
                }
                self.expect(Tok::Dot, "`.`")?;
                let body = Box::new(self.formula()?);
                Ok(if universal {
                    Formula::Forall(vs, body)
                } else {
                    Formula::Exists(vs, body)
                })
            }
            _ => self.primary(),
        }
    }

    fn primary(&mut self) -> PResult<Formula> {
        match self.peek() {
            Tok::Ident(k) if k == "true" && self.vars.lookup("true").is_none() => {
                self.bump();
                Ok(Formula::True)
            }
            Tok::Ident(k) if k == "false" && self.vars.lookup("false").is_none() => {
                self.bump();
                Ok(Formula::False)
            }
            Tok::LParen => {
                let start = self.at;
                let as_comparison = self.comparison();
                if as_comparison.is_ok() {
                    return as_comparison;
                }
                let e1 = as_comparison.unwrap_err();
                self.at = start;
                self.bump();
                let inner = self.formula().and_then(|f| self.expect(Tok::RParen, "`)`").map(|_| f));
                match inner {
                    Ok(f) => Ok(f),
                    Err(e2) => Err(if (e1.line, e1.col) >= (e2.line, e2.col) { e1 } else { e2 }),
                }
            }
            _ => self.comparison(),
        }
    }

    fn comparison(&mut self) -> PResult<Formula> {
        let lhs = self.expr()?;
        let rel = match self.peek() {
            Tok::Rel(r) => *r,
            _ => return Err(self.unexpected("a comparison")),
        };
        self.bump();
        let rhs = self.expr()?;
        Ok(Formula::atom(&lhs - &rhs, rel))
    }

    // --- ODEs and programs ---

    fn ode_equations(&mut self) -> PResult<(Vec<VarId>, Vec<Polynomial>)> {
        let mut vars = Vec::new();
        let mut rhs = Vec::new();
        loop {
            let pos = self.pos();
            let x = self.variable()?;
            if vars.contains(&x) {
                return Err(self.error_at(
                    pos,
                    ParseErrorKind::Invalid(format!("variable `{}` has two equations", self.vars.name(x))),
                ));
            }
            self.expect(Tok::Prime, "`'`")?;
            self.expect(Tok::Rel(Rel::Eq), "`=`")?;
            vars.push(x);
            rhs.push(self.expr()?);
            if *self.peek() != Tok::Comma {
                return Ok((vars, rhs));
            }
            self.bump();
        }
    }

    fn system(&self, vars: Vec<VarId>, rhs: Vec<Polynomial>, pos: Pos) -> PResult<OdeSystem> {
        OdeSystem::new(self.vars.clone(), vars, rhs)
            .map_err(|e| self.error_at(pos, ParseErrorKind::Invalid(e.to_string())))
    }

    // `r != 0` (also `r != s`), returning `r` (resp. `r - s`)
    fn nonzero_condition(&mut self) -> PResult<Polynomial> {
        let pos = self.pos();
        match self.negation()? {
            Formula::Atom(a) if a.rel == Rel::Ne => Ok(a.poly),
            _ => Err(self.error_at(
                pos,
                ParseErrorKind::Invalid("tests and domains must have the form `r != 0`".into()),
            )),
        }
    }

    fn program(&mut self) -> PResult<HybridProgram> {
        let mut acc = self.sequence()?;
        while *self.peek() == Tok::Choice {
            self.bump();
            acc = HybridProgram::Choice(Box::new(acc), Box::new(self.sequence()?));
        }
        Ok(acc)
    }

    fn sequence(&mut self) -> PResult<HybridProgram> {
        let mut acc = self.basic()?;
        while *self.peek() == Tok::Semi {
            self.bump();
            // tolerate a trailing `;`
            if matches!(self.peek(), Tok::Eof | Tok::RBrace | Tok::Choice) {
                break;
            }
            acc = HybridProgram::Seq(Box::new(acc), Box::new(self.basic()?));
        }
        Ok(acc)
    }

    fn basic(&mut self) -> PResult<HybridProgram> {
        let pos = self.pos();
        match self.peek().clone() {
            Tok::Question => {
                self.bump();
                Ok(HybridProgram::Test(self.nonzero_condition()?))
            }
            Tok::Ident(_) => {
                let x = self.variable()?;
                self.expect(Tok::Define, "`:=`")?;
                Ok(HybridProgram::Assign(x, self.expr()?))
            }
            Tok::LBrace => {
                self.bump();
                let body = if matches!(self.peek(), Tok::Ident(_)) && *self.peek2() == Tok::Prime {
                    let (vars, rhs) = self.ode_equations()?;
                    let domain = if *self.peek() == Tok::Amp {
                        self.bump();
                        Some(self.nonzero_condition()?)
                    } else {
                        None
                    };
                    HybridProgram::Ode(self.system(vars, rhs, pos)?, domain)
                } else {
                    self.program()?
                };
                self.expect(Tok::RBrace, "`}`")?;
                if *self.peek() == Tok::Star {
                    self.bump();
                    return Ok(HybridProgram::Star(Box::new(body)));
                }
                Ok(body)
            }
            _ => Err(self.unexpected("a program")),
        }
    }
}

pub fn parse_polynomial(text: &str, vars: &VarTable) -> Result<Polynomial, ParseError> {
    let mut p = Parser::new(text, vars)?;
    let out = p.expr()?;
    p.finish()?;
    Ok(out)
}

pub fn parse_formula(text: &str, vars: &VarTable) -> Result<Formula, ParseError> {
    let mut p = Parser::new(text, vars)?;
    let out = p.formula()?;
    p.finish()?;
    Ok(out)
}

/// `x' = e, y' = e, …` over the declared table.
pub fn parse_ode(text: &str, vars: &VarTable) -> Result<OdeSystem, ParseError> {
    let mut p = Parser::new(text, vars)?;
    let pos = p.pos();
    let (xs, rhs) = p.ode_equations()?;
    p.finish()?;
    p.system(xs, rhs, pos)
}

pub fn parse_program(text: &str, vars: &VarTable) -> Result<HybridProgram, ParseError> {
    let mut p = Parser::new(text, vars)?;
    let out = p.program()?;
    p.finish()?;
    Ok(out)
}

/// Canonical rendering of an ODE system as `x' = f, …`.
pub fn ode_text(sys: &OdeSystem) -> String {
    let t = sys.table();
    sys.vars()
        .iter()
        .zip(sys.rhs())
        .map(|(&x, f)| format!("{}' = {}", t.name(x), f.display(t)))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Whether `name` can be declared as a variable.
pub fn is_valid_name(name: &str) -> bool {
    let mut cs = name.chars();
    let head_ok = cs.next().is_some_and(|c| c.is_alphabetic() || c == '_');
    head_ok
        && cs.all(|c| c.is_alphanumeric() || c == '_')
        && !matches!(name, "true" | "false" | "forall" | "exists")
}
