//! Recursive-descent parser and printer for the PaQL subset:
//!
//! ```text
//! SELECT PACKAGE(*) AS P FROM table [R] [REPEAT r]
//! [WHERE attr op literal {AND attr op literal}]
//! SUCH THAT constraint {AND constraint}
//! [MAXIMIZE | MINIMIZE SUM(P.attr)] [;]
//! ```
//!
//! A constraint is `agg op x`, `x op agg`, `x op agg op y`, or
//! `agg BETWEEN x AND y`, where `agg` is `COUNT(P.*)`, `SUM(P.a)` or
//! `AVG(P.a)`. Strict comparisons are read as their non-strict forms.

use std::fmt;

use pq_core::model::{Aggregate, CmpOp, GlobalConstraint, Literal, LocalPredicate, Objective, PackageQuery, Repeat, Sense};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{line}:{column}: {message}")]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(f64),
    Str(String),
    Op(CmpOp),
    LParen,
    RParen,
    Star,
    Dot,
    Comma,
    Semi,
    End,
}

impl fmt::Display for Tok {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tok::Ident(s) => write!(f, "`{s}`"),
            Tok::Number(x) => write!(f, "number {x}"),
            Tok::Str(s) => write!(f, "string '{s}'"),
            Tok::Op(o) => write!(f, "`{o}`"),
            Tok::LParen => f.write_str("`(`"),
            Tok::RParen => f.write_str("`)`"),
            Tok::Star => f.write_str("`*`"),
            Tok::Dot => f.write_str("`.`"),
            Tok::Comma => f.write_str("`,`"),
            Tok::Semi => f.write_str("`;`"),
            Tok::End => f.write_str("end of input"),
        }
    }
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    column: usize,
}

struct Lexer {
    chars: Vec<char>,
    i: usize,
    line: usize,
    column: usize,
}

impl Lexer {
    fn peek(&self, ahead: usize) -> Option<char> {
        self.chars.get(self.i + ahead).copied()
    }

    fn advance(&mut self) {
        if self.chars[self.i] == '\n' {
            self.line += 1;
            self.column = 1;
        } else {
            self.column += 1;
        }
        self.i += 1;
    }

    fn take_while(&mut self, keep: impl Fn(char) -> bool) -> String {
        let start = self.i;
        while self.peek(0).is_some_and(&keep) {
            self.advance();
        }
        self.chars[start..self.i].iter().collect()
    }

    /// Digits with optional fraction and exponent, or a signed `inf`.
    fn number(&mut self) -> Result<f64, String> {
        let negative = self.peek(0) == Some('-');
        if matches!(self.peek(0), Some('-' | '+')) {
            self.advance();
        }
        if self.peek(0).is_some_and(|c| c.is_ascii_alphabetic()) {
            let word = self.take_while(|c| c.is_ascii_alphabetic());
            return match word.to_ascii_lowercase().as_str() {
                "inf" | "infinity" if negative => Ok(f64::NEG_INFINITY),
                "inf" | "infinity" => Ok(f64::INFINITY),
                _ => Err(format!("malformed number near `{word}`")),
            };
        }
        let mut text = String::from(if negative { "-" } else { "" });
        loop {
            match self.peek(0) {
                Some(c) if c.is_ascii_digit() || c == '.' => text.push(c),
                Some(c @ ('e' | 'E')) => {
                    text.push(c);
                    if let Some(sign @ ('-' | '+')) = self.peek(1) {
                        self.advance();
                        text.push(sign);
                    }
                }
                _ => break,
            }
            self.advance();
        }
        text.parse().map_err(|_| format!("malformed number `{text}`"))
    }

    fn token(&mut self) -> Result<Option<Tok>, String> {
        let Some(c) = self.peek(0) else { return Ok(None) };
        let next = self.peek(1);
        if c.is_ascii_alphabetic() || c == '_' {
            let word = self.take_while(|c| c.is_ascii_alphanumeric() || c == '_');
            return Ok(Some(match word.to_ascii_lowercase().as_str() {
                "inf" | "infinity" => Tok::Number(f64::INFINITY),
                _ => Tok::Ident(word),
            }));
        }
        let signed = matches!(c, '-' | '+') && next.is_some_and(|d| d.is_ascii_alphanumeric() || d == '.');
        let dotted = c == '.' && next.is_some_and(|d| d.is_ascii_digit());
        if c.is_ascii_digit() || signed || dotted {
            return self.number().map(|x| Some(Tok::Number(x)));
        }
        if c == '\'' {
            self.advance();
            let s = self.take_while(|c| c != '\'' && c != '\n');
            if self.peek(0) != Some('\'') {
                return Err("unterminated string".into());
            }
            self.advance();
            return Ok(Some(Tok::Str(s)));
        }
        let (tok, width) = match (c, next) {
            ('<', Some('=')) => (Tok::Op(CmpOp::Le), 2),
            ('>', Some('=')) => (Tok::Op(CmpOp::Ge), 2),
            ('<', Some('>')) | ('!', Some('=')) => (Tok::Op(CmpOp::Ne), 2),
            ('≤', _) => (Tok::Op(CmpOp::Le), 1),
            ('≥', _) => (Tok::Op(CmpOp::Ge), 1),
            ('<', _) => (Tok::Op(CmpOp::Lt), 1),
            ('>', _) => (Tok::Op(CmpOp::Gt), 1),
            ('=', _) => (Tok::Op(CmpOp::Eq), 1),
            ('(', _) => (Tok::LParen, 1),
            (')', _) => (Tok::RParen, 1),
            ('*', _) => (Tok::Star, 1),
            ('.', _) => (Tok::Dot, 1),
            (',', _) => (Tok::Comma, 1),
            (';', _) => (Tok::Semi, 1),
            _ => return Err(format!("unexpected character `{c}`")),
        };
        for _ in 0..width {
            self.advance();
        }
        Ok(Some(tok))
    }
}

fn lex(text: &str) -> Result<Vec<Token>, ParseError> {
    let mut lx = Lexer {
        chars: text.chars().collect(),
        i: 0,
        line: 1,
        column: 1,
    };
    let mut out = Vec::new();
    loop {
        lx.take_while(char::is_whitespace);
        if lx.peek(0) == Some('-') && lx.peek(1) == Some('-') {
            lx.take_while(|c| c != '\n');
            continue;
        }
        let (line, column) = (lx.line, lx.column);
        match lx.token() {
            Ok(Some(tok)) => out.push(Token { tok, line, column }),
            Ok(None) => {
                out.push(Token { tok: Tok::End, line, column });
                return Ok(out);
            }
            Err(message) => return Err(ParseError { line, column, message }),
        }
    }
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    alias: String,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn fail<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        let t = self.peek();
        Err(ParseError {
            line: t.line,
            column: t.column,
            message: message.into(),
        })
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].tok.clone();
        if t != Tok::End {
            self.pos += 1;
        }
        t
    }

    fn at_keyword(&self, kw: &str) -> bool {
        matches!(&self.peek().tok, Tok::Ident(w) if w.eq_ignore_ascii_case(kw))
    }

    fn keyword(&mut self, kw: &str) -> Result<(), ParseError> {
        if self.at_keyword(kw) {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {kw}, found {}", self.peek().tok))
        }
    }

    fn expect(&mut self, want: Tok) -> Result<(), ParseError> {
        if self.peek().tok == want {
            self.bump();
            Ok(())
        } else {
            self.fail(format!("expected {want}, found {}", self.peek().tok))
        }
    }

    fn ident(&mut self) -> Result<String, ParseError> {
        match &self.peek().tok {
            Tok::Ident(w) => {
                let w = w.clone();
                self.bump();
                Ok(w)
            }
            other => self.fail(format!("expected a name, found {other}")),
        }
    }

    fn number(&mut self) -> Result<f64, ParseError> {
        match self.peek().tok {
            Tok::Number(x) => {
                self.bump();
                Ok(x)
            }
            ref other => self.fail(format!("expected a number, found {other}")),
        }
    }

    /// `P.attr`, or `P.*` when `star` is allowed (returns `None`).
    fn qualified(&mut self, star: bool) -> Result<Option<String>, ParseError> {
        if star && self.peek().tok == Tok::Star {
            self.bump();
            return Ok(None);
        }
        let qual = self.ident()?;
        if !qual.eq_ignore_ascii_case(&self.alias) {
            self.pos -= 1;
            return self.fail(format!("expected package alias `{}`, found `{qual}`", self.alias));
        }
        self.expect(Tok::Dot)?;
        if star && self.peek().tok == Tok::Star {
            self.bump();
            return Ok(None);
        }
        Ok(Some(self.ident()?))
    }

    fn aggregate(&mut self) -> Result<Aggregate, ParseError> {
        let name = self.ident()?.to_ascii_uppercase();
        self.expect(Tok::LParen)?;
        let agg = match name.as_str() {
            "COUNT" => {
                if self.qualified(true)?.is_some() {
                    return self.fail("COUNT takes `*` or `P.*`");
                }
                Aggregate::Count
            }
            "SUM" | "AVG" => match self.qualified(false)? {
                Some(a) if name == "SUM" => Aggregate::Sum(a),
                Some(a) => Aggregate::Avg(a),
                None => unreachable!(),
            },
            _ => {
                self.pos -= 2;
                return self.fail(format!("unknown aggregate `{name}`"));
            }
        };
        self.expect(Tok::RParen)?;
        Ok(agg)
    }

    fn starts_constraint(&self) -> bool {
        matches!(self.peek().tok, Tok::Number(_)) || ["COUNT", "SUM", "AVG"].iter().any(|k| self.at_keyword(k))
    }

    fn op(&mut self) -> Result<CmpOp, ParseError> {
        match self.peek().tok {
            Tok::Op(o) => {
                self.bump();
                Ok(o)
            }
            ref other => self.fail(format!("expected a comparison, found {other}")),
        }
    }

    fn constraint(&mut self) -> Result<GlobalConstraint, ParseError> {
        let (line, column) = (self.peek().line, self.peek().column);
        let at = |message: String| ParseError { line, column, message };
        if let Tok::Number(x) = self.peek().tok {
            self.bump();
            let o1 = self.op()?;
            let agg = self.aggregate()?;
            let mut c = GlobalConstraint::between(agg, f64::NEG_INFINITY, f64::INFINITY);
            apply(&mut c, flip(o1), x).map_err(at)?;
            if let Tok::Op(o2) = self.peek().tok {
                self.bump();
                let y = self.number()?;
                apply(&mut c, o2, y).map_err(at)?;
            }
            return Ok(c);
        }
        let agg = self.aggregate()?;
        if self.at_keyword("BETWEEN") {
            self.bump();
            let lo = self.number()?;
            self.keyword("AND")?;
            let hi = self.number()?;
            return Ok(GlobalConstraint::between(agg, lo, hi));
        }
        let o = self.op()?;
        let x = self.number()?;
        let mut c = GlobalConstraint::between(agg, f64::NEG_INFINITY, f64::INFINITY);
        apply(&mut c, o, x).map_err(at)?;
        Ok(c)
    }

    fn predicate(&mut self) -> Result<LocalPredicate, ParseError> {
        let mut attr = self.ident()?;
        if self.peek().tok == Tok::Dot {
            self.bump();
            attr = self.ident()?;
        }
        let op = self.op()?;
        let value = match self.bump() {
            Tok::Number(x) => Literal::Number(x),
            Tok::Str(s) => Literal::Text(s),
            other => {
                self.pos -= 1;
                return self.fail(format!("expected a literal, found {other}"));
            }
        };
        Ok(LocalPredicate { attr, op, value })
    }

    fn query(&mut self) -> Result<PackageQuery, ParseError> {
        self.keyword("SELECT")?;
        self.keyword("PACKAGE")?;
        self.expect(Tok::LParen)?;
        match self.peek().tok {
            Tok::Star => {
                self.bump();
            }
            Tok::Ident(_) => {
                self.bump();
                self.expect(Tok::Dot)?;
                self.expect(Tok::Star)?;
            }
            ref other => return self.fail(format!("expected `*`, found {other}")),
        }
        self.expect(Tok::RParen)?;
        self.keyword("AS")?;
        self.alias = self.ident()?;
        self.keyword("FROM")?;
        let relation = self.ident()?;
        let reserved = ["REPEAT", "WHERE", "SUCH", "MAXIMIZE", "MINIMIZE"];
        let relation_alias = match &self.peek().tok {
            Tok::Ident(w) if !reserved.iter().any(|k| w.eq_ignore_ascii_case(k)) => Some(self.ident()?),
            _ => None,
        };
        let repeat = if self.at_keyword("REPEAT") {
            self.bump();
            let r = self.number()?;
            if r < 0.0 || r.fract() != 0.0 || r > f64::from(u32::MAX) {
                self.pos -= 1;
                return self.fail("REPEAT takes a non-negative integer");
            }
            Repeat::Limited(r as u32)
        } else {
            Repeat::Unbounded
        };
        let mut local_predicates = Vec::new();
        if self.at_keyword("WHERE") {
            self.bump();
            local_predicates.push(self.predicate()?);
            while self.at_keyword("AND") {
                self.bump();
                local_predicates.push(self.predicate()?);
            }
        }
        self.keyword("SUCH")?;
        self.keyword("THAT")?;
        // constraints may also follow each other without AND
        let mut constraints = vec![self.constraint()?];
        loop {
            if self.at_keyword("AND") {
                self.bump();
            } else if !self.starts_constraint() {
                break;
            }
            constraints.push(self.constraint()?);
        }
        let objective = if self.at_keyword("MAXIMIZE") || self.at_keyword("MINIMIZE") {
            let sense = if self.at_keyword("MAXIMIZE") { Sense::Maximize } else { Sense::Minimize };
            self.bump();
            match self.aggregate()? {
                Aggregate::Sum(attr) => Some(Objective { sense, attr }),
                _ => {
                    self.pos -= 1;
                    return self.fail("objective must be SUM(P.attr)");
                }
            }
        } else {
            None
        };
        if self.peek().tok == Tok::Semi {
            self.bump();
        }
        if self.peek().tok != Tok::End {
            return self.fail(format!("unexpected {} after query", self.peek().tok));
        }
        Ok(PackageQuery {
            alias: self.alias.clone(),
            relation,
            relation_alias,
            repeat,
            local_predicates,
            constraints,
            objective,
        })
    }
}

/// Mirror of a comparison when its operands swap sides.
fn flip(o: CmpOp) -> CmpOp {
    match o {
        CmpOp::Lt => CmpOp::Gt,
        CmpOp::Le => CmpOp::Ge,
        CmpOp::Ge => CmpOp::Le,
        CmpOp::Gt => CmpOp::Lt,
        other => other,
    }
}

/// Tighten `c` with `agg op x`.
fn apply(c: &mut GlobalConstraint, op: CmpOp, x: f64) -> Result<(), String> {
    match op {
        CmpOp::Le | CmpOp::Lt => c.upper = c.upper.min(x),
        CmpOp::Ge | CmpOp::Gt => c.lower = c.lower.max(x),
        CmpOp::Eq => {
            c.lower = c.lower.max(x);
            c.upper = c.upper.min(x);
        }
        CmpOp::Ne => return Err("`<>` is not allowed on aggregates".into()),
    }
    Ok(())
}

pub fn parse_paql(text: &str) -> Result<PackageQuery, ParseError> {
    let mut p = Parser {
        toks: lex(text)?,
        pos: 0,
        alias: String::new(),
    };
    p.query()
}

/// PaQL text of a query; parsing it back yields an equal query.
pub struct Paql<'a>(pub &'a PackageQuery);

impl fmt::Display for Paql<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let q = self.0;
        write!(f, "SELECT PACKAGE(*) AS {} FROM {}", q.alias, q.relation)?;
        if let Some(a) = &q.relation_alias {
            write!(f, " {a}")?;
        }
        if let Repeat::Limited(r) = q.repeat {
            write!(f, " REPEAT {r}")?;
        }
        for (i, p) in q.local_predicates.iter().enumerate() {
            let kw = if i == 0 { "\nWHERE" } else { " AND" };
            write!(f, "{kw} {} {} ", p.attr, p.op)?;
            match &p.value {
                Literal::Number(x) => write!(f, "{x}")?,
                Literal::Text(s) => write!(f, "'{s}'")?,
            }
        }
        f.write_str("\nSUCH THAT")?;
        for (i, c) in q.constraints.iter().enumerate() {
            if i > 0 {
                f.write_str(" AND\n   ")?;
            }
            let agg = aggregate_text(&c.aggregate, &q.alias);
            match (c.lower.is_finite(), c.upper.is_finite()) {
                _ if c.lower == c.upper => write!(f, " {agg} = {}", c.lower)?,
                (true, true) => write!(f, " {agg} BETWEEN {} AND {}", c.lower, c.upper)?,
                (true, false) if c.upper == f64::INFINITY => write!(f, " {agg} >= {}", c.lower)?,
                (false, true) if c.lower == f64::NEG_INFINITY => write!(f, " {agg} <= {}", c.upper)?,
                _ => write!(f, " {agg} BETWEEN {} AND {}", c.lower, c.upper)?,
            }
        }
        if let Some(o) = &q.objective {
            let kw = match o.sense {
                Sense::Maximize => "MAXIMIZE",
                Sense::Minimize => "MINIMIZE",
            };
            write!(f, "\n{kw} SUM({}.{})", q.alias, o.attr)?;
        }
        Ok(())
    }
}

fn aggregate_text(a: &Aggregate, alias: &str) -> String {
    match a {
        Aggregate::Count => format!("COUNT({alias}.*)"),
        Aggregate::Sum(x) => format!("SUM({alias}.{x})"),
        Aggregate::Avg(x) => format!("AVG({alias}.{x})"),
    }
}
