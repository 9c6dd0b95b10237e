//! Hand-written lexer and recursive-descent parser for the query subset.
//! See `docs/query-grammar.md` for the grammar.

use crate::kb::{Literal, LiteralKind, NodeId, PredicateId};

use super::ast::*;
use super::QueryError;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Var(String),
    Prefixed(String, String),
    Word(String),
    Str(String),
    Number(String),
    LBrace,
    RBrace,
    LParen,
    RParen,
    Dot,
    Star,
    Carets,
    Op(CompareOp),
    Eof,
}

impl Tok {
    fn describe(&self) -> String {
        match self {
            Tok::Var(v) => format!("variable ?{v}"),
            Tok::Prefixed(p, l) => format!("\"{p}:{l}\""),
            Tok::Word(w) => format!("\"{w}\""),
            Tok::Str(_) => "string literal".into(),
            Tok::Number(n) => format!("number {n}"),
            Tok::LBrace => "\"{\"".into(),
            Tok::RBrace => "\"}\"".into(),
            Tok::LParen => "\"(\"".into(),
            Tok::RParen => "\")\"".into(),
            Tok::Dot => "\".\"".into(),
            Tok::Star => "\"*\"".into(),
            Tok::Carets => "\"^^\"".into(),
            Tok::Op(op) => format!("\"{}\"", op.symbol()),
            Tok::Eof => "end of input".into(),
        }
    }
}

fn is_name_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || c == '_'
}

fn is_local_char(c: char) -> bool {
    c.is_ascii_alphanumeric() || matches!(c, '_' | '.' | '-')
}

fn lex(text: &str) -> Result<Vec<(usize, Tok)>, QueryError> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut out = Vec::new();
    let mut i = 0;
    let at = |i: usize| chars.get(i).map(|&(_, c)| c);
    let offset = |i: usize| chars.get(i).map_or(text.len(), |&(o, _)| o);
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i].1 != '\n' {
                i += 1;
            }
            continue;
        }
        let simple = match c {
            '{' => Some(Tok::LBrace),
            '}' => Some(Tok::RBrace),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '*' => Some(Tok::Star),
            '=' => Some(Tok::Op(CompareOp::Eq)),
            _ => None,
        };
        if let Some(t) = simple {
            out.push((start, t));
            i += 1;
            continue;
        }
        match c {
            '.' if !at(i + 1).is_some_and(|d| d.is_ascii_digit()) => {
                out.push((start, Tok::Dot));
                i += 1;
            }
            '!' | '<' | '>' => {
                let eq = at(i + 1) == Some('=');
                let op = match (c, eq) {
                    ('!', true) => CompareOp::Ne,
                    ('<', false) => CompareOp::Lt,
                    ('<', true) => CompareOp::Le,
                    ('>', false) => CompareOp::Gt,
                    ('>', true) => CompareOp::Ge,
                    _ => {
                        return Err(QueryError::Syntax {
                            offset: start,
                            expected: "\"!=\"".into(),
                            found: "\"!\"".into(),
                        })
                    }
                };
                out.push((start, Tok::Op(op)));
                i += if eq { 2 } else { 1 };
            }
            '^' => {
                if at(i + 1) != Some('^') {
                    return Err(QueryError::Syntax {
                        offset: start,
                        expected: "\"^^\"".into(),
                        found: "\"^\"".into(),
                    });
                }
                out.push((start, Tok::Carets));
                i += 2;
            }
            '?' | '$' => {
                let mut j = i + 1;
                while at(j).is_some_and(is_name_char) {
                    j += 1;
                }
                if j == i + 1 {
                    return Err(QueryError::Syntax {
                        offset: offset(j),
                        expected: "variable name".into(),
                        found: at(j).map_or("end of input".into(), |c| format!("{c:?}")),
                    });
                }
                out.push((start, Tok::Var(text[offset(i + 1)..offset(j)].to_owned())));
                i = j;
            }
            '"' | '\'' => {
                let quote = c;
                let mut j = i + 1;
                let mut s = String::new();
                loop {
                    match at(j) {
                        None => {
                            return Err(QueryError::Syntax {
                                offset: text.len(),
                                expected: format!("closing {quote}"),
                                found: "end of input".into(),
                            })
                        }
                        Some('\\') => {
                            let esc = at(j + 1).ok_or(QueryError::Syntax {
                                offset: text.len(),
                                expected: "escape character".into(),
                                found: "end of input".into(),
                            })?;
                            s.push(match esc {
                                'n' => '\n',
                                't' => '\t',
                                'r' => '\r',
                                other => other,
                            });
                            j += 2;
                        }
                        Some(ch) if ch == quote => break,
                        Some(ch) => {
                            s.push(ch);
                            j += 1;
                        }
                    }
                }
                out.push((start, Tok::Str(s)));
                i = j + 1;
            }
            c if c.is_ascii_digit() || ((c == '-' || c == '+' || c == '.') && at(i + 1).is_some_and(|d| d.is_ascii_digit() || d == '.')) => {
                let mut j = i + 1;
                let mut seen_dot = c == '.';
                while let Some(d) = at(j) {
                    if d.is_ascii_digit() {
                        j += 1;
                    } else if d == '.' && !seen_dot && at(j + 1).is_some_and(|e| e.is_ascii_digit()) {
                        seen_dot = true;
                        j += 1;
                    } else {
                        break;
                    }
                }
                out.push((start, Tok::Number(text[start..offset(j)].to_owned())));
                i = j;
            }
            c if c.is_ascii_alphabetic() || c == '_' => {
                let mut j = i + 1;
                while at(j).is_some_and(is_name_char) {
                    j += 1;
                }
                let word = text[start..offset(j)].to_owned();
                if at(j) == Some(':') {
                    let mut k = j + 1;
                    while at(k).is_some_and(is_local_char) {
                        k += 1;
                    }
                    // Local names may contain dots but never end with one.
                    while k > j + 1 && at(k - 1) == Some('.') {
                        k -= 1;
                    }
                    let local = text[offset(j + 1)..offset(k)].to_owned();
                    out.push((start, Tok::Prefixed(word, local)));
                    i = k;
                } else {
                    out.push((start, Tok::Word(word)));
                    i = j;
                }
            }
            other => {
                return Err(QueryError::Syntax {
                    offset: start,
                    expected: "a query token".into(),
                    found: format!("{other:?}"),
                })
            }
        }
    }
    out.push((text.len(), Tok::Eof));
    Ok(out)
}

struct Parser {
    toks: Vec<(usize, Tok)>,
    pos: usize,
}

type PResult<T> = Result<T, QueryError>;

impl Parser {
    fn peek(&self) -> &Tok {
        &self.toks[self.pos].1
    }

    fn offset(&self) -> usize {
        self.toks[self.pos].0
    }

    fn bump(&mut self) -> Tok {
        let t = self.toks[self.pos].1.clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn error<T>(&self, expected: impl Into<String>) -> PResult<T> {
        Err(QueryError::Syntax { offset: self.offset(), expected: expected.into(), found: self.peek().describe() })
    }

    fn is_word(&self, kw: &str) -> bool {
        matches!(self.peek(), Tok::Word(w) if w.eq_ignore_ascii_case(kw))
    }

    fn eat_word(&mut self, kw: &str) -> bool {
        if self.is_word(kw) {
            self.bump();
            true
        } else {
            false
        }
    }

    fn expect_word(&mut self, kw: &str) -> PResult<()> {
        if self.eat_word(kw) {
            Ok(())
        } else {
            self.error(format!("\"{kw}\""))
        }
    }

    fn expect(&mut self, tok: Tok) -> PResult<()> {
        if *self.peek() == tok {
            self.bump();
            Ok(())
        } else {
            self.error(tok.describe())
        }
    }

    fn var(&mut self) -> PResult<Var> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(Var(v))
            }
            _ => self.error("variable"),
        }
    }

    fn query(&mut self) -> PResult<Query> {
        let (form, distinct, projection) = if self.eat_word("ASK") {
            (QueryForm::Ask, false, Projection::Empty)
        } else if self.eat_word("SELECT") {
            let distinct = self.eat_word("DISTINCT");
            (QueryForm::Select, distinct, self.projection()?)
        } else {
            return self.error("\"SELECT\" or \"ASK\"");
        };
        self.eat_word("WHERE");
        let body = self.group()?;
        let mut order = None;
        if self.eat_word("ORDER") {
            self.expect_word("BY")?;
            let descending = if self.eat_word("DESC") {
                true
            } else {
                self.eat_word("ASC");
                false
            };
            let var = if *self.peek() == Tok::LParen {
                self.bump();
                let v = self.var()?;
                self.expect(Tok::RParen)?;
                v
            } else {
                self.var()?
            };
            order = Some(OrderBy { var, descending });
        }
        let mut limit = None;
        if self.eat_word("LIMIT") {
            match self.peek().clone() {
                Tok::Number(n) if n.bytes().all(|b| b.is_ascii_digit()) => {
                    let off = self.offset();
                    self.bump();
                    let v: usize = n.parse().map_err(|_| QueryError::Syntax {
                        offset: off,
                        expected: "positive integer".into(),
                        found: format!("number {n}"),
                    })?;
                    if v == 0 {
                        return Err(QueryError::Syntax {
                            offset: off,
                            expected: "positive integer".into(),
                            found: "number 0".into(),
                        });
                    }
                    limit = Some(v);
                }
                _ => return self.error("positive integer"),
            }
        }
        if *self.peek() != Tok::Eof {
            return self.error("end of input");
        }
        let mut query = Query { form, distinct, projection, body, order, limit };
        if let Projection::Vars(v) = &query.projection {
            if v.is_empty() {
                query.projection = Projection::Vars(query.body.variables());
            }
        }
        validate(&query)?;
        Ok(query)
    }

    fn projection(&mut self) -> PResult<Projection> {
        match self.peek() {
            Tok::Star => {
                self.bump();
                // Expanded to the body variables once the body is parsed.
                Ok(Projection::Vars(Vec::new()))
            }
            Tok::LParen => {
                self.bump();
                self.expect_word("COUNT")?;
                self.expect(Tok::LParen)?;
                let distinct = self.eat_word("DISTINCT");
                let var = self.var()?;
                self.expect(Tok::RParen)?;
                self.expect_word("AS")?;
                let alias = self.var()?;
                self.expect(Tok::RParen)?;
                Ok(Projection::Count { var, distinct, alias })
            }
            Tok::Var(_) => {
                let mut vars = Vec::new();
                while let Tok::Var(_) = self.peek() {
                    vars.push(self.var()?);
                }
                Ok(Projection::Vars(vars))
            }
            _ => self.error("projection (variables, \"*\" or COUNT)"),
        }
    }

    fn group(&mut self) -> PResult<GroupPattern> {
        self.expect(Tok::LBrace)?;
        let mut group = GroupPattern::default();
        loop {
            match self.peek() {
                Tok::RBrace => {
                    self.bump();
                    return Ok(group);
                }
                Tok::Dot => {
                    self.bump();
                }
                Tok::LBrace => {
                    let el = self.union()?;
                    group.elements.push(el);
                }
                Tok::Word(w) if w.eq_ignore_ascii_case("FILTER") => {
                    self.bump();
                    let f = self.filter()?;
                    group.elements.push(Element::Filter(f));
                }
                Tok::Eof => return self.error("\"}\""),
                _ => self.triple(&mut group)?,
            }
        }
    }

    fn union(&mut self) -> PResult<Element> {
        let mut branches = vec![self.group()?];
        if !self.is_word("UNION") {
            return self.error("\"UNION\"");
        }
        while self.eat_word("UNION") {
            branches.push(self.group()?);
        }
        // A UNION B UNION C = A UNION { B UNION C }
        let mut right = branches.pop().expect("at least two branches");
        let mut left = branches.pop().expect("at least two branches");
        while let Some(prev) = branches.pop() {
            let inner = GroupPattern { elements: vec![Element::Union(left, right)] };
            right = inner;
            left = prev;
        }
        Ok(Element::Union(left, right))
    }

    fn filter(&mut self) -> PResult<Filter> {
        self.expect(Tok::LParen)?;
        let left = self.term("filter operand", true)?;
        let op = match self.peek() {
            Tok::Op(op) => *op,
            _ => return self.error("comparison operator"),
        };
        self.bump();
        let right = self.term("filter operand", true)?;
        self.expect(Tok::RParen)?;
        Ok(Filter { left, op, right })
    }

    fn check_prefix(&self, prefix: &str) -> PResult<()> {
        if matches!(prefix, "e" | "p" | "pq") {
            Ok(())
        } else {
            Err(QueryError::UnknownPrefix { offset: self.offset(), prefix: prefix.to_owned() })
        }
    }

    fn term(&mut self, what: &str, allow_literal: bool) -> PResult<PatternTerm> {
        match self.peek().clone() {
            Tok::Var(v) => {
                self.bump();
                Ok(PatternTerm::Var(Var(v)))
            }
            Tok::Prefixed(prefix, local) => {
                self.check_prefix(&prefix)?;
                if prefix != "e" || local.is_empty() {
                    return self.error(what);
                }
                self.bump();
                Ok(PatternTerm::Node(NodeId(local)))
            }
            Tok::Str(_) | Tok::Number(_) if allow_literal => self.literal().map(PatternTerm::Literal),
            _ => self.error(what),
        }
    }

    fn literal(&mut self) -> PResult<Literal> {
        let off = self.offset();
        let bad = |kind: LiteralKind, lex: &str| QueryError::Syntax {
            offset: off,
            expected: format!("valid {} literal", kind.name()),
            found: format!("{lex:?}"),
        };
        match self.bump() {
            Tok::Number(n) => {
                let kind = if n.contains('.') { LiteralKind::Decimal } else { LiteralKind::Integer };
                Literal::new(kind, &n).map_err(|_| bad(kind, &n))
            }
            Tok::Str(s) => {
                if *self.peek() != Tok::Carets {
                    return Ok(Literal::string(s));
                }
                self.bump();
                let kind = match self.peek().clone() {
                    Tok::Word(w) => LiteralKind::from_name(&w.to_ascii_lowercase()),
                    Tok::Prefixed(p, l) if p == "xsd" => match l.as_str() {
                        "string" => Some(LiteralKind::String),
                        "integer" | "int" => Some(LiteralKind::Integer),
                        "decimal" | "double" | "float" => Some(LiteralKind::Decimal),
                        "date" => Some(LiteralKind::Date),
                        "gYear" => Some(LiteralKind::Year),
                        _ => None,
                    },
                    _ => None,
                };
                let Some(kind) = kind else {
                    return self.error("literal type (string, integer, decimal, date, year)");
                };
                self.bump();
                Literal::new(kind, &s).map_err(|_| bad(kind, &s))
            }
            _ => unreachable!("literal() called on a non-literal token"),
        }
    }

    fn triple(&mut self, group: &mut GroupPattern) -> PResult<()> {
        let subject = self.term("subject (variable or e:ID)", false)?;
        let (prefix, local) = match self.peek().clone() {
            Tok::Prefixed(p, l) => (p, l),
            _ => return self.error("predicate (p:ID or pq:ID)"),
        };
        self.check_prefix(&prefix)?;
        if prefix == "e" || local.is_empty() {
            return self.error("predicate (p:ID or pq:ID)");
        }
        let pred_offset = self.offset();
        self.bump();
        let object = self.term("object (variable, e:ID or literal)", true)?;
        match self.peek() {
            Tok::Dot | Tok::RBrace => {}
            _ => return self.error("\".\" or \"}\""),
        }
        let predicate = PredicateId(local);
        if prefix == "p" {
            group.elements.push(Element::Triple(TriplePattern { subject, predicate, object, qualifiers: Vec::new() }));
            return Ok(());
        }
        let owner = group.elements.iter_mut().rev().find_map(|e| match e {
            Element::Triple(tp) => Some(tp),
            _ => None,
        });
        match owner {
            Some(tp) if tp.subject == subject => {
                tp.qualifiers.push((predicate, object));
                Ok(())
            }
            Some(_) => Err(QueryError::Syntax {
                offset: pred_offset,
                expected: "qualifier subject matching the preceding statement pattern".into(),
                found: format!("{subject}"),
            }),
            None => Err(QueryError::Syntax {
                offset: pred_offset,
                expected: "a statement pattern before the qualifier pattern".into(),
                found: format!("\"pq:{predicate}\""),
            }),
        }
    }
}

fn validate(q: &Query) -> PResult<()> {
    let body_vars = q.body.variables();
    let invalid = |message: String| Err(QueryError::Invalid { message });
    if !q.body.has_triple() {
        return invalid("query body needs at least one triple pattern".into());
    }
    check_unions(&q.body)?;
    match &q.projection {
        Projection::Vars(vars) => {
            if vars.is_empty() {
                return invalid("SELECT needs at least one variable to project".into());
            }
            for v in vars {
                if !body_vars.contains(v) {
                    return invalid(format!("projected variable {v} does not appear in the body"));
                }
            }
        }
        Projection::Count { var, alias, .. } => {
            if !body_vars.contains(var) {
                return invalid(format!("counted variable {var} does not appear in the body"));
            }
            if body_vars.contains(alias) {
                return invalid(format!("COUNT alias {alias} is already used in the body"));
            }
        }
        Projection::Empty => {}
    }
    if let Some(o) = &q.order {
        if !body_vars.contains(&o.var) {
            return invalid(format!("ORDER BY variable {} does not appear in the body", o.var));
        }
    }
    Ok(())
}

fn check_unions(g: &GroupPattern) -> PResult<()> {
    for el in &g.elements {
        if let Element::Union(a, b) = el {
            if !a.has_triple() || !b.has_triple() {
                return Err(QueryError::Invalid { message: "every UNION branch needs a triple pattern".into() });
            }
            check_unions(a)?;
            check_unions(b)?;
        }
    }
    Ok(())
}

/// Parses query text. Never panics; every failure is a positioned error.
pub fn parse_query(text: &str) -> Result<Query, QueryError> {
    let toks = lex(text)?;
    Parser { toks, pos: 0 }.query()
}
