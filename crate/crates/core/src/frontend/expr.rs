//! Expression recognizer.
//!
//! Validates that a token slice is a well-formed Python expression list and
//! classifies every name token it contains. No tree is built: downstream
//! analyses only need to know which names are reads, which are attribute or
//! keyword-argument labels, and which are expression-local bindings.

use super::lexer::{Token, TokenKind};
use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NameRole {
    Read,
    Attribute,
    KeywordArg,
    /// Lambda parameter or comprehension target.
    LocalBinding,
    /// Target of `:=`.
    Walrus,
}

pub struct ExprParser<'t> {
    toks: &'t [Token],
    pos: usize,
    pub roles: Vec<(usize, NameRole)>,
}

type PResult<T = ()> = Result<T, SyntaxError>;

impl<'t> ExprParser<'t> {
    pub fn new(toks: &'t [Token]) -> Self {
        Self {
            toks,
            pos: 0,
            roles: Vec::new(),
        }
    }

    /// Parses the whole slice as a (possibly starred, possibly tuple)
    /// expression list.
    pub fn parse_all(toks: &'t [Token]) -> PResult<Vec<(usize, NameRole)>> {
        let mut p = Self::new(toks);
        if toks.is_empty() {
            return Err(SyntaxError {
                line: 0,
                message: "expected an expression".into(),
            });
        }
        p.star_exprs()?;
        p.expect_end()?;
        Ok(p.roles)
    }

    /// Parses a single `test` (no top-level tuple).
    pub fn parse_single(toks: &'t [Token]) -> PResult<Vec<(usize, NameRole)>> {
        let mut p = Self::new(toks);
        p.test()?;
        p.expect_end()?;
        Ok(p.roles)
    }

    fn expect_end(&self) -> PResult {
        if self.pos < self.toks.len() {
            return Err(self.error_here("invalid syntax"));
        }
        Ok(())
    }

    fn error_here(&self, msg: &str) -> SyntaxError {
        let line = self
            .toks
            .get(self.pos)
            .or_else(|| self.toks.last())
            .map(|t| t.line)
            .unwrap_or(0);
        let near = self.toks.get(self.pos).map(|t| t.text.as_str()).unwrap_or("end of line");
        SyntaxError {
            line,
            message: format!("{msg} near '{near}'"),
        }
    }

    fn peek(&self) -> Option<&'t Token> {
        self.toks.get(self.pos)
    }

    fn peek_is_op(&self, op: &str) -> bool {
        self.peek().is_some_and(|t| t.is_op(op))
    }

    fn peek_is_kw(&self, kw: &str) -> bool {
        self.peek().is_some_and(|t| t.is_keyword(kw))
    }

    fn eat_op(&mut self, op: &str) -> bool {
        if self.peek_is_op(op) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn eat_kw(&mut self, kw: &str) -> bool {
        if self.peek_is_kw(kw) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect_op(&mut self, op: &str) -> PResult {
        if self.eat_op(op) {
            Ok(())
        } else {
            Err(self.error_here(&format!("expected '{op}'")))
        }
    }

    /// True when the next token can begin an expression.
    fn starts_expr(&self) -> bool {
        match self.peek() {
            None => false,
            Some(t) => match t.kind {
                TokenKind::Name | TokenKind::Number | TokenKind::String => true,
                TokenKind::Keyword => matches!(
                    t.text.as_str(),
                    "None" | "True" | "False" | "not" | "lambda" | "await" | "yield"
                ),
                TokenKind::Op => matches!(
                    t.text.as_str(),
                    "(" | "[" | "{" | "-" | "+" | "~" | "*" | "**" | "..."
                ),
                _ => false,
            },
        }
    }

    fn star_exprs(&mut self) -> PResult {
        loop {
            self.star_expr()?;
            if !self.eat_op(",") {
                return Ok(());
            }
            if !self.starts_expr() {
                return Ok(());
            }
        }
    }

    fn star_expr(&mut self) -> PResult {
        if self.eat_op("*") {
            return self.bit_or();
        }
        self.named_expr()
    }

    fn named_expr(&mut self) -> PResult {
        if let (Some(a), Some(b)) = (self.toks.get(self.pos), self.toks.get(self.pos + 1)) {
            if a.kind == TokenKind::Name && b.is_op(":=") {
                self.roles.push((self.pos, NameRole::Walrus));
                self.pos += 2;
                return self.test();
            }
        }
        self.test()
    }

    fn test(&mut self) -> PResult {
        if self.peek_is_kw("lambda") {
            return self.lambda();
        }
        if self.peek_is_kw("yield") {
            self.pos += 1;
            self.eat_kw("from");
            if self.starts_expr() {
                self.star_exprs()?;
            }
            return Ok(());
        }
        self.or_test()?;
        if self.eat_kw("if") {
            self.or_test()?;
            if !self.eat_kw("else") {
                return Err(self.error_here("expected 'else' in conditional expression"));
            }
            self.test()?;
        }
        Ok(())
    }

    /// `test` without the conditional tail, as used inside comprehension ifs.
    fn test_nocond(&mut self) -> PResult {
        if self.peek_is_kw("lambda") {
            return self.lambda();
        }
        self.or_test()
    }

    fn lambda(&mut self) -> PResult {
        let from = self.roles.len();
        self.pos += 1;
        while !self.peek_is_op(":") {
            let Some(t) = self.peek() else {
                return Err(self.error_here("expected ':' in lambda"));
            };
            match t.kind {
                TokenKind::Name => {
                    self.roles.push((self.pos, NameRole::LocalBinding));
                    self.pos += 1;
                    if self.eat_op("=") {
                        self.test()?;
                    }
                }
                TokenKind::Op if matches!(t.text.as_str(), "," | "*" | "**" | "/") => self.pos += 1,
                _ => return Err(self.error_here("invalid lambda parameter")),
            }
        }
        self.pos += 1;
        self.test()?;
        self.rebind_locals(from);
        Ok(())
    }

    /// Reclassifies reads of names bound locally (lambda parameters,
    /// comprehension targets) within `roles[from..]`.
    fn rebind_locals(&mut self, from: usize) {
        let bound: Vec<&str> = self.roles[from..]
            .iter()
            .filter(|(_, r)| *r == NameRole::LocalBinding)
            .map(|(i, _)| self.toks[*i].text.as_str())
            .collect();
        if bound.is_empty() {
            return;
        }
        let toks = self.toks;
        for entry in &mut self.roles[from..] {
            if entry.1 == NameRole::Read && bound.contains(&toks[entry.0].text.as_str()) {
                entry.1 = NameRole::LocalBinding;
            }
        }
    }

    fn or_test(&mut self) -> PResult {
        self.and_test()?;
        while self.eat_kw("or") {
            self.and_test()?;
        }
        Ok(())
    }

    fn and_test(&mut self) -> PResult {
        self.not_test()?;
        while self.eat_kw("and") {
            self.not_test()?;
        }
        Ok(())
    }

    fn not_test(&mut self) -> PResult {
        if self.eat_kw("not") {
            return self.not_test();
        }
        self.comparison()
    }

    fn comparison(&mut self) -> PResult {
        self.bit_or()?;
        loop {
            let is_cmp = match self.peek() {
                Some(t) if t.kind == TokenKind::Op => {
                    matches!(t.text.as_str(), "<" | ">" | "==" | ">=" | "<=" | "!=")
                }
                Some(t) if t.is_keyword("in") => true,
                Some(t) if t.is_keyword("is") => {
                    self.pos += 1;
                    self.eat_kw("not");
                    self.pos -= 1;
                    true
                }
                Some(t) if t.is_keyword("not") => {
                    if self.toks.get(self.pos + 1).is_some_and(|n| n.is_keyword("in")) {
                        self.pos += 1;
                        true
                    } else {
                        false
                    }
                }
                _ => false,
            };
            if !is_cmp {
                return Ok(());
            }
            if self.peek_is_kw("is") {
                self.pos += 1;
                self.eat_kw("not");
            } else {
                self.pos += 1;
            }
            self.bit_or()?;
        }
    }

    fn bit_or(&mut self) -> PResult {
        const BINARY: &[&str] = &["|", "^", "&", "<<", ">>", "+", "-", "*", "/", "//", "%", "@"];
        self.unary()?;
        while self
            .peek()
            .is_some_and(|t| t.kind == TokenKind::Op && BINARY.contains(&t.text.as_str()))
        {
            self.pos += 1;
            self.unary()?;
        }
        Ok(())
    }

    fn unary(&mut self) -> PResult {
        if self.eat_op("-") || self.eat_op("+") || self.eat_op("~") {
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> PResult {
        self.eat_kw("await");
        self.primary()?;
        if self.eat_op("**") {
            self.unary()?;
        }
        Ok(())
    }

    fn primary(&mut self) -> PResult {
        self.atom()?;
        loop {
            if self.eat_op("(") {
                self.arglist()?;
                self.expect_op(")")?;
            } else if self.eat_op("[") {
                self.subscripts()?;
                self.expect_op("]")?;
            } else if self.eat_op(".") {
                match self.peek() {
                    Some(t) if t.kind == TokenKind::Name => {
                        self.roles.push((self.pos, NameRole::Attribute));
                        self.pos += 1;
                    }
                    _ => return Err(self.error_here("expected attribute name")),
                }
            } else {
                return Ok(());
            }
        }
    }

    fn atom(&mut self) -> PResult {
        let Some(t) = self.peek() else {
            return Err(self.error_here("expected an expression"));
        };
        match t.kind {
            TokenKind::Name => {
                self.roles.push((self.pos, NameRole::Read));
                self.pos += 1;
                Ok(())
            }
            TokenKind::Number => {
                self.pos += 1;
                Ok(())
            }
            TokenKind::String => {
                while self.peek().is_some_and(|t| t.kind == TokenKind::String) {
                    self.pos += 1;
                }
                Ok(())
            }
            TokenKind::Keyword if matches!(t.text.as_str(), "None" | "True" | "False") => {
                self.pos += 1;
                Ok(())
            }
            TokenKind::Op => match t.text.as_str() {
                "..." => {
                    self.pos += 1;
                    Ok(())
                }
                "(" => {
                    self.pos += 1;
                    if self.eat_op(")") {
                        return Ok(());
                    }
                    if self.peek_is_kw("yield") {
                        self.test()?;
                    } else {
                        let from = self.roles.len();
                        self.star_expr()?;
                        if self.peek_is_kw("for") || self.peek_is_kw("async") {
                            self.comp_for(from)?;
                        } else if self.eat_op(",") && self.starts_expr() {
                            self.star_exprs()?;
                        }
                    }
                    self.expect_op(")")
                }
                "[" => {
                    self.pos += 1;
                    if self.eat_op("]") {
                        return Ok(());
                    }
                    let from = self.roles.len();
                    self.star_expr()?;
                    if self.peek_is_kw("for") || self.peek_is_kw("async") {
                        self.comp_for(from)?;
                    } else if self.eat_op(",") && self.starts_expr() {
                        self.star_exprs()?;
                    }
                    self.expect_op("]")
                }
                "{" => {
                    self.pos += 1;
                    if self.eat_op("}") {
                        return Ok(());
                    }
                    self.dict_or_set()?;
                    self.expect_op("}")
                }
                _ => Err(self.error_here("invalid syntax")),
            },
            _ => Err(self.error_here("invalid syntax")),
        }
    }

    fn dict_or_set(&mut self) -> PResult {
        let from = self.roles.len();
        let is_dict = if self.eat_op("**") {
            self.bit_or()?;
            true
        } else {
            self.star_expr()?;
            if self.eat_op(":") {
                self.test()?;
                true
            } else {
                false
            }
        };
        if self.peek_is_kw("for") || self.peek_is_kw("async") {
            return self.comp_for(from);
        }
        while self.eat_op(",") {
            if self.peek_is_op("}") {
                break;
            }
            if is_dict {
                if self.eat_op("**") {
                    self.bit_or()?;
                } else {
                    self.test()?;
                    self.expect_op(":")?;
                    self.test()?;
                }
            } else {
                self.star_expr()?;
            }
        }
        Ok(())
    }

    fn comp_for(&mut self, from: usize) -> PResult {
        self.comp_clauses()?;
        self.rebind_locals(from);
        Ok(())
    }

    fn comp_clauses(&mut self) -> PResult {
        self.eat_kw("async");
        if !self.eat_kw("for") {
            return Err(self.error_here("expected 'for'"));
        }
        self.comp_targets()?;
        if !self.eat_kw("in") {
            return Err(self.error_here("expected 'in'"));
        }
        self.or_test()?;
        loop {
            if self.peek_is_kw("for") || self.peek_is_kw("async") {
                return self.comp_clauses();
            }
            if self.eat_kw("if") {
                self.test_nocond()?;
                continue;
            }
            return Ok(());
        }
    }

    /// Comprehension targets: names (possibly in tuples) bound locally.
    fn comp_targets(&mut self) -> PResult {
        let start = self.roles.len();
        loop {
            if self.eat_op("*") {
                continue;
            }
            let before = self.pos;
            self.bit_or()?;
            if self.pos == before {
                return Err(self.error_here("invalid comprehension target"));
            }
            if !self.eat_op(",") || self.peek_is_kw("in") {
                break;
            }
        }
        for entry in &mut self.roles[start..] {
            if entry.1 == NameRole::Read {
                entry.1 = NameRole::LocalBinding;
            }
        }
        Ok(())
    }

    fn arglist(&mut self) -> PResult {
        while !self.peek_is_op(")") {
            if self.eat_op("**") || self.eat_op("*") {
                self.test()?;
            } else if let (Some(a), Some(b)) = (self.toks.get(self.pos), self.toks.get(self.pos + 1)) {
                if a.kind == TokenKind::Name && b.is_op("=") {
                    self.roles.push((self.pos, NameRole::KeywordArg));
                    self.pos += 2;
                    self.test()?;
                } else {
                    let from = self.roles.len();
                    self.named_expr()?;
                    if self.peek_is_kw("for") || self.peek_is_kw("async") {
                        self.comp_for(from)?;
                    }
                }
            } else {
                self.named_expr()?;
            }
            if !self.eat_op(",") {
                break;
            }
        }
        Ok(())
    }

    fn subscripts(&mut self) -> PResult {
        loop {
            self.slice()?;
            if !self.eat_op(",") || self.peek_is_op("]") {
                return Ok(());
            }
        }
    }

    fn slice(&mut self) -> PResult {
        if !self.peek_is_op(":") {
            self.star_expr()?;
        }
        if self.eat_op(":") {
            if self.starts_expr() {
                self.test()?;
            }
            if self.eat_op(":") && self.starts_expr() {
                self.test()?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::frontend::lexer::tokenize;

    fn code(src: &str) -> Vec<Token> {
        tokenize(src).unwrap().into_iter().filter(|t| t.is_code()).collect()
    }

    fn roles(src: &str) -> Vec<(String, NameRole)> {
        let toks = code(src);
        ExprParser::parse_all(&toks)
            .unwrap()
            .into_iter()
            .map(|(i, r)| (toks[i].text.clone(), r))
            .collect()
    }

    #[test]
    fn accepts_common_forms() {
        for src in [
            "a + b * -c ** 2",
            "f(x, y=1, *args, **kw)",
            "[i * 2 for i in range(10) if i % 2 == 0]",
            "{k: v for k, v in d.items()}",
            "{1, 2, 3}",
            "x if x > 0 else -x",
            "lambda a, b=2: a + b",
            "not a in b and c is not None",
            "s[1:2], s[::2], s[a, b]",
            "(n := 10) > 5",
            "'a' 'b' + f'{x}'",
            "()",
            "(1,)",
            "*rest, last",
            "a < b <= c != d",
        ] {
            let toks = code(src);
            ExprParser::parse_all(&toks).unwrap_or_else(|e| panic!("{src}: {e}"));
        }
    }

    #[test]
    fn rejects_malformed() {
        for src in ["a +", "f(,)", "a b", "(a for)", "x if y", "[1, 2", "a ."] {
            let Ok(toks) = tokenize(src) else { continue };
            let toks: Vec<_> = toks.into_iter().filter(|t| t.is_code()).collect();
            assert!(ExprParser::parse_all(&toks).is_err(), "{src} should fail");
        }
    }

    #[test]
    fn classifies_names() {
        let r = roles("print(msg.upper(), end=sep)");
        assert_eq!(
            r,
            vec![
                ("print".to_string(), NameRole::Read),
                ("msg".to_string(), NameRole::Read),
                ("upper".to_string(), NameRole::Attribute),
                ("end".to_string(), NameRole::KeywordArg),
                ("sep".to_string(), NameRole::Read),
            ]
        );
        let r = roles("[x for x in xs]");
        assert_eq!(r[0].1, NameRole::LocalBinding);
        assert_eq!(r[1].1, NameRole::LocalBinding);
        assert_eq!(r[2], ("xs".to_string(), NameRole::Read));
    }
}
