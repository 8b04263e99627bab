//! Statement-level parser: groups logical lines into a block tree.
//!
//! Statements inside the supported subset are validated with the expression
//! recognizer; anything else that tokenizes becomes `StmtKind::Opaque`.

use std::ops::Range;

use super::expr::{ExprParser, NameRole};
use super::lexer::{Token, TokenKind};
use super::SyntaxError;

#[derive(Debug, Clone)]
pub struct Param {
    pub name: usize,
    pub default: Option<Range<usize>>,
}

#[derive(Debug, Clone)]
pub enum StmtKind {
    FunctionDef { name: usize, params: Vec<Param> },
    If,
    Elif,
    Else,
    While,
    For { iter: Range<usize> },
    Assign { targets: Vec<Range<usize>>, value: Range<usize> },
    AugAssign,
    AnnAssign { value: Option<Range<usize>> },
    Return,
    Pass,
    Break,
    Continue,
    Global { names: Vec<usize> },
    Expr,
    Opaque,
}

#[derive(Debug, Clone)]
pub struct Stmt {
    pub kind: StmtKind,
    /// Code-token range of the statement itself (for compound statements, the
    /// header including the trailing `:`).
    pub tokens: Range<usize>,
    pub first_line: usize,
    /// Last physical line of the header.
    pub header_end_line: usize,
    /// Last physical line including the body.
    pub last_line: usize,
    pub body: Vec<Stmt>,
    /// Roles for name tokens in `tokens`, as absolute code-token indices.
    pub roles: Vec<(usize, NameRole)>,
    /// Name tokens (absolute indices) bound by this statement.
    pub bindings: Vec<usize>,
}

const COMPOUND: &[&str] = &[
    "def", "if", "elif", "else", "while", "for", "class", "try", "except", "finally", "with",
    "async",
];

pub struct StmtParser<'t> {
    code: &'t [Token],
    pos: usize,
}

type PResult<T> = Result<T, SyntaxError>;

fn err(line: usize, msg: impl Into<String>) -> SyntaxError {
    SyntaxError {
        line,
        message: msg.into(),
    }
}

impl<'t> StmtParser<'t> {
    pub fn parse(code: &'t [Token]) -> PResult<Vec<Stmt>> {
        let mut p = Self { code, pos: 0 };
        p.block(false)
    }

    fn peek(&self) -> &'t Token {
        &self.code[self.pos.min(self.code.len() - 1)]
    }

    fn block(&mut self, nested: bool) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        loop {
            let t = self.peek();
            match t.kind {
                TokenKind::EndMarker => {
                    if nested {
                        return Err(err(t.line, "unexpected end of file in block"));
                    }
                    return Ok(out);
                }
                TokenKind::Dedent => {
                    self.pos += 1;
                    if nested {
                        return Ok(out);
                    }
                }
                TokenKind::Indent => return Err(err(t.line, "unexpected indent")),
                TokenKind::Newline => self.pos += 1,
                _ => out.extend(self.statement()?),
            }
        }
    }

    /// Parses one logical line (and its block, if compound).
    fn statement(&mut self) -> PResult<Vec<Stmt>> {
        let start = self.pos;
        let mut end = start;
        while !matches!(self.code[end].kind, TokenKind::Newline | TokenKind::EndMarker) {
            end += 1;
        }
        let first = &self.code[start];
        let is_compound = first.kind == TokenKind::Keyword && COMPOUND.contains(&first.text.as_str());
        if !is_compound {
            self.pos = end + 1;
            return self.simple_line(start..end);
        }
        let colon = self
            .header_colon(start..end)
            .ok_or_else(|| err(first.line, format!("expected ':' after '{}'", first.text)))?;
        let mut stmt = self.compound_header(start..colon + 1)?;
        if colon + 1 < end {
            // One-line body: `if x: y = 1`.
            stmt.body = self.simple_line(colon + 1..end)?;
            self.pos = end + 1;
        } else {
            self.pos = end + 1;
            if self.peek().kind != TokenKind::Indent {
                return Err(err(self.code[colon].line, "expected an indented block"));
            }
            self.pos += 1;
            stmt.body = self.block(true)?;
        }
        stmt.last_line = stmt
            .body
            .iter()
            .map(|s| s.last_line)
            .max()
            .unwrap_or(stmt.header_end_line)
            .max(stmt.header_end_line);
        Ok(vec![stmt])
    }

    /// First `:` at bracket depth 0 that is not part of a lambda.
    fn header_colon(&self, r: Range<usize>) -> Option<usize> {
        let mut depth = 0i32;
        let mut lambdas = 0;
        for i in r {
            let t = &self.code[i];
            if t.kind == TokenKind::Op {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    ":" if depth == 0 => {
                        if lambdas > 0 {
                            lambdas -= 1;
                        } else {
                            return Some(i);
                        }
                    }
                    _ => {}
                }
            } else if t.is_keyword("lambda") && depth == 0 {
                lambdas += 1;
            }
        }
        None
    }

    fn make(&self, kind: StmtKind, r: Range<usize>) -> Stmt {
        let first_line = self.code[r.start].line;
        let header_end_line = self.code[r.start..r.end]
            .iter()
            .map(|t| t.end_line)
            .max()
            .unwrap_or(first_line);
        Stmt {
            kind,
            tokens: r,
            first_line,
            header_end_line,
            last_line: header_end_line,
            body: Vec::new(),
            roles: Vec::new(),
            bindings: Vec::new(),
        }
    }

    fn expr_roles(&self, r: Range<usize>, line: usize) -> PResult<Vec<(usize, NameRole)>> {
        if r.is_empty() {
            return Err(err(line, "expected an expression"));
        }
        let roles = ExprParser::parse_all(&self.code[r.clone()]).map_err(|mut e| {
            if e.line == 0 {
                e.line = line;
            }
            e
        })?;
        Ok(roles.into_iter().map(|(i, role)| (i + r.start, role)).collect())
    }

    fn compound_header(&self, r: Range<usize>) -> PResult<Stmt> {
        let kw = &self.code[r.start];
        let line = kw.line;
        let inner = r.start + 1..r.end - 1;
        match kw.text.as_str() {
            "def" => self.function_header(r),
            "if" | "elif" | "while" => {
                let roles = self.expr_roles(inner, line)?;
                let kind = match kw.text.as_str() {
                    "if" => StmtKind::If,
                    "elif" => StmtKind::Elif,
                    _ => StmtKind::While,
                };
                let mut s = self.make(kind, r);
                s.roles = roles;
                Ok(s)
            }
            "else" => {
                if !inner.is_empty() {
                    return Err(err(line, "invalid syntax after 'else'"));
                }
                Ok(self.make(StmtKind::Else, r))
            }
            "for" => {
                let in_pos = (inner.clone())
                    .find(|&i| self.code[i].is_keyword("in") && self.depth_at(inner.start, i) == 0)
                    .ok_or_else(|| err(line, "expected 'in' in for statement"))?;
                let target = inner.start..in_pos;
                let iter = in_pos + 1..inner.end;
                let (mut roles, bindings) = self.target_roles(target.clone(), line)?;
                roles.extend(self.expr_roles(iter.clone(), line)?);
                let mut s = self.make(StmtKind::For { iter }, r);
                s.roles = roles;
                s.bindings = bindings;
                Ok(s)
            }
            _ => {
                let mut s = self.make(StmtKind::Opaque, r.clone());
                let (roles, bindings) = self.opaque_roles(r);
                s.roles = roles;
                s.bindings = bindings;
                Ok(s)
            }
        }
    }

    fn depth_at(&self, from: usize, to: usize) -> i32 {
        let mut depth = 0;
        for t in &self.code[from..to] {
            if t.kind == TokenKind::Op {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    _ => {}
                }
            }
        }
        depth
    }

    fn function_header(&self, r: Range<usize>) -> PResult<Stmt> {
        let line = self.code[r.start].line;
        let name = r.start + 1;
        if self.code.get(name).is_none_or(|t| t.kind != TokenKind::Name) {
            return Err(err(line, "expected function name after 'def'"));
        }
        if !self.code[name + 1].is_op("(") {
            return Err(err(line, "expected '(' after function name"));
        }
        // Find the matching close paren of the parameter list.
        let mut depth = 0;
        let mut close = None;
        for i in name + 1..r.end {
            let t = &self.code[i];
            if t.is_op("(") || t.is_op("[") || t.is_op("{") {
                depth += 1;
            } else if t.is_op(")") || t.is_op("]") || t.is_op("}") {
                depth -= 1;
                if depth == 0 {
                    close = Some(i);
                    break;
                }
            }
        }
        let close = close.ok_or_else(|| err(line, "unclosed parameter list"))?;
        let mut roles = Vec::new();
        let mut params = Vec::new();
        for part in self.split_top(name + 2..close, ",") {
            if part.is_empty() {
                continue;
            }
            let mut p = part.start;
            while self.code[p].is_op("*") || self.code[p].is_op("**") {
                p += 1;
            }
            let t = &self.code[p];
            if t.is_op("/") && part.len() == 1 || self.code[part.start].is_op("*") && part.len() == 1 {
                continue;
            }
            if t.kind != TokenKind::Name {
                return Err(err(t.line, format!("invalid parameter near '{}'", t.text)));
            }
            let rest = p + 1..part.end;
            let eq = rest.clone().find(|&i| self.code[i].is_op("=") && self.depth_at(p, i) == 0);
            let annotation_end = eq.unwrap_or(part.end);
            if p + 1 < annotation_end {
                if !self.code[p + 1].is_op(":") {
                    return Err(err(t.line, "invalid parameter syntax"));
                }
                roles.extend(self.expr_roles(p + 2..annotation_end, t.line)?);
            }
            let default = eq.map(|e| e + 1..part.end);
            if let Some(d) = &default {
                roles.extend(self.expr_roles(d.clone(), t.line)?);
            }
            params.push(Param { name: p, default });
        }
        let after = close + 1;
        if after < r.end - 1 {
            if !self.code[after].is_op("->") {
                return Err(err(line, "invalid syntax in function header"));
            }
            roles.extend(self.expr_roles(after + 1..r.end - 1, line)?);
        }
        let mut s = self.make(StmtKind::FunctionDef { name, params }, r);
        s.roles = roles;
        s.bindings = vec![name];
        Ok(s)
    }

    /// Splits `r` on a top-level operator.
    fn split_top(&self, r: Range<usize>, op: &str) -> Vec<Range<usize>> {
        let mut parts = Vec::new();
        let mut depth = 0;
        let mut start = r.start;
        for i in r.clone() {
            let t = &self.code[i];
            if t.kind == TokenKind::Op {
                match t.text.as_str() {
                    "(" | "[" | "{" => depth += 1,
                    ")" | "]" | "}" => depth -= 1,
                    s if s == op && depth == 0 => {
                        parts.push(start..i);
                        start = i + 1;
                    }
                    _ => {}
                }
            }
        }
        parts.push(start..r.end);
        parts
    }

    fn simple_line(&self, r: Range<usize>) -> PResult<Vec<Stmt>> {
        let mut out = Vec::new();
        let parts = self.split_top(r.clone(), ";");
        let n = parts.len();
        for (i, part) in parts.into_iter().enumerate() {
            if part.is_empty() {
                // A trailing `;` is allowed.
                if i == n - 1 && i > 0 {
                    continue;
                }
                let line = self.code.get(r.start).map(|t| t.line).unwrap_or(1);
                return Err(err(line, "invalid syntax: empty statement"));
            }
            out.push(self.simple(part)?);
        }
        Ok(out)
    }

    fn simple(&self, r: Range<usize>) -> PResult<Stmt> {
        let first = &self.code[r.start];
        let line = first.line;
        let rest = r.start + 1..r.end;
        if first.kind == TokenKind::Keyword {
            match first.text.as_str() {
                "pass" | "break" | "continue" => {
                    if !rest.is_empty() {
                        return Err(err(line, format!("invalid syntax after '{}'", first.text)));
                    }
                    let kind = match first.text.as_str() {
                        "pass" => StmtKind::Pass,
                        "break" => StmtKind::Break,
                        _ => StmtKind::Continue,
                    };
                    return Ok(self.make(kind, r));
                }
                "return" => {
                    let roles = if rest.is_empty() {
                        Vec::new()
                    } else {
                        self.expr_roles(rest, line)?
                    };
                    let mut s = self.make(StmtKind::Return, r);
                    s.roles = roles;
                    return Ok(s);
                }
                "global" | "nonlocal" => {
                    let mut names = Vec::new();
                    for part in self.split_top(rest, ",") {
                        if part.len() != 1 || self.code[part.start].kind != TokenKind::Name {
                            return Err(err(line, "invalid name list"));
                        }
                        names.push(part.start);
                    }
                    let global = first.text == "global";
                    let mut s = self.make(
                        if global {
                            StmtKind::Global { names }
                        } else {
                            StmtKind::Opaque
                        },
                        r,
                    );
                    if !global {
                        s.roles = Vec::new();
                    }
                    return Ok(s);
                }
                "del" | "assert" => {
                    let roles = self.expr_roles(rest, line)?;
                    let mut s = self.make(StmtKind::Opaque, r);
                    s.roles = roles;
                    return Ok(s);
                }
                "import" | "from" | "raise" => {
                    let mut s = self.make(StmtKind::Opaque, r.clone());
                    let (roles, bindings) = self.opaque_roles(r);
                    s.roles = roles;
                    s.bindings = bindings;
                    return Ok(s);
                }
                _ => {}
            }
        }

        // Annotated assignment: `x: int = 5`.
        if let Some(colon) = (r.clone()).find(|&i| self.code[i].is_op(":") && self.depth_at(r.start, i) == 0) {
            let target = r.start..colon;
            let (mut roles, mut bindings) = self.target_roles(target.clone(), line)?;
            let rest = colon + 1..r.end;
            let parts = self.split_top(rest.clone(), "=");
            let value = match parts.as_slice() {
                [annotation] => {
                    roles.extend(self.expr_roles(annotation.clone(), line)?);
                    // A bare annotation binds nothing.
                    bindings.clear();
                    None
                }
                [annotation, value] => {
                    roles.extend(self.expr_roles(annotation.clone(), line)?);
                    roles.extend(self.expr_roles(value.clone(), line)?);
                    Some(value.clone())
                }
                _ => return Err(err(line, "invalid annotated assignment")),
            };
            let mut s = self.make(StmtKind::AnnAssign { value }, r);
            s.roles = roles;
            s.bindings = bindings;
            return Ok(s);
        }

        // Assignment forms.
        let eq_parts = self.split_top(r.clone(), "=");
        if eq_parts.len() > 1 {
            let (value, targets) = eq_parts.split_last().unwrap();
            let mut roles = Vec::new();
            let mut bindings = Vec::new();
            for t in targets {
                if t.is_empty() {
                    return Err(err(line, "invalid syntax: missing assignment target"));
                }
                let (tr, tb) = self.target_roles(t.clone(), line)?;
                roles.extend(tr);
                bindings.extend(tb);
            }
            if self.code[value.start..value.end].first().is_some_and(|t| t.is_keyword("yield")) {
                roles.extend(self.yield_roles(value.clone(), line)?);
            } else {
                roles.extend(self.expr_roles(value.clone(), line)?);
            }
            let mut s = self.make(
                StmtKind::Assign {
                    targets: targets.to_vec(),
                    value: value.clone(),
                },
                r,
            );
            s.roles = roles;
            s.bindings = bindings;
            return Ok(s);
        }

        const AUG: &[&str] = &[
            "+=", "-=", "*=", "/=", "//=", "%=", "**=", ">>=", "<<=", "&=", "|=", "^=", "@=",
        ];
        if let Some(op) = (r.clone()).find(|&i| {
            self.code[i].kind == TokenKind::Op
                && AUG.contains(&self.code[i].text.as_str())
                && self.depth_at(r.start, i) == 0
        }) {
            let target = r.start..op;
            let value = op + 1..r.end;
            let (mut roles, bindings) = self.target_roles(target.clone(), line)?;
            // The target of an augmented assignment is also read.
            for entry in &mut roles {
                if bindings.contains(&entry.0) {
                    entry.1 = NameRole::Read;
                }
            }
            roles.extend(self.expr_roles(value.clone(), line)?);
            let mut s = self.make(StmtKind::AugAssign, r);
            s.roles = roles;
            s.bindings = bindings;
            return Ok(s);
        }

        let roles = if first.is_keyword("yield") {
            self.yield_roles(r.clone(), line)?
        } else {
            self.expr_roles(r.clone(), line)?
        };
        let mut s = self.make(StmtKind::Expr, r);
        s.roles = roles;
        Ok(s)
    }

    fn yield_roles(&self, r: Range<usize>, line: usize) -> PResult<Vec<(usize, NameRole)>> {
        let roles = ExprParser::parse_single(&self.code[r.clone()]).map_err(|mut e| {
            if e.line == 0 {
                e.line = line;
            }
            e
        })?;
        Ok(roles.into_iter().map(|(i, role)| (i + r.start, role)).collect())
    }

    /// Validates an assignment target and returns (roles, bound names).
    fn target_roles(&self, r: Range<usize>, line: usize) -> PResult<(Vec<(usize, NameRole)>, Vec<usize>)> {
        let mut roles = self.expr_roles(r.clone(), line)?;
        // A name is bound when it sits at "grouping" depth only (plain name or
        // inside tuple/list displays) and is not the base of a trailer.
        let mut stack: Vec<bool> = Vec::new(); // true = trailer bracket
        let mut bindings = Vec::new();
        for i in r.clone() {
            let t = &self.code[i];
            let in_trailer = stack.iter().any(|&b| b);
            match t.kind {
                TokenKind::Op if matches!(t.text.as_str(), "(" | "[" | "{") => {
                    let prev = (i > r.start).then(|| &self.code[i - 1]);
                    let trailer = t.text == "{"
                        || prev.is_some_and(|p| {
                            p.kind == TokenKind::Name
                                || p.kind == TokenKind::String
                                || p.is_op(")")
                                || p.is_op("]")
                        });
                    stack.push(trailer);
                }
                TokenKind::Op if matches!(t.text.as_str(), ")" | "]" | "}") => {
                    let trailer = stack.pop().unwrap_or(false);
                    if trailer && !in_trailer_after(self.code, i, r.end) && stack.iter().all(|&b| !b) {
                        // `f(x) = 1` or `a[i] = 1`: only subscripts/attributes are assignable.
                        if t.text == ")" {
                            return Err(err(t.line, "cannot assign to function call"));
                        }
                    }
                }
                TokenKind::Name if !in_trailer => {
                    let next = self.code.get(i + 1).filter(|_| i + 1 < r.end);
                    let is_base = next.is_some_and(|n| n.is_op(".") || n.is_op("[") || n.is_op("("));
                    let is_attr = i > r.start && self.code[i - 1].is_op(".");
                    if !is_base && !is_attr {
                        bindings.push(i);
                    }
                }
                TokenKind::Number | TokenKind::String if !in_trailer => {
                    return Err(err(t.line, "cannot assign to literal"));
                }
                TokenKind::Keyword if !in_trailer => {
                    return Err(err(t.line, format!("cannot assign to '{}'", t.text)));
                }
                TokenKind::Op if !in_trailer && !matches!(t.text.as_str(), "," | "*" | ".") => {
                    return Err(err(t.line, "cannot assign to expression"));
                }
                _ => {}
            }
        }
        for entry in &mut roles {
            if bindings.contains(&entry.0) {
                entry.1 = NameRole::LocalBinding;
            }
        }
        // Bound names are reported through `bindings`, not as roles.
        roles.retain(|(i, _)| !bindings.contains(i));
        Ok((roles, bindings))
    }

    /// Loose name classification for statements outside the subset.
    fn opaque_roles(&self, r: Range<usize>) -> (Vec<(usize, NameRole)>, Vec<usize>) {
        let mut roles = Vec::new();
        let mut bindings = Vec::new();
        let first = &self.code[r.start];
        let import_like = first.is_keyword("import") || first.is_keyword("from");
        let mut after_import_kw = false;
        for i in r.clone() {
            let t = &self.code[i];
            if t.is_keyword("import") {
                after_import_kw = true;
            }
            if t.kind != TokenKind::Name {
                continue;
            }
            let prev = (i > r.start).then(|| &self.code[i - 1]);
            let next = (i + 1 < r.end).then(|| &self.code[i + 1]);
            if prev.is_some_and(|p| p.is_keyword("as") || p.is_keyword("class")) {
                bindings.push(i);
            } else if prev.is_some_and(|p| p.is_op(".")) {
                roles.push((i, NameRole::Attribute));
            } else if import_like {
                let aliased = next.is_some_and(|n| n.is_keyword("as"));
                if after_import_kw && !aliased {
                    bindings.push(i);
                } else {
                    roles.push((i, NameRole::Attribute));
                }
            } else if next.is_some_and(|n| n.is_op("=")) && self.depth_at(r.start, i) > 0 {
                roles.push((i, NameRole::KeywordArg));
            } else {
                roles.push((i, NameRole::Read));
            }
        }
        (roles, bindings)
    }
}

/// True when the bracket closing at `i` is followed by another trailer.
fn in_trailer_after(code: &[Token], i: usize, end: usize) -> bool {
    i + 1 < end && (code[i + 1].is_op(".") || code[i + 1].is_op("[") || code[i + 1].is_op("("))
}
