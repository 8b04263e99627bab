//! Python frontend: turns CS1-level source text into [`ProgramFacts`].
//!
//! The frontend never executes student code. It tokenizes, groups logical
//! lines into a block tree, validates expressions in the supported subset and
//! then extracts the facts every analysis consumes: functions with their body
//! size, identifiers with their assigned values, comments keyed by line, and
//! every numeric literal.

pub(crate) mod expr;
pub(crate) mod lexer;
pub(crate) mod stmt;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::ops::Range;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

use expr::NameRole;
use lexer::{LineIndex, Token, TokenKind};
use stmt::{Stmt, StmtKind, StmtParser};

/// A parse failure. Lines are 1-indexed physical lines.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("syntax error on line {line}: {message}")]
pub struct SyntaxError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SourceError {
    #[error("program text is empty")]
    Empty,
}

/// The text of one student program. Carries no student identity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceProgram {
    text: String,
    problem_id: String,
    line_count: usize,
}

impl SourceProgram {
    pub fn new(problem_id: impl Into<String>, text: impl Into<String>) -> Result<Self, SourceError> {
        let text = text.into();
        if text.is_empty() {
            return Err(SourceError::Empty);
        }
        Ok(Self {
            line_count: text.lines().count().max(1),
            text,
            problem_id: problem_id.into(),
        })
    }

    pub fn text(&self) -> &str {
        &self.text
    }

    pub fn problem_id(&self) -> &str {
        &self.problem_id
    }

    pub fn line_count(&self) -> usize {
        self.line_count
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IdentifierKind {
    Variable,
    Function,
    Parameter,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LiteralKind {
    Int,
    Float,
    String,
    Bool,
    CallResult,
    Other,
}

impl LiteralKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LiteralKind::Int => "int",
            LiteralKind::Float => "float",
            LiteralKind::String => "string",
            LiteralKind::Bool => "bool",
            LiteralKind::CallResult => "call-result",
            LiteralKind::Other => "other",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssignedValue {
    pub text: String,
    pub kind: LiteralKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentifierFact {
    pub name: String,
    pub kind: IdentifierKind,
    /// Enclosing function, `None` at module level.
    pub scope: Option<String>,
    pub first_line: usize,
    pub assigned_values: Vec<AssignedValue>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NormalizedLine {
    pub line: usize,
    pub text: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FunctionFact {
    pub name: String,
    pub def_line: usize,
    pub end_line: usize,
    /// Non-blank, non-comment-only physical lines after the header.
    pub body_lines: usize,
    /// One entry per counted body line: comment stripped, whitespace collapsed.
    pub normalized_body: Vec<NormalizedLine>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NumericLiteral {
    /// Source spelling, with a leading `-` when negated by a unary minus.
    pub value: String,
    pub line: usize,
    pub scope: Option<String>,
    /// The literal is the whole right-hand side of an assignment to
    /// uppercase names.
    pub defines_constant: bool,
}

impl NumericLiteral {
    pub fn as_f64(&self) -> Option<f64> {
        parse_number(&self.value)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModuleConstant {
    pub name: String,
    pub line: usize,
    pub value: String,
    pub is_uppercase: bool,
    pub read_count: usize,
    pub reassignment_count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NameUsage {
    pub name: String,
    pub line: usize,
    pub scope: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProgramFacts {
    pub line_count: usize,
    pub functions: Vec<FunctionFact>,
    pub identifiers: Vec<IdentifierFact>,
    pub comments: BTreeMap<usize, String>,
    pub numeric_literals: Vec<NumericLiteral>,
    pub module_constants: Vec<ModuleConstant>,
    pub name_reads: Vec<NameUsage>,
}

impl ProgramFacts {
    pub fn has_identifier(&self, name: &str) -> bool {
        self.identifiers.iter().any(|i| i.name == name)
    }

    pub fn line_in_range(&self, line: usize) -> bool {
        (1..=self.line_count).contains(&line)
    }

    /// Canonical JSON (struct fields in declaration order, maps sorted).
    pub fn to_canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("facts serialize")
    }
}

impl fmt::Display for LiteralKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Parses a numeric literal spelling (including a sign) to `f64`.
pub fn parse_number(text: &str) -> Option<f64> {
    let (neg, body) = match text.strip_prefix('-') {
        Some(rest) => (true, rest),
        None => (false, text),
    };
    let body = body.replace('_', "");
    let lower = body.to_ascii_lowercase();
    let value = if let Some(h) = lower.strip_prefix("0x") {
        i64::from_str_radix(h, 16).ok()? as f64
    } else if let Some(o) = lower.strip_prefix("0o") {
        i64::from_str_radix(o, 8).ok()? as f64
    } else if let Some(b) = lower.strip_prefix("0b") {
        i64::from_str_radix(b, 2).ok()? as f64
    } else if lower.ends_with('j') {
        return None;
    } else {
        lower.parse::<f64>().ok()?
    };
    Some(if neg { -value } else { value })
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    match chars.next() {
        Some(c) if c == '_' || c.is_alphabetic() => {}
        _ => return false,
    }
    chars.all(|c| c == '_' || c.is_alphanumeric())
}

/// All cap letters, digits and underscores, with at least one letter.
pub fn is_uppercase_name(name: &str) -> bool {
    name.chars().any(|c| c.is_ascii_uppercase())
        && name.chars().all(|c| c.is_ascii_uppercase() || c.is_ascii_digit() || c == '_')
}

/// Tokens and block tree of a parsed program, shared with the analyses that
/// need more than [`ProgramFacts`].
#[derive(Debug, Clone)]
pub(crate) struct ParsedProgram {
    pub code: Vec<Token>,
    pub comments: Vec<Token>,
    pub stmts: Vec<Stmt>,
}

pub(crate) fn parse_tree(text: &str) -> Result<ParsedProgram, SyntaxError> {
    let tokens = lexer::tokenize(text)?;
    let (comments, code): (Vec<Token>, Vec<Token>) =
        tokens.into_iter().partition(|t| t.kind == TokenKind::Comment);
    let stmts = StmtParser::parse(&code)?;
    Ok(ParsedProgram { code, comments, stmts })
}

/// Parses a program into facts. Deterministic and side-effect free.
pub fn parse_program(source: &SourceProgram) -> Result<ProgramFacts, SyntaxError> {
    let parsed = parse_tree(source.text())?;
    Ok(FactBuilder::new(source, &parsed).build())
}

/// Convenience wrapper for callers holding bare text.
pub fn parse_source(text: &str) -> Result<ProgramFacts, SyntaxError> {
    let source = SourceProgram::new("", text).map_err(|e| SyntaxError {
        line: 1,
        message: e.to_string(),
    })?;
    parse_program(&source)
}

/// Variable name → assigned expression texts, in source order.
pub fn identifier_value_map(facts: &ProgramFacts) -> IndexMap<String, Vec<String>> {
    let mut map: IndexMap<String, Vec<String>> = IndexMap::new();
    for id in facts.identifiers.iter().filter(|i| i.kind == IdentifierKind::Variable) {
        map.entry(id.name.clone())
            .or_default()
            .extend(id.assigned_values.iter().map(|v| v.text.clone()));
    }
    map
}

pub fn comment_line_map(facts: &ProgramFacts) -> BTreeMap<usize, String> {
    facts.comments.clone()
}

fn collapse_ws(s: &str) -> String {
    s.split_whitespace().collect::<Vec<_>>().join(" ")
}

pub(crate) fn infer_kind(code: &[Token]) -> LiteralKind {
    match code {
        [t] => match t.kind {
            TokenKind::Number => number_kind(&t.text),
            TokenKind::String => LiteralKind::String,
            TokenKind::Keyword if t.text == "True" || t.text == "False" => LiteralKind::Bool,
            _ => LiteralKind::Other,
        },
        [sign, n] if (sign.is_op("-") || sign.is_op("+")) && n.kind == TokenKind::Number => number_kind(&n.text),
        [f, open, .., close]
            if f.kind == TokenKind::Name && open.is_op("(") && close.is_op(")") && matching_close(code, 1) == Some(code.len() - 1) =>
        {
            match f.text.as_str() {
                "float" => LiteralKind::Float,
                "int" => LiteralKind::Int,
                "str" => LiteralKind::String,
                "bool" => LiteralKind::Bool,
                _ => LiteralKind::CallResult,
            }
        }
        _ if !code.is_empty() && code.iter().all(|t| t.kind == TokenKind::String) => LiteralKind::String,
        _ => LiteralKind::Other,
    }
}

fn number_kind(text: &str) -> LiteralKind {
    let lower = text.to_ascii_lowercase();
    if lower.ends_with('j') {
        LiteralKind::Other
    } else if lower.starts_with("0x") || lower.starts_with("0o") || lower.starts_with("0b") {
        LiteralKind::Int
    } else if lower.contains(['.', 'e']) {
        LiteralKind::Float
    } else {
        LiteralKind::Int
    }
}

pub(crate) fn matching_close(code: &[Token], open: usize) -> Option<usize> {
    let mut depth = 0;
    for (i, t) in code.iter().enumerate().skip(open) {
        if t.is_op("(") || t.is_op("[") || t.is_op("{") {
            depth += 1;
        } else if t.is_op(")") || t.is_op("]") || t.is_op("}") {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// True when the `-` at `code[i]` is a unary minus.
pub(crate) fn is_unary_minus(code: &[Token], i: usize) -> bool {
    if !code[i].is_op("-") {
        return false;
    }
    match i.checked_sub(1).map(|p| &code[p]) {
        None => true,
        Some(p) => match p.kind {
            TokenKind::Name | TokenKind::Number | TokenKind::String => false,
            TokenKind::Keyword => !matches!(p.text.as_str(), "True" | "False" | "None"),
            TokenKind::Op => !matches!(p.text.as_str(), ")" | "]" | "}"),
            _ => true,
        },
    }
}

/// Whether a value range is a single (optionally negated) literal.
pub(crate) fn single_literal(code: &[Token]) -> Option<String> {
    match code {
        [t] if matches!(t.kind, TokenKind::Number | TokenKind::String) => Some(t.text.clone()),
        [t] if t.kind == TokenKind::Keyword && matches!(t.text.as_str(), "True" | "False" | "None") => {
            Some(t.text.clone())
        }
        [sign, n] if sign.is_op("-") && n.kind == TokenKind::Number => Some(format!("-{}", n.text)),
        _ => None,
    }
}

struct FactBuilder<'a> {
    src: &'a str,
    line_count: usize,
    lines: LineIndex,
    code: &'a [Token],
    comments: &'a [Token],
    stmts: &'a [Stmt],
    functions: Vec<FunctionFact>,
    identifiers: IndexMap<(Option<String>, String), IdentifierFact>,
    numeric_literals: Vec<(usize, NumericLiteral)>,
    reads: Vec<NameUsage>,
    /// Names bound by assignment-like statements, counted per occurrence.
    assignment_counts: HashMap<String, usize>,
    /// First module-level literal assignment per name: (name, line, value).
    module_literals: IndexMap<String, (usize, String)>,
    module_assigned: HashSet<String>,
    constant_literal_tokens: HashSet<usize>,
    code_lines: HashSet<usize>,
}

impl<'a> FactBuilder<'a> {
    fn new(source: &'a SourceProgram, parsed: &'a ParsedProgram) -> Self {
        let mut code_lines = HashSet::new();
        for t in parsed.code.iter().filter(|t| t.is_code()) {
            code_lines.extend(t.line..=t.end_line);
        }
        Self {
            src: source.text(),
            line_count: source.line_count(),
            lines: LineIndex::new(source.text()),
            code: &parsed.code,
            comments: &parsed.comments,
            stmts: &parsed.stmts,
            functions: Vec::new(),
            identifiers: IndexMap::new(),
            numeric_literals: Vec::new(),
            reads: Vec::new(),
            assignment_counts: HashMap::new(),
            module_literals: IndexMap::new(),
            module_assigned: HashSet::new(),
            constant_literal_tokens: HashSet::new(),
            code_lines,
        }
    }

    fn build(mut self) -> ProgramFacts {
        self.walk(self.stmts, None, &HashSet::new());

        let comments = self
            .comments
            .iter()
            .map(|c| (c.line, c.text.trim_start_matches('#').trim().to_string()))
            .collect();

        let mut numeric_literals = std::mem::take(&mut self.numeric_literals);
        numeric_literals.sort_by_key(|(start, _)| *start);
        let numeric_literals = numeric_literals
            .into_iter()
            .map(|(_, mut lit)| {
                lit.line = lit.line.clamp(1, self.line_count);
                lit
            })
            .collect();

        let module_constants = self
            .module_literals
            .iter()
            .map(|(name, (line, value))| ModuleConstant {
                name: name.clone(),
                line: *line,
                value: value.clone(),
                is_uppercase: is_uppercase_name(name),
                read_count: self.reads.iter().filter(|r| &r.name == name).count(),
                reassignment_count: self.assignment_counts.get(name).copied().unwrap_or(1).saturating_sub(1),
            })
            .collect();

        ProgramFacts {
            line_count: self.line_count,
            functions: self.functions,
            identifiers: self.identifiers.into_values().collect(),
            comments,
            numeric_literals,
            module_constants,
            name_reads: self.reads,
        }
    }

    fn text_of(&self, r: &Range<usize>) -> String {
        if r.is_empty() {
            return String::new();
        }
        let raw = &self.src[self.code[r.start].start..self.code[r.end - 1].end()];
        if raw.contains('\n') {
            self.code[r.clone()].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ")
        } else {
            raw.to_string()
        }
    }

    fn add_identifier(&mut self, scope: &Option<String>, name_tok: usize, kind: IdentifierKind, value: Option<AssignedValue>) {
        let t = &self.code[name_tok];
        let entry = self
            .identifiers
            .entry((scope.clone(), t.text.clone()))
            .or_insert_with(|| IdentifierFact {
                name: t.text.clone(),
                kind,
                scope: scope.clone(),
                first_line: t.line,
                assigned_values: Vec::new(),
            });
        if let Some(v) = value {
            entry.assigned_values.push(v);
        }
    }

    fn binding_scope(&self, scope: &Option<String>, globals: &HashSet<String>, name: &str) -> Option<String> {
        if globals.contains(name) {
            None
        } else {
            scope.clone()
        }
    }

    fn walk(&mut self, stmts: &[Stmt], scope: Option<String>, globals: &HashSet<String>) {
        // `global` declarations apply to the whole function body.
        let mut globals = globals.clone();
        collect_globals(stmts, self.code, &mut globals);
        for s in stmts {
            self.statement(s, &scope, &globals);
        }
    }

    fn statement(&mut self, s: &Stmt, scope: &Option<String>, globals: &HashSet<String>) {
        self.literals_and_embedded(s, scope);
        for &(i, role) in &s.roles {
            if role == NameRole::Read {
                self.reads.push(NameUsage {
                    name: self.code[i].text.clone(),
                    line: self.code[i].line,
                    scope: scope.clone(),
                });
            } else if role == NameRole::Walrus {
                let bscope = self.binding_scope(scope, globals, &self.code[i].text);
                *self.assignment_counts.entry(self.code[i].text.clone()).or_default() += 1;
                self.add_identifier(
                    &bscope,
                    i,
                    IdentifierKind::Variable,
                    Some(AssignedValue {
                        text: self.text_of(&s.tokens),
                        kind: LiteralKind::Other,
                    }),
                );
            }
        }

        match &s.kind {
            StmtKind::FunctionDef { name, params } => {
                let fname = self.code[*name].text.clone();
                let bscope = self.binding_scope(scope, globals, &fname);
                self.add_identifier(&bscope, *name, IdentifierKind::Function, None);
                let inner = Some(fname.clone());
                for p in params {
                    let value = p.default.as_ref().map(|d| AssignedValue {
                        text: self.text_of(d),
                        kind: infer_kind(&self.code[d.clone()]),
                    });
                    self.add_identifier(&inner, p.name, IdentifierKind::Parameter, value);
                }
                self.function_fact(s, fname);
                self.walk(&s.body, inner, &HashSet::new());
                return;
            }
            StmtKind::Assign { targets, value } => {
                let literal = single_literal(&self.code[value.clone()]);
                let kind = infer_kind(&self.code[value.clone()]);
                let text = self.text_of(value);
                let all_upper = targets.iter().all(|t| {
                    t.len() == 1
                        && self.code[t.start].kind == TokenKind::Name
                        && is_uppercase_name(&self.code[t.start].text)
                });
                if all_upper && literal.is_some() {
                    if let Some(n) = (value.clone()).find(|&i| self.code[i].kind == TokenKind::Number) {
                        self.constant_literal_tokens.insert(n);
                        if let Some(lit) = self.numeric_literals.iter_mut().find(|(start, _)| *start == self.code[n].start) {
                            lit.1.defines_constant = true;
                        }
                    }
                }
                for &b in &s.bindings {
                    self.bind_variable(b, scope, globals, AssignedValue { text: text.clone(), kind }, literal.clone());
                }
            }
            StmtKind::AnnAssign { value: Some(value), .. } => {
                let literal = single_literal(&self.code[value.clone()]);
                let kind = infer_kind(&self.code[value.clone()]);
                let text = self.text_of(value);
                for &b in &s.bindings {
                    self.bind_variable(b, scope, globals, AssignedValue { text: text.clone(), kind }, literal.clone());
                }
            }
            StmtKind::AugAssign => {
                let text = self.text_of(&s.tokens);
                for &b in &s.bindings {
                    self.bind_variable(b, scope, globals, AssignedValue { text: text.clone(), kind: LiteralKind::Other }, None);
                }
            }
            StmtKind::For { iter, .. } => {
                let text = self.text_of(iter);
                for &b in &s.bindings {
                    self.bind_variable(b, scope, globals, AssignedValue { text: text.clone(), kind: LiteralKind::Other }, None);
                }
            }
            StmtKind::Opaque => {
                let text = self.text_of(&s.tokens);
                for &b in &s.bindings {
                    let bscope = self.binding_scope(scope, globals, &self.code[b].text);
                    self.add_identifier(
                        &bscope,
                        b,
                        IdentifierKind::Variable,
                        Some(AssignedValue {
                            text: text.clone(),
                            kind: LiteralKind::Other,
                        }),
                    );
                }
            }
            _ => {}
        }
        for child in &s.body {
            self.statement(child, scope, globals);
        }
    }

    fn bind_variable(
        &mut self,
        tok: usize,
        scope: &Option<String>,
        globals: &HashSet<String>,
        value: AssignedValue,
        literal: Option<String>,
    ) {
        let name = self.code[tok].text.clone();
        let bscope = self.binding_scope(scope, globals, &name);
        *self.assignment_counts.entry(name.clone()).or_default() += 1;
        if bscope.is_none() && self.module_assigned.insert(name.clone()) {
            if let Some(lit) = literal {
                self.module_literals.insert(name, (self.code[tok].line, lit));
            }
        }
        self.add_identifier(&bscope, tok, IdentifierKind::Variable, Some(value));
    }

    fn literals_and_embedded(&mut self, s: &Stmt, scope: &Option<String>) {
        for i in s.tokens.clone() {
            let t = &self.code[i];
            match t.kind {
                TokenKind::Number => {
                    let negated = i > 0 && is_unary_minus(self.code, i - 1) && i - 1 >= s.tokens.start;
                    let value = if negated { format!("-{}", t.text) } else { t.text.clone() };
                    self.numeric_literals.push((
                        t.start,
                        NumericLiteral {
                            value,
                            line: t.line,
                            scope: scope.clone(),
                            defines_constant: self.constant_literal_tokens.contains(&i),
                        },
                    ));
                }
                TokenKind::String if !t.embedded.is_empty() => {
                    let emb = &t.embedded;
                    for (j, e) in emb.iter().enumerate() {
                        match e.kind {
                            TokenKind::Number => {
                                let negated = j > 0 && is_unary_minus(emb, j - 1);
                                let value = if negated { format!("-{}", e.text) } else { e.text.clone() };
                                self.numeric_literals.push((
                                    e.start,
                                    NumericLiteral {
                                        value,
                                        line: e.line,
                                        scope: scope.clone(),
                                        defines_constant: false,
                                    },
                                ));
                            }
                            TokenKind::Name => {
                                let attr = j > 0 && emb[j - 1].is_op(".");
                                let kwarg = emb.get(j + 1).is_some_and(|n| n.is_op("="));
                                if !attr && !kwarg {
                                    self.reads.push(NameUsage {
                                        name: e.text.clone(),
                                        line: e.line,
                                        scope: scope.clone(),
                                    });
                                }
                            }
                            _ => {}
                        }
                    }
                }
                _ => {}
            }
        }
    }

    fn function_fact(&mut self, s: &Stmt, name: String) {
        let def_line = s.first_line;
        let end_line = s.last_line;
        let mut normalized_body = Vec::new();
        for line in s.header_end_line + 1..=end_line {
            if !self.code_lines.contains(&line) {
                continue;
            }
            normalized_body.push(NormalizedLine {
                line,
                text: self.normalized_line(line),
            });
        }
        self.functions.push(FunctionFact {
            name,
            def_line,
            end_line,
            body_lines: normalized_body.len(),
            normalized_body,
        });
    }

    fn normalized_line(&self, line: usize) -> String {
        let start = self.line_start(line);
        let end = self.src[start..].find('\n').map(|i| start + i).unwrap_or(self.src.len());
        let mut cut = end;
        if let Some(c) = self.comments.iter().find(|c| c.line == line) {
            cut = c.start.min(end);
        }
        collapse_ws(&self.src[start..cut])
    }

    fn line_start(&self, line: usize) -> usize {
        self.lines.start_of(line)
    }
}

pub(crate) fn collect_globals(stmts: &[Stmt], code: &[Token], out: &mut HashSet<String>) {
    for s in stmts {
        match &s.kind {
            StmtKind::Global { names } => out.extend(names.iter().map(|&i| code[i].text.clone())),
            StmtKind::FunctionDef { .. } => {}
            _ => collect_globals(&s.body, code, out),
        }
    }
}
