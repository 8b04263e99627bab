//! Canonical form of a program: comments, docstrings and blank lines removed,
//! bound identifiers renamed by scope and first occurrence, single-assignment
//! module literals inlined, one statement per line with single spaces
//! between tokens. Free names, attributes and builtins keep their spelling.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::frontend::expr::NameRole;
use crate::frontend::lexer::{Token, TokenKind};
use crate::frontend::stmt::{Stmt, StmtKind};
use crate::frontend::{collect_globals, parse_tree, single_literal, ParsedProgram, SyntaxError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CanonicalForm(String);

impl CanonicalForm {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl std::fmt::Display for CanonicalForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn canonicalize(source: &str) -> Result<CanonicalForm, SyntaxError> {
    let parsed = parse_tree(source)?;
    Ok(CanonicalForm(Canonicalizer::new(source, &parsed).render()))
}

const MODULE: usize = 0;

#[derive(Debug, Default)]
struct Scope {
    parent: Option<usize>,
    depth: usize,
    bound: HashSet<String>,
    globals: HashSet<String>,
}

/// Resolved meaning of a name token.
enum Target {
    Free,
    Bound(usize),
    Inline(String),
}

struct Canonicalizer<'a> {
    src: &'a str,
    code: &'a [Token],
    stmts: &'a [Stmt],
    /// Preorder: module first, then one scope per `def`.
    scopes: Vec<Scope>,
    /// Module constant name to its literal text.
    inline: HashMap<String, String>,
    /// Token index of every inlined definition statement.
    dropped_defs: HashSet<usize>,
    param_names: HashSet<String>,
    labels: Vec<HashMap<String, String>>,
    kwarg_labels: HashMap<String, String>,
}

fn is_docstring(s: &Stmt, code: &[Token]) -> bool {
    matches!(s.kind, StmtKind::Expr) && {
        let toks: Vec<_> = code[s.tokens.clone()].iter().filter(|t| t.is_code()).collect();
        !toks.is_empty() && toks.iter().all(|t| t.kind == TokenKind::String && t.embedded.is_empty())
    }
}

impl<'a> Canonicalizer<'a> {
    fn new(src: &'a str, parsed: &'a ParsedProgram) -> Self {
        let mut c = Self {
            src,
            code: &parsed.code,
            stmts: &parsed.stmts,
            scopes: vec![Scope::default()],
            inline: HashMap::new(),
            dropped_defs: HashSet::new(),
            param_names: HashSet::new(),
            labels: Vec::new(),
            kwarg_labels: HashMap::new(),
        };
        let mut module_counts = HashMap::new();
        c.collect(c.stmts, MODULE, &mut module_counts);
        c.find_inlinable(&module_counts);
        c.labels = vec![HashMap::new(); c.scopes.len()];
        c
    }

    fn bind(&mut self, scope: usize, name: &str, module_counts: &mut HashMap<String, usize>) {
        let target = if self.scopes[scope].globals.contains(name) { MODULE } else { scope };
        self.scopes[target].bound.insert(name.to_string());
        if target == MODULE {
            *module_counts.entry(name.to_string()).or_default() += 1;
        }
    }

    fn collect(&mut self, stmts: &[Stmt], scope: usize, module_counts: &mut HashMap<String, usize>) {
        let mut globals = HashSet::new();
        collect_globals(stmts, self.code, &mut globals);
        self.scopes[scope].globals.extend(globals);
        for s in stmts {
            for &(i, role) in &s.roles {
                if role == NameRole::Walrus {
                    self.bind(scope, &self.code[i].text.clone(), module_counts);
                }
            }
            match &s.kind {
                StmtKind::FunctionDef { name, params } => {
                    self.bind(scope, &self.code[*name].text.clone(), module_counts);
                    let inner = self.scopes.len();
                    let depth = self.scopes[scope].depth + 1;
                    self.scopes.push(Scope { parent: Some(scope), depth, ..Scope::default() });
                    for p in params {
                        let pname = self.code[p.name].text.clone();
                        self.param_names.insert(pname.clone());
                        self.scopes[inner].bound.insert(pname);
                    }
                    self.collect(&s.body, inner, module_counts);
                }
                StmtKind::Global { .. } => {}
                _ => {
                    for &b in &s.bindings {
                        self.bind(scope, &self.code[b].text.clone(), module_counts);
                    }
                    self.collect_nested(&s.body, scope, module_counts);
                }
            }
        }
    }

    /// Blocks that do not open a scope share the enclosing one.
    fn collect_nested(&mut self, stmts: &[Stmt], scope: usize, module_counts: &mut HashMap<String, usize>) {
        if !stmts.is_empty() {
            self.collect(stmts, scope, module_counts);
        }
    }

    fn find_inlinable(&mut self, module_counts: &HashMap<String, usize>) {
        let declared_global: HashSet<&String> = self.scopes[1..].iter().flat_map(|s| s.globals.iter()).collect();
        for s in self.stmts {
            let StmtKind::Assign { targets, value } = &s.kind else { continue };
            let [target] = targets.as_slice() else { continue };
            if target.len() != 1 || self.code[target.start].kind != TokenKind::Name {
                continue;
            }
            let name = &self.code[target.start].text;
            if module_counts.get(name) != Some(&1) || declared_global.contains(name) {
                continue;
            }
            let value_toks: Vec<Token> = self.code[value.clone()].iter().filter(|t| t.is_code()).cloned().collect();
            if single_literal(&value_toks).is_none() {
                continue;
            }
            let text = value_toks.iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            self.inline.insert(name.clone(), text);
            self.dropped_defs.insert(s.tokens.start);
        }
    }

    fn resolve(&self, name: &str, scope: usize) -> Target {
        let mut cur = Some(scope);
        while let Some(id) = cur {
            let sc = &self.scopes[id];
            if id != MODULE && sc.globals.contains(name) {
                return self.module_target(name);
            }
            if sc.bound.contains(name) {
                return if id == MODULE { self.module_target(name) } else { Target::Bound(id) };
            }
            cur = sc.parent;
        }
        Target::Free
    }

    fn module_target(&self, name: &str) -> Target {
        match self.inline.get(name) {
            Some(text) => Target::Inline(text.clone()),
            None if self.scopes[MODULE].bound.contains(name) => Target::Bound(MODULE),
            None => Target::Free,
        }
    }

    fn label(&mut self, scope: usize, name: &str) -> String {
        let depth = self.scopes[scope].depth;
        let map = &mut self.labels[scope];
        let next = map.len() + 1;
        map.entry(name.to_string())
            .or_insert_with(|| match depth {
                0 => format!("g{next}"),
                1 => format!("v{next}"),
                2 => format!("w{next}"),
                d => format!("u{d}_{next}"),
            })
            .clone()
    }

    fn name_text(&mut self, name: &str, scope: usize) -> String {
        match self.resolve(name, scope) {
            Target::Free => name.to_string(),
            Target::Bound(id) => self.label(id, name),
            Target::Inline(text) => text,
        }
    }

    fn render(mut self) -> String {
        let mut lines = Vec::new();
        let mut scope_counter = 0;
        self.render_block(self.stmts, MODULE, 0, &mut scope_counter, &mut lines);
        let mut out = lines.join("\n");
        if !out.is_empty() {
            out.push('\n');
        }
        out
    }

    fn render_block(
        &mut self,
        stmts: &[Stmt],
        scope: usize,
        depth: usize,
        scope_counter: &mut usize,
        lines: &mut Vec<String>,
    ) {
        for s in stmts {
            if is_docstring(s, self.code) || (scope == MODULE && depth == 0 && self.dropped_defs.contains(&s.tokens.start)) {
                continue;
            }
            let mut body_scope = scope;
            let header = if let StmtKind::FunctionDef { params, .. } = &s.kind {
                *scope_counter += 1;
                body_scope = *scope_counter;
                let param_toks: HashSet<usize> = params.iter().map(|p| p.name).collect();
                self.render_tokens(s, scope, Some((&param_toks, body_scope)))
            } else {
                self.render_tokens(s, scope, None)
            };
            lines.push(format!("{}{}", "    ".repeat(depth), header));
            if matches!(s.kind, StmtKind::FunctionDef { .. }) || !s.body.is_empty() || header.ends_with(':') {
                let before = lines.len();
                self.render_block(&s.body, body_scope, depth + 1, scope_counter, lines);
                if lines.len() == before && header.ends_with(':') {
                    lines.push(format!("{}pass", "    ".repeat(depth + 1)));
                }
            }
        }
    }

    fn render_tokens(&mut self, s: &Stmt, scope: usize, params: Option<(&HashSet<usize>, usize)>) -> String {
        let roles: HashMap<usize, NameRole> = s.roles.iter().copied().collect();
        let mut local_labels: HashMap<String, String> = HashMap::new();
        let mut parts = Vec::new();
        for i in s.tokens.clone() {
            let t = &self.code[i];
            if !t.is_code() {
                continue;
            }
            let text = match t.kind {
                TokenKind::Name => match roles.get(&i) {
                    Some(NameRole::Attribute) => t.text.clone(),
                    Some(NameRole::KeywordArg) => {
                        if self.param_names.contains(&t.text) {
                            let next = self.kwarg_labels.len() + 1;
                            self.kwarg_labels.entry(t.text.clone()).or_insert_with(|| format!("k{next}")).clone()
                        } else {
                            t.text.clone()
                        }
                    }
                    Some(NameRole::LocalBinding) => {
                        let next = local_labels.len() + 1;
                        local_labels.entry(t.text.clone()).or_insert_with(|| format!("c{next}")).clone()
                    }
                    _ => match params {
                        Some((param_toks, inner)) if param_toks.contains(&i) => self.label(inner, &t.text),
                        _ => self.name_text(&t.text, scope),
                    },
                },
                TokenKind::String if !t.embedded.is_empty() => self.render_fstring(t, scope),
                _ => t.text.clone(),
            };
            parts.push(text);
        }
        parts.join(" ")
    }

    fn render_fstring(&mut self, t: &Token, scope: usize) -> String {
        let mut names = Vec::new();
        gather_fstring_names(&t.embedded, &mut names);
        let raw = &self.src[t.start..t.end()];
        let mut out = String::new();
        let mut pos = t.start;
        for e in names {
            if e.start < pos || e.end() > t.end() {
                continue;
            }
            out.push_str(&raw[pos - t.start..e.start - t.start]);
            let replacement = self.name_text(&e.text, scope);
            out.push_str(&replacement);
            pos = e.end();
        }
        out.push_str(&raw[pos - t.start..]);
        out
    }
}

/// Name tokens inside replacement fields that refer to variables, in order.
fn gather_fstring_names<'t>(embedded: &'t [Token], out: &mut Vec<&'t Token>) {
    for (j, e) in embedded.iter().enumerate() {
        match e.kind {
            TokenKind::Name => {
                let attr = j > 0 && embedded[j - 1].is_op(".");
                let kwarg = embedded.get(j + 1).is_some_and(|n| n.is_op("="))
                    && j > 0
                    && (embedded[j - 1].is_op("(") || embedded[j - 1].is_op(","));
                if !attr && !kwarg {
                    out.push(e);
                }
            }
            TokenKind::String if !e.embedded.is_empty() => gather_fstring_names(&e.embedded, out),
            _ => {}
        }
    }
}
