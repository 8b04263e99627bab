//! Tokenizer for the CS1 Python subset.
//!
//! Produces a flat token stream with `Newline`/`Indent`/`Dedent` markers in the
//! style of CPython's tokenizer. Comments are emitted as tokens but never
//! participate in logical-line structure. f-string replacement fields are
//! tokenized recursively and attached to the string token as `embedded`.

use super::SyntaxError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Name,
    Keyword,
    Number,
    String,
    Op,
    Comment,
    Newline,
    Indent,
    Dedent,
    EndMarker,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub kind: TokenKind,
    pub text: String,
    /// 1-indexed physical line of the first character.
    pub line: usize,
    /// 1-indexed physical line of the last character.
    pub end_line: usize,
    /// Byte offset into the source.
    pub start: usize,
    /// Tokens of f-string replacement fields, with absolute offsets.
    pub embedded: Vec<Token>,
}

impl Token {
    pub fn is_op(&self, op: &str) -> bool {
        self.kind == TokenKind::Op && self.text == op
    }

    pub fn is_keyword(&self, kw: &str) -> bool {
        self.kind == TokenKind::Keyword && self.text == kw
    }

    pub fn end(&self) -> usize {
        self.start + self.text.len()
    }

    /// True for tokens that carry program content (not layout or comments).
    pub fn is_code(&self) -> bool {
        !matches!(
            self.kind,
            TokenKind::Comment
                | TokenKind::Newline
                | TokenKind::Indent
                | TokenKind::Dedent
                | TokenKind::EndMarker
        )
    }
}

pub const KEYWORDS: &[&str] = &[
    "False", "None", "True", "and", "as", "assert", "async", "await", "break", "class",
    "continue", "def", "del", "elif", "else", "except", "finally", "for", "from", "global",
    "if", "import", "in", "is", "lambda", "nonlocal", "not", "or", "pass", "raise", "return",
    "try", "while", "with", "yield",
];

pub fn is_keyword(word: &str) -> bool {
    KEYWORDS.contains(&word)
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "->", ":=", "==", "!=", "<=", ">=", "**", "//", "<<",
    ">>", "+=", "-=", "*=", "/=", "%=", "&=", "|=", "^=", "@=", "+", "-", "*", "/", "%", "@",
    "&", "|", "^", "~", "<", ">", "(", ")", "[", "]", "{", "}", ",", ":", ";", ".", "=",
];

/// Tokenizes a whole module.
pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let lines = LineIndex::new(src);
    Lexer::new(src, 0, &lines, true).run()
}

pub(crate) struct LineIndex {
    starts: Vec<usize>,
}

impl LineIndex {
    pub(crate) fn new(src: &str) -> Self {
        let mut starts = vec![0];
        for (i, b) in src.bytes().enumerate() {
            if b == b'\n' {
                starts.push(i + 1);
            }
        }
        Self { starts }
    }

    pub(crate) fn start_of(&self, line: usize) -> usize {
        self.starts[line.saturating_sub(1).min(self.starts.len() - 1)]
    }

    pub(crate) fn line_of(&self, offset: usize) -> usize {
        match self.starts.binary_search(&offset) {
            Ok(i) => i + 1,
            Err(i) => i,
        }
    }
}

struct Lexer<'a> {
    src: &'a str,
    /// Absolute offset of `src` within the original program.
    base: usize,
    lines: &'a LineIndex,
    pos: usize,
    /// `true` for a module, `false` for an f-string field expression.
    layout: bool,
    tokens: Vec<Token>,
    indents: Vec<usize>,
    brackets: Vec<(char, usize)>,
    at_line_start: bool,
    line_has_code: bool,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, base: usize, lines: &'a LineIndex, layout: bool) -> Self {
        Self {
            src,
            base,
            lines,
            pos: 0,
            layout,
            tokens: Vec::new(),
            indents: vec![0],
            brackets: Vec::new(),
            at_line_start: layout,
            line_has_code: false,
        }
    }

    fn line_at(&self, rel: usize) -> usize {
        self.lines.line_of(self.base + rel)
    }

    fn err(&self, rel: usize, msg: impl Into<String>) -> SyntaxError {
        SyntaxError {
            line: self.line_at(rel.min(self.src.len().saturating_sub(1))).max(1),
            message: msg.into(),
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.src[self.pos..].chars().nth(n)
    }

    fn push(&mut self, kind: TokenKind, start: usize, end: usize) {
        let text = self.src[start..end].to_string();
        self.tokens.push(Token {
            kind,
            line: self.line_at(start),
            end_line: self.line_at(end.saturating_sub(1).max(start)),
            start: self.base + start,
            text,
            embedded: Vec::new(),
        });
    }

    fn push_marker(&mut self, kind: TokenKind, at: usize) {
        self.tokens.push(Token {
            kind,
            text: String::new(),
            line: self.line_at(at.min(self.src.len().saturating_sub(1))).max(1),
            end_line: self.line_at(at.min(self.src.len().saturating_sub(1))).max(1),
            start: self.base + at,
            embedded: Vec::new(),
        });
    }

    fn run(mut self) -> Result<Vec<Token>, SyntaxError> {
        while self.pos < self.src.len() {
            if self.at_line_start {
                self.at_line_start = false;
                self.handle_indentation()?;
                continue;
            }
            let c = self.peek().unwrap();
            let start = self.pos;
            match c {
                ' ' | '\t' | '\x0c' => self.pos += 1,
                '\r' => self.pos += 1,
                '\n' => {
                    self.pos += 1;
                    if self.layout && self.brackets.is_empty() {
                        if self.line_has_code {
                            self.push_marker(TokenKind::Newline, start);
                            self.line_has_code = false;
                        }
                        self.at_line_start = true;
                    }
                }
                '\\' => {
                    let rest = &self.src[self.pos + 1..];
                    if rest.starts_with('\n') {
                        self.pos += 2;
                    } else if rest.starts_with("\r\n") {
                        self.pos += 3;
                    } else {
                        return Err(self.err(start, "unexpected character after line continuation"));
                    }
                }
                '#' => {
                    let end = self.src[start..]
                        .find('\n')
                        .map(|i| start + i)
                        .unwrap_or(self.src.len());
                    let end = if self.src[start..end].ends_with('\r') { end - 1 } else { end };
                    self.push(TokenKind::Comment, start, end);
                    self.pos = end;
                }
                c if c.is_ascii_digit() => self.number()?,
                '.' if self.peek_at(1).is_some_and(|d| d.is_ascii_digit()) => self.number()?,
                c if c == '_' || c.is_alphabetic() => self.name_or_string()?,
                '"' | '\'' => self.string(start, false)?,
                _ => self.operator()?,
            }
        }
        if let Some(&(_, at)) = self.brackets.last() {
            return Err(self.err(at, "unexpected end of file: unclosed bracket"));
        }
        if self.layout {
            let end = self.src.len();
            if self.line_has_code {
                self.push_marker(TokenKind::Newline, end);
            }
            while self.indents.len() > 1 {
                self.indents.pop();
                self.push_marker(TokenKind::Dedent, end);
            }
            self.push_marker(TokenKind::EndMarker, end);
        }
        Ok(self.tokens)
    }

    fn handle_indentation(&mut self) -> Result<(), SyntaxError> {
        let mut width = 0;
        let mut p = self.pos;
        let bytes = self.src.as_bytes();
        while p < bytes.len() {
            match bytes[p] {
                b' ' => width += 1,
                b'\t' => width = (width / 8 + 1) * 8,
                b'\x0c' => width = 0,
                _ => break,
            }
            p += 1;
        }
        self.pos = p;
        // Blank and comment-only lines do not affect indentation.
        match bytes.get(p) {
            None | Some(b'\n') | Some(b'#') => return Ok(()),
            Some(b'\r') if bytes.get(p + 1).is_none_or(|&b| b == b'\n') => return Ok(()),
            _ => {}
        }
        let current = *self.indents.last().unwrap();
        if width > current {
            self.indents.push(width);
            self.push_marker(TokenKind::Indent, p);
        } else {
            while width < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push_marker(TokenKind::Dedent, p);
            }
            if width != *self.indents.last().unwrap() {
                return Err(self.err(p, "unindent does not match any outer indentation level"));
            }
        }
        Ok(())
    }

    fn number(&mut self) -> Result<(), SyntaxError> {
        let start = self.pos;
        let bytes = self.src.as_bytes();
        let mut p = self.pos;
        let radix_prefix = bytes[p] == b'0'
            && matches!(bytes.get(p + 1), Some(b'x' | b'X' | b'o' | b'O' | b'b' | b'B'));
        if radix_prefix {
            p += 2;
            while p < bytes.len() && (bytes[p].is_ascii_hexdigit() || bytes[p] == b'_') {
                p += 1;
            }
        } else {
            let digits = |p: &mut usize| {
                while *p < bytes.len() && (bytes[*p].is_ascii_digit() || bytes[*p] == b'_') {
                    *p += 1;
                }
            };
            digits(&mut p);
            if p < bytes.len() && bytes[p] == b'.' {
                p += 1;
                digits(&mut p);
            }
            if p < bytes.len() && matches!(bytes[p], b'e' | b'E') {
                let mut q = p + 1;
                if q < bytes.len() && matches!(bytes[q], b'+' | b'-') {
                    q += 1;
                }
                if q < bytes.len() && bytes[q].is_ascii_digit() {
                    p = q;
                    digits(&mut p);
                }
            }
            if p < bytes.len() && matches!(bytes[p], b'j' | b'J') {
                p += 1;
            }
        }
        if p < bytes.len() && (bytes[p].is_ascii_alphanumeric() || bytes[p] == b'_') {
            return Err(self.err(start, "invalid numeric literal"));
        }
        self.pos = p;
        self.line_has_code = true;
        self.push(TokenKind::Number, start, p);
        Ok(())
    }

    fn name_or_string(&mut self) -> Result<(), SyntaxError> {
        let start = self.pos;
        let mut end = self.pos;
        for (i, ch) in self.src[start..].char_indices() {
            if ch == '_' || ch.is_alphanumeric() {
                end = start + i + ch.len_utf8();
            } else {
                break;
            }
        }
        let word = &self.src[start..end];
        let next = self.src[end..].chars().next();
        let lower = word.to_ascii_lowercase();
        let is_prefix = matches!(
            lower.as_str(),
            "r" | "u" | "b" | "f" | "br" | "rb" | "fr" | "rf"
        );
        if is_prefix && matches!(next, Some('"' | '\'')) {
            self.pos = end;
            return self.string(start, lower.contains('f'));
        }
        self.pos = end;
        self.line_has_code = true;
        let kind = if is_keyword(word) {
            TokenKind::Keyword
        } else {
            TokenKind::Name
        };
        self.push(kind, start, end);
        Ok(())
    }

    /// `start` points at the prefix (or the quote when there is none);
    /// `self.pos` points at the opening quote.
    fn string(&mut self, start: usize, is_f: bool) -> Result<(), SyntaxError> {
        let quote = self.peek().unwrap();
        let rest = &self.src[self.pos..];
        let triple: String = std::iter::repeat_n(quote, 3).collect();
        let delim_len = if rest.starts_with(&triple) { 3 } else { 1 };
        let content_start = self.pos + delim_len;
        let mut p = content_start;
        let bytes = self.src.as_bytes();
        let q = quote as u8;
        let content_end;
        loop {
            if p >= bytes.len() {
                return Err(self.err(start, "unterminated string literal"));
            }
            let b = bytes[p];
            if b == b'\\' {
                p += 2;
                continue;
            }
            if b == b'\n' && delim_len == 1 {
                return Err(self.err(start, "unterminated string literal"));
            }
            if b == q && (delim_len == 1 || (bytes.get(p + 1) == Some(&q) && bytes.get(p + 2) == Some(&q))) {
                content_end = p;
                p += delim_len;
                break;
            }
            p += 1;
        }
        self.pos = p;
        self.line_has_code = true;
        self.push(TokenKind::String, start, p);
        if is_f {
            let embedded = self.fstring_fields(content_start, content_end)?;
            self.tokens.last_mut().unwrap().embedded = embedded;
        }
        Ok(())
    }

    /// Tokenizes the expression parts of f-string replacement fields in
    /// `src[from..to]`.
    fn fstring_fields(&self, from: usize, to: usize) -> Result<Vec<Token>, SyntaxError> {
        let bytes = self.src.as_bytes();
        let mut out = Vec::new();
        let mut p = from;
        while p < to {
            match bytes[p] {
                b'{' if bytes.get(p + 1) == Some(&b'{') => p += 2,
                b'}' if bytes.get(p + 1) == Some(&b'}') => p += 2,
                b'{' => {
                    p = self.fstring_field(p + 1, to, &mut out)?;
                }
                _ => p += 1,
            }
        }
        Ok(out)
    }

    /// Lexes one replacement field starting after its `{`; returns the offset
    /// after the closing `}`.
    fn fstring_field(&self, from: usize, to: usize, out: &mut Vec<Token>) -> Result<usize, SyntaxError> {
        let bytes = self.src.as_bytes();
        let mut depth = 0usize;
        let mut p = from;
        let mut in_quote: Option<u8> = None;
        let expr_end;
        loop {
            if p >= to {
                return Err(self.err(from, "f-string: expecting '}'"));
            }
            let b = bytes[p];
            if let Some(q) = in_quote {
                if b == q {
                    in_quote = None;
                }
                p += 1;
                continue;
            }
            match b {
                b'\'' | b'"' => in_quote = Some(b),
                b'(' | b'[' | b'{' => depth += 1,
                b')' | b']' => depth = depth.saturating_sub(1),
                b'}' if depth > 0 => depth -= 1,
                b'}' => {
                    expr_end = p;
                    break;
                }
                b'!' if depth == 0 && bytes.get(p + 1) != Some(&b'=') => {
                    expr_end = p;
                    break;
                }
                b':' if depth == 0 => {
                    expr_end = p;
                    break;
                }
                _ => {}
            }
            p += 1;
        }
        let expr = &self.src[from..expr_end];
        // `{x=}` debugging form.
        let expr = expr.strip_suffix('=').filter(|e| !e.ends_with(['=', '!', '<', '>'])).unwrap_or(expr);
        if expr.trim().is_empty() {
            return Err(self.err(from, "f-string: empty expression not allowed"));
        }
        let sub = Lexer::new(expr, self.base + from, self.lines, false).run()?;
        out.extend(sub);
        // Skip conversion and format spec, lexing nested fields in the spec.
        p = expr_end;
        while p < to {
            match bytes[p] {
                b'}' => return Ok(p + 1),
                b'{' => p = self.fstring_field(p + 1, to, out)?,
                _ => p += 1,
            }
        }
        Err(self.err(from, "f-string: expecting '}'"))
    }

    fn operator(&mut self) -> Result<(), SyntaxError> {
        let start = self.pos;
        let rest = &self.src[start..];
        let Some(op) = OPERATORS.iter().find(|op| rest.starts_with(**op)) else {
            let ch = rest.chars().next().unwrap();
            return Err(self.err(start, format!("invalid character '{ch}'")));
        };
        let end = start + op.len();
        match *op {
            "(" | "[" | "{" => self.brackets.push((op.chars().next().unwrap(), start)),
            ")" | "]" | "}" => {
                let open = match *op {
                    ")" => '(',
                    "]" => '[',
                    _ => '{',
                };
                match self.brackets.pop() {
                    Some((o, _)) if o == open => {}
                    Some((o, _)) => {
                        return Err(self.err(start, format!("closing '{op}' does not match opening '{o}'")));
                    }
                    None => return Err(self.err(start, format!("unmatched '{op}'"))),
                }
            }
            _ => {}
        }
        self.pos = end;
        self.line_has_code = true;
        self.push(TokenKind::Op, start, end);
        Ok(())
    }
}
