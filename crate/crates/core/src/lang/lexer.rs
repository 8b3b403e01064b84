//! Indentation-aware tokenizer.

use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// Raw body of an f-string; split into parts by the parser.
    FStr(String),
    Kw(Kw),
    /// A Python keyword outside the subset; using it is a parse error.
    Banned(&'static str),
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kw {
    Def,
    Return,
    If,
    Elif,
    Else,
    For,
    In,
    Not,
    And,
    Or,
    True,
    False,
    None,
    Pass,
}

const BANNED: [&str; 22] = [
    "import", "from", "while", "class", "lambda", "with", "try", "except", "finally", "raise", "yield",
    "global", "nonlocal", "del", "assert", "async", "await", "is", "break", "continue", "as", "print",
];

fn keyword(word: &str) -> Option<Tok> {
    let kw = match word {
        "def" => Kw::Def,
        "return" => Kw::Return,
        "if" => Kw::If,
        "elif" => Kw::Elif,
        "else" => Kw::Else,
        "for" => Kw::For,
        "in" => Kw::In,
        "not" => Kw::Not,
        "and" => Kw::And,
        "or" => Kw::Or,
        "True" => Kw::True,
        "False" => Kw::False,
        "None" => Kw::None,
        "pass" => Kw::Pass,
        _ => {
            // `print` stays an ordinary (undefined) name.
            return BANNED.iter().find(|b| **b == word && **b != "print").map(|b| Tok::Banned(b));
        }
    };
    Some(Tok::Kw(kw))
}

// Longest first.
const OPERATORS: [&str; 26] = [
    "**=", "//=", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "%=", "**", "//", "->", "+", "-", "*",
    "/", "%", "<", ">", "=", "(", ")", "[", "]",
];
const PUNCT: [&str; 6] = [",", ":", ".", "{", "}", ";"];

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, ParseError> {
    Lexer { chars: src.chars().collect(), pos: 0, line: 1, col: 1, depth: 0, indents: vec![0], out: Vec::new() }
        .run()
}

/// Tokenizes one embedded f-string expression: no layout tokens.
pub fn tokenize_inline(src: &str, line: usize) -> Result<Vec<Token>, ParseError> {
    let mut lexer =
        Lexer { chars: src.chars().collect(), pos: 0, line, col: 1, depth: 1, indents: vec![0], out: Vec::new() };
    while lexer.pos < lexer.chars.len() {
        lexer.token()?;
    }
    let (line, col) = (lexer.line, lexer.col);
    lexer.out.push(Token { tok: Tok::Eof, line, col });
    Ok(lexer.out)
}

struct Lexer {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    /// Bracket nesting; newlines inside brackets are not significant.
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
}

impl Lexer {
    fn err<T>(&self, msg: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::new(self.line, self.col, msg))
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn peek_at(&self, n: usize) -> Option<char> {
        self.chars.get(self.pos + n).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.chars.get(self.pos).copied()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn push(&mut self, tok: Tok, line: usize, col: usize) {
        self.out.push(Token { tok, line, col });
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut at_line_start = true;
        while self.pos < self.chars.len() {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if !self.indentation()? {
                    continue;
                }
            }
            match self.peek() {
                Some('\n') => {
                    let (l, c) = (self.line, self.col);
                    self.bump();
                    if self.depth == 0 {
                        if !matches!(self.out.last().map(|t| &t.tok), Some(Tok::Newline) | None) {
                            self.push(Tok::Newline, l, c);
                        }
                        at_line_start = true;
                    }
                }
                _ => self.token()?,
            }
        }
        if self.depth > 0 {
            return self.err("unclosed bracket at end of input");
        }
        let (l, c) = (self.line, self.col);
        if !matches!(self.out.last().map(|t| &t.tok), Some(Tok::Newline) | None) {
            self.push(Tok::Newline, l, c);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent, l, c);
        }
        self.push(Tok::Eof, l, c);
        Ok(self.out)
    }

    /// Measures leading whitespace; returns false for blank/comment lines.
    fn indentation(&mut self) -> Result<bool, ParseError> {
        let mut width = 0;
        loop {
            match self.peek() {
                Some(' ') => width += 1,
                Some('\t') => width = (width / 8 + 1) * 8,
                Some('\r') => {}
                _ => break,
            }
            self.bump();
        }
        match self.peek() {
            None | Some('\n') => return Ok(false),
            Some('#') => {
                self.skip_comment();
                return Ok(false);
            }
            _ => {}
        }
        let (l, c) = (self.line, self.col);
        let current = *self.indents.last().expect("indent stack never empty");
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent, l, c);
        } else {
            while width < *self.indents.last().expect("indent stack never empty") {
                self.indents.pop();
                self.push(Tok::Dedent, l, c);
            }
            if width != *self.indents.last().expect("indent stack never empty") {
                return self.err("inconsistent dedent");
            }
        }
        Ok(true)
    }

    fn skip_comment(&mut self) {
        while let Some(c) = self.peek() {
            if c == '\n' {
                break;
            }
            self.bump();
        }
    }

    fn token(&mut self) -> Result<(), ParseError> {
        let (line, col) = (self.line, self.col);
        let c = self.peek().expect("token() called at end of input");
        match c {
            ' ' | '\t' | '\r' => {
                self.bump();
            }
            '\n' => {
                // Only reachable inside brackets.
                self.bump();
            }
            '#' => self.skip_comment(),
            '\\' => return self.err("line continuation is not supported"),
            '"' | '\'' => {
                let s = self.string(c)?;
                self.push(Tok::Str(s), line, col);
            }
            c if c.is_ascii_digit() || (c == '.' && self.peek_at(1).is_some_and(|d| d.is_ascii_digit())) => {
                let tok = self.number()?;
                self.push(tok, line, col);
            }
            c if c.is_alphabetic() || c == '_' => {
                if matches!(c, 'f' | 'F') && matches!(self.peek_at(1), Some('"' | '\'')) {
                    self.bump();
                    let quote = self.peek().expect("checked above");
                    let body = self.raw_string(quote)?;
                    self.push(Tok::FStr(body), line, col);
                    return Ok(());
                }
                if matches!(self.peek_at(1), Some('"' | '\'')) {
                    return self.err(format!("string prefix `{c}` is not supported"));
                }
                let mut word = String::new();
                while let Some(ch) = self.peek() {
                    if ch.is_alphanumeric() || ch == '_' {
                        word.push(ch);
                        self.bump();
                    } else {
                        break;
                    }
                }
                let tok = keyword(&word).unwrap_or(Tok::Name(word));
                self.push(tok, line, col);
            }
            _ => {
                let op = OPERATORS
                    .iter()
                    .chain(PUNCT.iter())
                    .find(|op| op.chars().enumerate().all(|(i, oc)| self.peek_at(i) == Some(oc)));
                let Some(op) = op else {
                    return self.err(format!("unexpected character `{c}`"));
                };
                for _ in 0..op.len() {
                    self.bump();
                }
                match *op {
                    "(" | "[" | "{" => self.depth += 1,
                    ")" | "]" | "}" => {
                        if self.depth == 0 {
                            return Err(ParseError::new(line, col, format!("unmatched `{op}`")));
                        }
                        self.depth -= 1;
                    }
                    _ => {}
                }
                self.push(Tok::Op(op), line, col);
            }
        }
        Ok(())
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let mut text = String::new();
        let mut is_float = false;
        while let Some(c) = self.peek() {
            if c.is_ascii_digit() {
                text.push(c);
            } else if c == '.' && !is_float && self.peek_at(1).is_none_or(|d| d.is_ascii_digit() || !d.is_alphabetic()) {
                is_float = true;
                text.push(c);
            } else if matches!(c, 'e' | 'E') {
                is_float = true;
                text.push(c);
                self.bump();
                if let Some(sign @ ('+' | '-')) = self.peek() {
                    text.push(sign);
                    self.bump();
                }
                continue;
            } else {
                break;
            }
            self.bump();
        }
        if self.peek().is_some_and(|c| c.is_alphanumeric() || c == '_') {
            return self.err(format!("malformed number `{text}`"));
        }
        if is_float {
            text.parse().map(Tok::Float).or_else(|_| self.err(format!("malformed number `{text}`")))
        } else {
            text.parse().map(Tok::Int).or_else(|_| self.err(format!("integer literal `{text}` is too large")))
        }
    }

    /// Reads a quoted literal with escapes resolved.
    fn string(&mut self, quote: char) -> Result<String, ParseError> {
        let raw = self.raw_string(quote)?;
        Ok(unescape(&raw))
    }

    /// Reads a quoted literal (single or triple quoted) and returns its raw body.
    fn raw_string(&mut self, quote: char) -> Result<String, ParseError> {
        let (line, col) = (self.line, self.col);
        let triple = self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote);
        let open = if triple { 3 } else { 1 };
        for _ in 0..open {
            self.bump();
        }
        let mut body = String::new();
        loop {
            let Some(c) = self.peek() else {
                return Err(ParseError::new(line, col, "unterminated string"));
            };
            if c == quote {
                if !triple {
                    self.bump();
                    return Ok(body);
                }
                if self.peek_at(1) == Some(quote) && self.peek_at(2) == Some(quote) {
                    for _ in 0..3 {
                        self.bump();
                    }
                    return Ok(body);
                }
            }
            if c == '\n' && !triple {
                return Err(ParseError::new(line, col, "unterminated string"));
            }
            if c == '\\' {
                body.push(c);
                self.bump();
                if let Some(next) = self.bump() {
                    body.push(next);
                }
                continue;
            }
            body.push(c);
            self.bump();
        }
    }
}

pub fn unescape(raw: &str) -> String {
    let mut out = String::with_capacity(raw.len());
    let mut chars = raw.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some('\\') => out.push('\\'),
            Some('\'') => out.push('\''),
            Some('"') => out.push('"'),
            Some('\n') => {}
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}
