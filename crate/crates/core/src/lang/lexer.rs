use super::ParseError;

#[derive(Debug, Clone, PartialEq)]
pub enum Tok {
    Name(String),
    Int(i64),
    Float(f64),
    Str(String),
    /// Raw body of an f-string; split into parts by the parser.
    FStr { body: String, raw: bool },
    Op(&'static str),
    Newline,
    Indent,
    Dedent,
    Eof,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Token {
    pub tok: Tok,
    pub line: usize,
}

const OPERATORS: &[&str] = &[
    "**=", "//=", ">>=", "<<=", "...", "**", "//", "==", "!=", "<=", ">=", "->", "+=", "-=", "*=",
    "/=", "%=", ":=", "<<", ">>", "&=", "|=", "^=", "+", "-", "*", "/", "%", "<", ">", "=", "(",
    ")", "[", "]", "{", "}", ",", ":", ".", ";", "@", "&", "|", "^", "~",
];

pub fn tokenize(source: &str) -> Result<Vec<Token>, ParseError> {
    Lexer::new(source).run()
}

struct Lexer<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    depth: usize,
    indents: Vec<usize>,
    out: Vec<Token>,
    _src: &'a str,
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str) -> Self {
        Lexer {
            chars: src.chars().collect(),
            pos: 0,
            line: 1,
            depth: 0,
            indents: vec![0],
            out: Vec::new(),
            _src: src,
        }
    }

    fn syntax(&self, message: impl Into<String>) -> ParseError {
        ParseError::Syntax {
            line: self.line,
            message: message.into(),
        }
    }

    fn peek(&self, off: usize) -> Option<char> {
        self.chars.get(self.pos + off).copied()
    }

    fn push(&mut self, tok: Tok) {
        self.out.push(Token {
            tok,
            line: self.line,
        });
    }

    fn run(mut self) -> Result<Vec<Token>, ParseError> {
        let mut at_line_start = true;
        while self.pos < self.chars.len() {
            if at_line_start && self.depth == 0 {
                at_line_start = false;
                if !self.handle_indent()? {
                    at_line_start = true;
                    continue;
                }
            }
            let c = self.chars[self.pos];
            match c {
                '\n' => {
                    self.pos += 1;
                    if self.depth == 0 {
                        if !matches!(
                            self.out.last().map(|t| &t.tok),
                            Some(Tok::Newline) | None
                        ) {
                            self.push(Tok::Newline);
                        }
                        at_line_start = true;
                    }
                    self.line += 1;
                }
                ' ' | '\t' | '\r' | '\x0c' => self.pos += 1,
                '#' => self.skip_comment(),
                '\\' if self.peek(1) == Some('\n') => {
                    self.pos += 2;
                    self.line += 1;
                }
                '\\' if self.peek(1) == Some('\r') && self.peek(2) == Some('\n') => {
                    self.pos += 3;
                    self.line += 1;
                }
                '"' | '\'' => {
                    let s = self.string_literal(false, false)?;
                    self.push(s);
                }
                c if c.is_ascii_digit() || (c == '.' && self.peek(1).is_some_and(|d| d.is_ascii_digit())) => {
                    let t = self.number()?;
                    self.push(t);
                }
                c if c.is_alphabetic() || c == '_' => self.name_or_prefixed_string()?,
                _ => self.operator()?,
            }
        }
        if !matches!(self.out.last().map(|t| &t.tok), Some(Tok::Newline) | None) {
            self.push(Tok::Newline);
        }
        while self.indents.len() > 1 {
            self.indents.pop();
            self.push(Tok::Dedent);
        }
        self.push(Tok::Eof);
        Ok(self.out)
    }

    fn skip_comment(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos] != '\n' {
            self.pos += 1;
        }
    }

    /// Measures leading whitespace; returns false when the line is blank or a
    /// comment and has been consumed.
    fn handle_indent(&mut self) -> Result<bool, ParseError> {
        let mut width = 0usize;
        while let Some(c) = self.peek(0) {
            match c {
                ' ' => width += 1,
                '\t' => width = (width / 8 + 1) * 8,
                '\x0c' | '\r' => {}
                _ => break,
            }
            self.pos += 1;
        }
        match self.peek(0) {
            None => return Ok(false),
            Some('\n') => {
                self.pos += 1;
                self.line += 1;
                return Ok(false);
            }
            Some('#') => {
                self.skip_comment();
                if self.peek(0) == Some('\n') {
                    self.pos += 1;
                    self.line += 1;
                }
                return Ok(false);
            }
            _ => {}
        }
        let current = *self.indents.last().expect("indent stack never empty");
        if width > current {
            self.indents.push(width);
            self.push(Tok::Indent);
        } else {
            while width < *self.indents.last().unwrap() {
                self.indents.pop();
                self.push(Tok::Dedent);
            }
            if width != *self.indents.last().unwrap() {
                return Err(self.syntax("unindent does not match any outer indentation level"));
            }
        }
        Ok(true)
    }

    fn name_or_prefixed_string(&mut self) -> Result<(), ParseError> {
        let start = self.pos;
        while self
            .peek(0)
            .is_some_and(|c| c.is_alphanumeric() || c == '_')
        {
            self.pos += 1;
        }
        let word: String = self.chars[start..self.pos].iter().collect();
        if matches!(self.peek(0), Some('"') | Some('\'')) && word.len() <= 2 {
            let lower = word.to_ascii_lowercase();
            if lower.chars().all(|c| "rfbu".contains(c)) {
                if lower.contains('b') {
                    return Err(ParseError::Forbidden {
                        line: self.line,
                        construct: "bytes literal".into(),
                    });
                }
                let raw = lower.contains('r');
                let fmt = lower.contains('f');
                let tok = self.string_literal(raw, fmt)?;
                self.push(tok);
                return Ok(());
            }
        }
        self.push(Tok::Name(word));
        Ok(())
    }

    fn number(&mut self) -> Result<Tok, ParseError> {
        let start = self.pos;
        if self.peek(0) == Some('0') && matches!(self.peek(1), Some('x') | Some('X')) {
            self.pos += 2;
            let hs = self.pos;
            while self.peek(0).is_some_and(|c| c.is_ascii_hexdigit() || c == '_') {
                self.pos += 1;
            }
            let digits: String = self.chars[hs..self.pos].iter().filter(|c| **c != '_').collect();
            return i64::from_str_radix(&digits, 16)
                .map(Tok::Int)
                .map_err(|_| self.syntax("invalid hexadecimal literal"));
        }
        let mut is_float = false;
        while let Some(c) = self.peek(0) {
            if c.is_ascii_digit() || c == '_' {
                self.pos += 1;
            } else if c == '.' && !is_float {
                is_float = true;
                self.pos += 1;
            } else if (c == 'e' || c == 'E')
                && (self.peek(1).is_some_and(|d| d.is_ascii_digit())
                    || (matches!(self.peek(1), Some('+') | Some('-'))
                        && self.peek(2).is_some_and(|d| d.is_ascii_digit())))
            {
                is_float = true;
                self.pos += 2;
            } else {
                break;
            }
        }
        if self.peek(0).is_some_and(|c| c.is_alphabetic() || c == '_') {
            return Err(self.syntax("invalid numeric literal"));
        }
        let text: String = self.chars[start..self.pos].iter().filter(|c| **c != '_').collect();
        if is_float {
            text.parse::<f64>()
                .map(Tok::Float)
                .map_err(|_| self.syntax(format!("invalid float literal {text}")))
        } else {
            text.parse::<i64>()
                .map(Tok::Int)
                .map_err(|_| self.syntax(format!("integer literal {text} is out of range")))
        }
    }

    fn string_literal(&mut self, raw: bool, fmt: bool) -> Result<Tok, ParseError> {
        let quote = self.chars[self.pos];
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        let start = self.pos;
        let start_line = self.line;
        let mut brace_depth = 0usize;
        loop {
            let Some(c) = self.peek(0) else {
                self.line = start_line;
                return Err(self.syntax("unterminated string literal"));
            };
            if fmt && brace_depth > 0 && (c == '"' || c == '\'') {
                // nested string inside a replacement field
                self.skip_nested_string()?;
                continue;
            }
            match c {
                '\\' => {
                    if self.peek(1) == Some('\n') {
                        self.line += 1;
                    }
                    self.pos += 2;
                    continue;
                }
                '\n' if !triple => return Err(self.syntax("newline in single-quoted string")),
                '\n' => self.line += 1,
                '{' if fmt => {
                    if brace_depth == 0 && self.peek(1) == Some('{') {
                        self.pos += 2;
                        continue;
                    }
                    brace_depth += 1;
                }
                '}' if fmt => {
                    if brace_depth == 0 && self.peek(1) == Some('}') {
                        self.pos += 2;
                        continue;
                    }
                    brace_depth = brace_depth.saturating_sub(1);
                }
                _ => {}
            }
            if c == quote
                && brace_depth == 0
                && (!triple || (self.peek(1) == Some(quote) && self.peek(2) == Some(quote)))
            {
                break;
            }
            self.pos += 1;
        }
        let body: String = self.chars[start..self.pos].iter().collect();
        self.pos += if triple { 3 } else { 1 };
        if fmt {
            Ok(Tok::FStr { body, raw })
        } else if raw {
            Ok(Tok::Str(body))
        } else {
            Ok(Tok::Str(unescape(&body)))
        }
    }

    fn skip_nested_string(&mut self) -> Result<(), ParseError> {
        let quote = self.chars[self.pos];
        let triple = self.peek(1) == Some(quote) && self.peek(2) == Some(quote);
        self.pos += if triple { 3 } else { 1 };
        loop {
            let Some(c) = self.peek(0) else {
                return Err(self.syntax("unterminated string literal"));
            };
            if c == '\\' {
                self.pos += 2;
                continue;
            }
            if c == '\n' {
                if !triple {
                    return Err(self.syntax("newline in single-quoted string"));
                }
                self.line += 1;
            }
            if c == quote && (!triple || (self.peek(1) == Some(quote) && self.peek(2) == Some(quote))) {
                self.pos += if triple { 3 } else { 1 };
                return Ok(());
            }
            self.pos += 1;
        }
    }

    fn operator(&mut self) -> Result<(), ParseError> {
        for op in OPERATORS {
            let len = op.chars().count();
            if self.pos + len <= self.chars.len()
                && self.chars[self.pos..self.pos + len].iter().copied().eq(op.chars())
            {
                self.pos += len;
                match *op {
                    "(" | "[" | "{" => self.depth += 1,
                    ")" | "]" | "}" => self.depth = self.depth.saturating_sub(1),
                    _ => {}
                }
                self.push(Tok::Op(op));
                return Ok(());
            }
        }
        Err(self.syntax(format!("unexpected character {:?}", self.chars[self.pos])))
    }
}

/// Processes backslash escapes of a non-raw string body.
pub fn unescape(body: &str) -> String {
    let mut out = String::with_capacity(body.len());
    let mut it = body.chars().peekable();
    while let Some(c) = it.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match it.next() {
            Some('n') => out.push('\n'),
            Some('t') => out.push('\t'),
            Some('r') => out.push('\r'),
            Some('0') => out.push('\0'),
            Some('\\') => out.push('\\'),
            Some('\'') => out.push('\''),
            Some('"') => out.push('"'),
            Some('\n') => {}
            Some('x') => {
                let hex: String = it.by_ref().take(2).collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) => out.push(ch),
                    None => {
                        out.push_str("\\x");
                        out.push_str(&hex);
                    }
                }
            }
            Some('u') => {
                let hex: String = it.by_ref().take(4).collect();
                match u32::from_str_radix(&hex, 16).ok().and_then(char::from_u32) {
                    Some(ch) => out.push(ch),
                    None => {
                        out.push_str("\\u");
                        out.push_str(&hex);
                    }
                }
            }
            Some(other) => {
                out.push('\\');
                out.push(other);
            }
            None => out.push('\\'),
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kinds(src: &str) -> Vec<Tok> {
        tokenize(src).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn indentation_produces_indent_and_dedent() {
        let toks = kinds("def f():\n\treturn 1\nx = 2\n");
        assert!(toks.contains(&Tok::Indent));
        assert!(toks.contains(&Tok::Dedent));
        assert_eq!(toks.last(), Some(&Tok::Eof));
    }

    #[test]
    fn newlines_inside_brackets_are_ignored() {
        let toks = kinds("x = [1,\n  2]\n");
        assert_eq!(toks.iter().filter(|t| **t == Tok::Newline).count(), 1);
    }

    #[test]
    fn fstring_with_nested_quotes() {
        let toks = kinds("q = f\"Is {a} in {', '.join(b)}?\"\n");
        assert!(matches!(&toks[2], Tok::FStr { body, .. } if body == "Is {a} in {', '.join(b)}?"));
    }

    #[test]
    fn triple_quoted_docstring_spans_lines() {
        let toks = kinds("'''\nsome\nnotes\n'''\ndef answer():\n    return 1\n");
        assert_eq!(toks[0], Tok::Str("\nsome\nnotes\n".into()));
    }

    #[test]
    fn bad_dedent_is_a_syntax_error() {
        let err = tokenize("if x:\n        y = 1\n    z = 2\n").unwrap_err();
        assert!(matches!(err, ParseError::Syntax { .. }));
    }

    #[test]
    fn numbers() {
        assert_eq!(kinds("1_000")[0], Tok::Int(1000));
        assert_eq!(kinds("2.5e3")[0], Tok::Float(2500.0));
        assert_eq!(kinds(".5")[0], Tok::Float(0.5));
    }

    #[test]
    fn blank_lines_between_blocks() {
        let toks = tokenize("def f():\n    return 1\n\n\ndef g():\n    return 2\n").unwrap();
        let indents = toks.iter().filter(|t| matches!(t.tok, Tok::Indent)).count();
        let dedents = toks.iter().filter(|t| matches!(t.tok, Tok::Dedent)).count();
        assert_eq!((indents, dedents), (2, 2));
    }
}
