//! Token-level view of Java-like and C-like source code.
//!
//! The lexer never parses: it splits text into lexemes, drops whitespace and
//! comments, and tags every lexeme with one of fifteen [`TokenType`]s. Function
//! fragments are found afterwards by a brace-balance heuristic ([`extract_functions`]).

mod extract;
mod format;
mod tables;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use extract::{extract_functions, extract_functions_with, SourceFunction, CONTEXT_TOKENS};
pub use format::{join_tokens, reformat, FormatStyle};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Language {
    #[serde(rename = "java")]
    JavaLike,
    #[serde(rename = "c")]
    CLike,
}

impl Language {
    pub fn name(self) -> &'static str {
        match self {
            Language::JavaLike => "java",
            Language::CLike => "c",
        }
    }

    /// Maps a file extension (without the dot) to a language.
    pub fn from_extension(ext: &str) -> Option<Language> {
        match ext {
            "java" => Some(Language::JavaLike),
            "c" | "h" => Some(Language::CLike),
            _ => None,
        }
    }
}

impl fmt::Display for Language {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Language {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "java" | "java-like" => Ok(Language::JavaLike),
            "c" | "c-like" => Ok(Language::CLike),
            other => Err(Error::Config(format!("unsupported language `{other}`"))),
        }
    }
}

/// The fifteen lexical categories. Discriminants are the stable type ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[repr(u8)]
pub enum TokenType {
    Separator = 0,
    Identifier = 1,
    Operator = 2,
    Keyword = 3,
    Modifier = 4,
    DecimalInteger = 5,
    BasicType = 6,
    String = 7,
    Boolean = 8,
    Null = 9,
    DecimalFloatingPoint = 10,
    Annotation = 11,
    HexInteger = 12,
    HexFloatingPoint = 13,
    OtherType = 14,
}

impl TokenType {
    pub const COUNT: usize = 15;

    pub const ALL: [TokenType; 15] = [
        TokenType::Separator,
        TokenType::Identifier,
        TokenType::Operator,
        TokenType::Keyword,
        TokenType::Modifier,
        TokenType::DecimalInteger,
        TokenType::BasicType,
        TokenType::String,
        TokenType::Boolean,
        TokenType::Null,
        TokenType::DecimalFloatingPoint,
        TokenType::Annotation,
        TokenType::HexInteger,
        TokenType::HexFloatingPoint,
        TokenType::OtherType,
    ];

    pub fn id(self) -> usize {
        self as usize
    }

    pub fn from_id(id: usize) -> Option<TokenType> {
        Self::ALL.get(id).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            TokenType::Separator => "Separator",
            TokenType::Identifier => "Identifier",
            TokenType::Operator => "Operator",
            TokenType::Keyword => "Keyword",
            TokenType::Modifier => "Modifier",
            TokenType::DecimalInteger => "DecimalInteger",
            TokenType::BasicType => "BasicType",
            TokenType::String => "String",
            TokenType::Boolean => "Boolean",
            TokenType::Null => "Null",
            TokenType::DecimalFloatingPoint => "DecimalFloatingPoint",
            TokenType::Annotation => "Annotation",
            TokenType::HexInteger => "HexInteger",
            TokenType::HexFloatingPoint => "HexFloatingPoint",
            TokenType::OtherType => "OtherType",
        }
    }
}

impl fmt::Display for TokenType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    #[serde(rename = "type")]
    pub ty: TokenType,
}

impl Token {
    pub fn new(text: impl Into<String>, ty: TokenType) -> Self {
        Token { text: text.into(), ty }
    }
}

/// A token together with its byte span in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpannedToken {
    pub token: Token,
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenSequence {
    pub function_id: String,
    pub tokens: Vec<Token>,
}

impl TokenSequence {
    pub fn new(function_id: impl Into<String>, tokens: Vec<Token>) -> Self {
        TokenSequence {
            function_id: function_id.into(),
            tokens,
        }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn texts(&self) -> impl Iterator<Item = &str> {
        self.tokens.iter().map(|t| t.text.as_str())
    }
}

/// Tokenizes `source` and discards spans. The sequence carries an empty function id.
pub fn tokenize(source: &str, lang: Language) -> Result<TokenSequence> {
    let tokens = tokenize_spanned(source, lang)?.into_iter().map(|s| s.token).collect();
    Ok(TokenSequence::new(String::new(), tokens))
}

pub fn tokenize_spanned(source: &str, lang: Language) -> Result<Vec<SpannedToken>> {
    Lexer::new(source, lang).run()
}

struct Lexer<'a> {
    src: &'a str,
    bytes: &'a [u8],
    pos: usize,
    lang: Language,
    out: Vec<SpannedToken>,
}

fn is_ident_start(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphabetic()
}

fn is_ident_continue(c: char) -> bool {
    c == '_' || c == '$' || c.is_alphanumeric()
}

impl<'a> Lexer<'a> {
    fn new(src: &'a str, lang: Language) -> Self {
        Lexer {
            src,
            bytes: src.as_bytes(),
            pos: 0,
            lang,
            out: Vec::new(),
        }
    }

    fn peek_char(&self, at: usize) -> Option<char> {
        self.src.get(at..).and_then(|s| s.chars().next())
    }

    fn byte(&self, at: usize) -> Option<u8> {
        self.bytes.get(at).copied()
    }

    fn push(&mut self, start: usize, end: usize) {
        let text = &self.src[start..end];
        let ty = classify_token(text, self.lang);
        self.out.push(SpannedToken {
            token: Token::new(text, ty),
            start,
            end,
        });
    }

    fn run(mut self) -> Result<Vec<SpannedToken>> {
        while self.pos < self.bytes.len() {
            let c = match self.peek_char(self.pos) {
                Some(c) => c,
                None => break,
            };
            if c.is_whitespace() {
                self.pos += c.len_utf8();
                continue;
            }
            let start = self.pos;
            match c {
                '/' if self.byte(start + 1) == Some(b'/') => {
                    self.pos = self.src[start..].find('\n').map_or(self.bytes.len(), |i| start + i + 1);
                }
                '/' if self.byte(start + 1) == Some(b'*') => {
                    let close = self.src[start + 2..].find("*/").ok_or_else(|| Error::Lex {
                        offset: start,
                        message: "unterminated block comment".into(),
                    })?;
                    self.pos = start + 2 + close + 2;
                }
                '"' | '\'' => {
                    let end = self.scan_quoted(start, start)?;
                    self.push(start, end);
                    self.pos = end;
                }
                '@' if self.lang == Language::JavaLike && self.peek_char(start + 1).is_some_and(is_ident_start) => {
                    let end = self.scan_ident(start + 1);
                    self.push(start, end);
                    self.pos = end;
                }
                '#' if self.peek_char(start + 1).is_some_and(is_ident_start) => {
                    let end = self.scan_ident(start + 1);
                    self.push(start, end);
                    self.pos = end;
                }
                c if c.is_ascii_digit() || (c == '.' && self.byte(start + 1).is_some_and(|b| b.is_ascii_digit())) => {
                    let end = self.scan_number(start);
                    self.push(start, end);
                    self.pos = end;
                }
                c if is_ident_start(c) => {
                    let end = self.scan_ident(start);
                    // C string/char prefixes: L"..", u"..", U"..", u8"..".
                    let word = &self.src[start..end];
                    if self.lang == Language::CLike
                        && matches!(word, "L" | "u" | "U" | "u8")
                        && matches!(self.byte(end), Some(b'"') | Some(b'\''))
                    {
                        let qend = self.scan_quoted(start, end)?;
                        self.push(start, qend);
                        self.pos = qend;
                    } else {
                        self.push(start, end);
                        self.pos = end;
                    }
                }
                _ => {
                    let end = self.scan_punct(start);
                    self.push(start, end);
                    self.pos = end;
                }
            }
        }
        Ok(self.out)
    }

    fn scan_ident(&self, from: usize) -> usize {
        let mut end = from;
        for c in self.src[from..].chars() {
            if is_ident_continue(c) {
                end += c.len_utf8();
            } else {
                break;
            }
        }
        end
    }

    /// Scans a string or char literal whose opening quote sits at `quote_at`.
    fn scan_quoted(&self, token_start: usize, quote_at: usize) -> Result<usize> {
        let quote = self.bytes[quote_at];
        if quote == b'"' && self.lang == Language::JavaLike && self.src[quote_at..].starts_with("\"\"\"") {
            let close = self.src[quote_at + 3..].find("\"\"\"").ok_or_else(|| Error::Lex {
                offset: token_start,
                message: "unterminated text block".into(),
            })?;
            return Ok(quote_at + 3 + close + 3);
        }
        let mut i = quote_at + 1;
        while i < self.bytes.len() {
            match self.bytes[i] {
                b'\\' => i += 2,
                b'\n' => break,
                b if b == quote => return Ok(i + 1),
                _ => i += 1,
            }
        }
        Err(Error::Lex {
            offset: token_start,
            message: if quote == b'"' {
                "unterminated string literal".into()
            } else {
                "unterminated character literal".into()
            },
        })
    }

    fn scan_number(&self, start: usize) -> usize {
        let b = self.bytes;
        let mut i = start;
        let hex = b[i] == b'0' && matches!(b.get(i + 1), Some(b'x') | Some(b'X'));
        if hex {
            i += 2;
            while i < b.len() && (b[i].is_ascii_hexdigit() || b[i] == b'_' || b[i] == b'.') {
                i += 1;
            }
            if i < b.len() && matches!(b[i], b'p' | b'P') {
                i += 1;
                if i < b.len() && matches!(b[i], b'+' | b'-') {
                    i += 1;
                }
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                    i += 1;
                }
            }
        } else {
            while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                i += 1;
            }
            if i < b.len() && b[i] == b'.' && !matches!(b.get(i + 1), Some(b'.')) {
                i += 1;
                while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                    i += 1;
                }
            }
            if i < b.len() && matches!(b[i], b'e' | b'E') {
                let mut j = i + 1;
                if j < b.len() && matches!(b[j], b'+' | b'-') {
                    j += 1;
                }
                if j < b.len() && b[j].is_ascii_digit() {
                    i = j;
                    while i < b.len() && (b[i].is_ascii_digit() || b[i] == b'_') {
                        i += 1;
                    }
                }
            }
        }
        // Type suffixes (L, f, d, u, ul, b for 0b-literals, ...).
        while i < b.len() && (b[i].is_ascii_alphanumeric()) {
            i += 1;
        }
        i
    }

    fn scan_punct(&self, start: usize) -> usize {
        let rest = &self.src[start..];
        for sep in tables::SEPARATORS {
            if rest.starts_with(sep) {
                return start + sep.len();
            }
        }
        for op in tables::operators(self.lang) {
            if rest.starts_with(op) {
                return start + op.len();
            }
        }
        start + rest.chars().next().map_or(1, char::len_utf8)
    }
}

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    chars.next().is_some_and(is_ident_start) && chars.all(is_ident_continue)
}

fn all_digits(s: &str, radix: u32) -> bool {
    !s.is_empty() && s.chars().all(|c| c == '_' || c.is_digit(radix))
}

fn strip_int_suffix(s: &str) -> &str {
    s.trim_end_matches(['l', 'L', 'u', 'U'])
}

fn is_hex_integer(s: &str) -> bool {
    let Some(body) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) else {
        return false;
    };
    let body = strip_int_suffix(body);
    all_digits(body, 16) && body.chars().any(|c| c.is_ascii_hexdigit())
}

fn is_hex_float(s: &str) -> bool {
    let Some(body) = s.strip_prefix("0x").or_else(|| s.strip_prefix("0X")) else {
        return false;
    };
    let body = body.trim_end_matches(['f', 'F', 'd', 'D', 'l', 'L']);
    let Some(p) = body.find(['p', 'P']) else {
        return false;
    };
    let (mantissa, exp) = (&body[..p], &body[p + 1..]);
    let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
    let (int, frac) = mantissa.split_once('.').unwrap_or((mantissa, ""));
    let mantissa_ok = (int.is_empty() || all_digits(int, 16))
        && (frac.is_empty() || all_digits(frac, 16))
        && (int.chars().chain(frac.chars()).any(|c| c.is_ascii_hexdigit()));
    mantissa_ok && all_digits(exp, 10)
}

fn is_decimal_integer(s: &str) -> bool {
    let body = strip_int_suffix(s);
    // Leading-zero forms other than a bare "0" are octal.
    all_digits(body, 10) && body.starts_with(|c: char| c.is_ascii_digit()) && (body == "0" || !body.starts_with('0'))
}

fn is_decimal_float(s: &str) -> bool {
    let (body, suffixed) = match s.strip_suffix(['f', 'F', 'd', 'D']) {
        Some(b) => (b, true),
        None => (s.strip_suffix(['l', 'L']).unwrap_or(s), false),
    };
    let (mantissa, exp) = match body.find(['e', 'E']) {
        Some(p) => (&body[..p], Some(&body[p + 1..])),
        None => (body, None),
    };
    if let Some(exp) = exp {
        let exp = exp.strip_prefix(['+', '-']).unwrap_or(exp);
        if !all_digits(exp, 10) {
            return false;
        }
    }
    let (int, frac, has_dot) = match mantissa.split_once('.') {
        Some((i, f)) => (i, f, true),
        None => (mantissa, "", false),
    };
    let digits_ok = (int.is_empty() || all_digits(int, 10))
        && (frac.is_empty() || all_digits(frac, 10))
        && int.chars().chain(frac.chars()).any(|c| c.is_ascii_digit());
    digits_ok && (has_dot || exp.is_some() || suffixed)
}

/// Assigns a token type to a lexeme. Total: unknown lexemes become [`TokenType::OtherType`].
pub fn classify_token(lexeme: &str, lang: Language) -> TokenType {
    if lexeme.is_empty() {
        return TokenType::OtherType;
    }
    let first = lexeme.as_bytes()[0];
    if first == b'"' || first == b'\'' {
        return TokenType::String;
    }
    if lang == Language::CLike {
        for prefix in ["u8", "L", "u", "U"] {
            if let Some(rest) = lexeme.strip_prefix(prefix) {
                if rest.starts_with(['"', '\'']) {
                    return TokenType::String;
                }
            }
        }
    }
    if let Some(rest) = lexeme.strip_prefix('@') {
        return if lang == Language::JavaLike && is_identifier(rest) {
            TokenType::Annotation
        } else {
            TokenType::OtherType
        };
    }
    if lexeme.starts_with('#') {
        return TokenType::OtherType;
    }
    if is_identifier(lexeme) {
        return if tables::is_modifier(lexeme, lang) {
            TokenType::Modifier
        } else if tables::is_basic_type(lexeme, lang) {
            TokenType::BasicType
        } else if lexeme == "true" || lexeme == "false" {
            TokenType::Boolean
        } else if tables::is_null(lexeme, lang) {
            TokenType::Null
        } else if tables::is_keyword(lexeme, lang) {
            TokenType::Keyword
        } else {
            TokenType::Identifier
        };
    }
    if tables::SEPARATORS.contains(&lexeme) {
        return TokenType::Separator;
    }
    if first.is_ascii_digit() || (first == b'.' && lexeme.len() > 1) {
        return if is_hex_float(lexeme) {
            TokenType::HexFloatingPoint
        } else if is_hex_integer(lexeme) {
            TokenType::HexInteger
        } else if is_decimal_integer(lexeme) {
            TokenType::DecimalInteger
        } else if is_decimal_float(lexeme) {
            TokenType::DecimalFloatingPoint
        } else {
            // Octal, binary and malformed numerals.
            TokenType::OtherType
        };
    }
    if tables::operators(lang).contains(&lexeme) {
        return TokenType::Operator;
    }
    TokenType::OtherType
}
