//! Rendering token lists back to text.

use rand::Rng;

use super::Token;

/// Joins token texts with single spaces.
pub fn join_tokens(tokens: &[Token]) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            out.push(' ');
        }
        out.push_str(&t.text);
    }
    out
}

const GLUE_SAFE: &[&str] = &["(", ")", "{", "}", "[", "]", ";", ","];

const COMMENT_WORDS: &[&str] = &[
    "note",
    "check",
    "fast path",
    "edge case",
    "see above",
    "loop",
    "result",
    "helper",
    "tmp",
    "fixme later",
    "bounds",
    "init",
];

/// Random layout knobs for [`reformat`].
#[derive(Debug, Clone, Copy)]
pub struct FormatStyle {
    /// Probability of inserting a comment at a token boundary.
    pub comment_rate: f64,
    /// Probability of a line break at a token boundary.
    pub newline_rate: f64,
    /// Maximum indentation (spaces) after a line break.
    pub max_indent: usize,
}

impl Default for FormatStyle {
    fn default() -> Self {
        FormatStyle {
            comment_rate: 0.05,
            newline_rate: 0.15,
            max_indent: 8,
        }
    }
}

/// Re-renders tokens with random whitespace and comments.
///
/// The output always re-tokenizes to exactly `tokens`: adjacent lexemes are
/// glued without whitespace only when one of them is a bracket, `;` or `,`,
/// and comments are always surrounded by whitespace.
pub fn reformat<R: Rng + ?Sized>(tokens: &[Token], style: FormatStyle, rng: &mut R) -> String {
    let mut out = String::new();
    for (i, t) in tokens.iter().enumerate() {
        if i > 0 {
            let prev = &tokens[i - 1].text;
            let glue_ok = GLUE_SAFE.contains(&prev.as_str()) || GLUE_SAFE.contains(&t.text.as_str());
            if rng.random_bool(style.comment_rate) {
                let word = COMMENT_WORDS[rng.random_range(0..COMMENT_WORDS.len())];
                if rng.random_bool(0.5) {
                    out.push_str(&format!(" // {word}\n"));
                } else {
                    out.push_str(&format!(" /* {word} */ "));
                }
            } else if rng.random_bool(style.newline_rate) {
                out.push('\n');
                let indent = rng.random_range(0..=style.max_indent);
                out.extend(std::iter::repeat_n(' ', indent));
            } else if glue_ok && rng.random_bool(0.5) {
                // no whitespace
            } else {
                let spaces = if rng.random_bool(0.8) { 1 } else { 2 };
                out.extend(std::iter::repeat_n(' ', spaces));
            }
        } else if rng.random_bool(style.comment_rate) {
            out.push_str("/* header */\n");
        }
        out.push_str(&t.text);
    }
    if rng.random_bool(style.comment_rate) {
        out.push_str(" // end\n");
    }
    out
}
