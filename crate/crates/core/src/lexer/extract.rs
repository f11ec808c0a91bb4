//! Function extraction by brace balance.

use serde::{Deserialize, Serialize};

use super::{tokenize_spanned, Language, SpannedToken, Token, TokenType};
use crate::error::{Error, Result};

/// Tokens of surrounding code kept on each side of an extracted function.
pub const CONTEXT_TOKENS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceFunction {
    pub id: String,
    pub name: String,
    pub language: Language,
    /// Function text including its signature.
    pub text: String,
    pub file_path: String,
    pub start_line: usize,
    pub end_line: usize,
    pub tokens: Vec<Token>,
    pub context_before: Vec<Token>,
    pub context_after: Vec<Token>,
}

/// Finds the index of the token closing the group opened at `open`.
fn matching(tokens: &[SpannedToken], open: usize, left: &str, right: &str) -> Option<usize> {
    let mut depth = 0usize;
    for (i, t) in tokens.iter().enumerate().skip(open) {
        if t.token.text == left {
            depth += 1;
        } else if t.token.text == right {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

/// Finds the opening token matching the closing token at `close`.
fn matching_back(tokens: &[SpannedToken], close: usize, left: &str, right: &str) -> Option<usize> {
    let mut depth = 0usize;
    for i in (0..=close).rev() {
        let text = tokens[i].token.text.as_str();
        if text == right {
            depth += 1;
        } else if text == left {
            depth -= 1;
            if depth == 0 {
                return Some(i);
            }
        }
    }
    None
}

fn check_balance(tokens: &[SpannedToken]) -> Result<()> {
    let mut depth = 0i64;
    let mut last_open = 0;
    for t in tokens {
        match t.token.text.as_str() {
            "{" => {
                depth += 1;
                last_open = t.start;
            }
            "}" => {
                depth -= 1;
                if depth < 0 {
                    return Err(Error::UnbalancedBraces { offset: t.start });
                }
            }
            _ => {}
        }
    }
    if depth != 0 {
        return Err(Error::UnbalancedBraces { offset: last_open });
    }
    Ok(())
}

/// Tokens that may precede a function name as part of its declaration.
fn is_declaration_prefix(t: &Token) -> bool {
    matches!(
        t.ty,
        TokenType::Modifier | TokenType::BasicType | TokenType::Identifier | TokenType::Annotation
    ) || matches!(
        t.text.as_str(),
        "void"
            | "."
            | "["
            | "]"
            | ","
            | "<"
            | ">"
            | ">>"
            | ">>>"
            | "?"
            | "*"
            | "&"
            | "extends"
            | "super"
            | "const"
            | "static"
            | "inline"
            | "extern"
            | "struct"
            | "union"
            | "enum"
            | "register"
            | "volatile"
    )
}

/// If a function header starts with the identifier at `name_at`, returns the index of its `{`.
fn header_body_start(tokens: &[SpannedToken], name_at: usize, lang: Language) -> Option<usize> {
    let name = &tokens[name_at].token;
    if name.ty != TokenType::Identifier {
        return None;
    }
    if tokens.get(name_at + 1)?.token.text != "(" {
        return None;
    }
    if name_at > 0 {
        let prev = tokens[name_at - 1].token.text.as_str();
        if matches!(prev, "new" | "." | "=" | "->" | "return" | "::") {
            return None;
        }
    }
    let close = matching(tokens, name_at + 1, "(", ")")?;
    let mut j = close + 1;
    if lang == Language::JavaLike && tokens.get(j)?.token.text == "throws" {
        j += 1;
        while let Some(t) = tokens.get(j) {
            match t.token.text.as_str() {
                "{" => break,
                "." | "," | "<" | ">" => j += 1,
                _ if t.token.ty == TokenType::Identifier => j += 1,
                _ => return None,
            }
        }
    }
    (tokens.get(j)?.token.text == "{").then_some(j)
}

/// Walks back from the function name over return type, modifiers and annotations.
fn declaration_start(tokens: &[SpannedToken], name_at: usize) -> usize {
    let mut start = name_at;
    while start > 0 {
        let prev = &tokens[start - 1].token;
        if prev.text == ")" {
            // Annotation arguments, e.g. `@SuppressWarnings("x")`.
            match matching_back(tokens, start - 1, "(", ")") {
                Some(open) if open > 0 && tokens[open - 1].token.ty == TokenType::Annotation => {
                    start = open - 1;
                    continue;
                }
                _ => break,
            }
        }
        if is_declaration_prefix(prev) {
            start -= 1;
        } else {
            break;
        }
    }
    start
}

fn line_of(text: &str, byte: usize) -> usize {
    text[..byte].bytes().filter(|&b| b == b'\n').count() + 1
}

/// Extracts function-level fragments from a whole source file.
///
/// A function is an identifier followed by a balanced parameter list, an
/// optional `throws` clause (java-like) and a `{ ... }` body. Everything inside
/// the body, including local classes and lambdas, belongs to that function.
pub fn extract_functions(file_text: &str, lang: Language, file_path: &str) -> Result<Vec<SourceFunction>> {
    extract_functions_with(file_text, lang, file_path, CONTEXT_TOKENS)
}

/// Like [`extract_functions`] with `context` tokens kept on each side.
pub fn extract_functions_with(
    file_text: &str,
    lang: Language,
    file_path: &str,
    context: usize,
) -> Result<Vec<SourceFunction>> {
    let tokens = tokenize_spanned(file_text, lang)?;
    check_balance(&tokens)?;
    let mut out = Vec::new();
    let mut i = 0;
    while i < tokens.len() {
        let Some(open) = header_body_start(&tokens, i, lang) else {
            i += 1;
            continue;
        };
        let close = matching(&tokens, open, "{", "}").ok_or(Error::UnbalancedBraces {
            offset: tokens[open].start,
        })?;
        let start = declaration_start(&tokens, i);
        let (sb, eb) = (tokens[start].start, tokens[close].end);
        let start_line = line_of(file_text, sb);
        let name = tokens[i].token.text.clone();
        let ctx_lo = start.saturating_sub(context);
        let ctx_hi = (close + 1 + context).min(tokens.len());
        out.push(SourceFunction {
            id: format!("{file_path}#{name}:{start_line}"),
            name,
            language: lang,
            text: file_text[sb..eb].to_string(),
            file_path: file_path.to_string(),
            start_line,
            end_line: line_of(file_text, eb),
            tokens: tokens[start..=close].iter().map(|t| t.token.clone()).collect(),
            context_before: tokens[ctx_lo..start].iter().map(|t| t.token.clone()).collect(),
            context_after: tokens[close + 1..ctx_hi].iter().map(|t| t.token.clone()).collect(),
        });
        i = close + 1;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_c_function_has_empty_context() {
        let fns = extract_functions("int main(){return 0;}", Language::CLike, "m.c").unwrap();
        assert_eq!(fns.len(), 1);
        assert_eq!(fns[0].name, "main");
        assert_eq!(fns[0].text, "int main(){return 0;}");
        assert!(fns[0].context_before.is_empty());
        assert!(fns[0].context_after.is_empty());
    }

    #[test]
    fn adjacent_functions_share_context() {
        let src = "int f(int a){return a;}\nint g(){ return f(1); }\n";
        let fns = extract_functions(src, Language::CLike, "x.c").unwrap();
        assert_eq!(fns.len(), 2);
        assert_eq!(fns[1].context_before.last().unwrap().text, "}");
        assert_eq!(fns[0].context_after.first().unwrap().text, "int");
        assert_eq!(fns[1].start_line, 2);
    }

    #[test]
    fn java_methods_with_annotations_and_nested_classes() {
        let src = r#"
public class A {
    private int x;
    @Override
    @SuppressWarnings("unchecked")
    public <T extends Comparable<T>> List<T> sort(List<T> in) throws IOException, Bad {
        Runnable r = new Runnable() { public void run() { x++; } };
        class Local { int y() { return 1; } }
        if (in.isEmpty()) { return in; }
        return in;
    }
    static int[] twice(int[] a) { return a; }
}
"#;
        let fns = extract_functions(src, Language::JavaLike, "A.java").unwrap();
        let names: Vec<_> = fns.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["sort", "twice"]);
        assert!(fns[0].text.starts_with("@Override"));
        assert!(fns[0].text.contains("class Local"));
        assert!(fns[1].text.starts_with("static int[] twice"));
    }

    #[test]
    fn unbalanced_braces_are_rejected() {
        assert!(matches!(
            extract_functions("int f() { if (x) { return 1; }", Language::CLike, "b.c"),
            Err(Error::UnbalancedBraces { .. })
        ));
        assert!(matches!(
            extract_functions("int f() { } }", Language::CLike, "b.c"),
            Err(Error::UnbalancedBraces { .. })
        ));
    }

    #[test]
    fn control_statements_and_calls_are_not_functions() {
        let src = "void f() { while (g(1)) { h(); } } void k() {}";
        let fns = extract_functions(src, Language::CLike, "c.c").unwrap();
        let names: Vec<_> = fns.iter().map(|f| f.name.as_str()).collect();
        assert_eq!(names, ["f", "k"]);
    }

    #[test]
    fn context_is_capped() {
        let mut src = String::new();
        for i in 0..30 {
            src.push_str(&format!("int f{i}(int a) {{ return a + {i}; }}\n"));
        }
        let fns = extract_functions(&src, Language::CLike, "many.c").unwrap();
        assert_eq!(fns.len(), 30);
        assert_eq!(fns[15].context_before.len(), CONTEXT_TOKENS);
        assert_eq!(fns[15].context_after.len(), CONTEXT_TOKENS);
    }
}
