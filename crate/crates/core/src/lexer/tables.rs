//! Fixed word and punctuation tables for the two supported token grammars.

use super::Language;

const JAVA_MODIFIERS: &[&str] = &[
    "abstract",
    "default",
    "final",
    "native",
    "private",
    "protected",
    "public",
    "static",
    "strictfp",
    "synchronized",
    "transient",
    "volatile",
];

const JAVA_BASIC_TYPES: &[&str] = &["boolean", "byte", "char", "double", "float", "int", "long", "short"];

const JAVA_KEYWORDS: &[&str] = &[
    "assert",
    "break",
    "case",
    "catch",
    "class",
    "const",
    "continue",
    "do",
    "else",
    "enum",
    "extends",
    "finally",
    "for",
    "goto",
    "if",
    "implements",
    "import",
    "instanceof",
    "interface",
    "new",
    "package",
    "return",
    "super",
    "switch",
    "this",
    "throw",
    "throws",
    "try",
    "void",
    "while",
];

const C_BASIC_TYPES: &[&str] = &[
    "_Bool", "char", "double", "float", "int", "long", "short", "signed", "unsigned",
];

const C_KEYWORDS: &[&str] = &[
    "_Alignas",
    "_Alignof",
    "_Atomic",
    "_Complex",
    "_Generic",
    "_Imaginary",
    "_Noreturn",
    "_Static_assert",
    "_Thread_local",
    "auto",
    "break",
    "case",
    "const",
    "continue",
    "default",
    "do",
    "else",
    "enum",
    "extern",
    "for",
    "goto",
    "if",
    "inline",
    "register",
    "restrict",
    "return",
    "sizeof",
    "static",
    "struct",
    "switch",
    "typedef",
    "union",
    "void",
    "volatile",
    "while",
];

pub(crate) const SEPARATORS: &[&str] = &["...", "(", ")", "{", "}", "[", "]", ";", ",", "."];

// Longest first: the lexer takes the first match.
const JAVA_OPERATORS: &[&str] = &[
    ">>>=", "<<=", ">>=", ">>>", "->", "::", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=",
    "&=", "|=", "^=", "%=", "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

const C_OPERATORS: &[&str] = &[
    "<<=", ">>=", "->", "++", "--", "&&", "||", "==", "!=", "<=", ">=", "+=", "-=", "*=", "/=", "&=", "|=", "^=", "%=",
    "<<", ">>", "=", ">", "<", "!", "~", "?", ":", "+", "-", "*", "/", "&", "|", "^", "%",
];

pub(crate) fn operators(lang: Language) -> &'static [&'static str] {
    match lang {
        Language::JavaLike => JAVA_OPERATORS,
        Language::CLike => C_OPERATORS,
    }
}

pub(crate) fn is_modifier(word: &str, lang: Language) -> bool {
    lang == Language::JavaLike && JAVA_MODIFIERS.contains(&word)
}

pub(crate) fn is_basic_type(word: &str, lang: Language) -> bool {
    match lang {
        Language::JavaLike => JAVA_BASIC_TYPES.contains(&word),
        Language::CLike => C_BASIC_TYPES.contains(&word),
    }
}

pub(crate) fn is_keyword(word: &str, lang: Language) -> bool {
    match lang {
        Language::JavaLike => JAVA_KEYWORDS.contains(&word),
        Language::CLike => C_KEYWORDS.contains(&word),
    }
}

pub(crate) fn is_null(word: &str, lang: Language) -> bool {
    match lang {
        Language::JavaLike => word == "null",
        Language::CLike => word == "NULL",
    }
}
