use super::SpecError;

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) enum Tok {
    Ident(String),
    Int(u32),
    Sym(&'static str),
    Eof,
}

#[derive(Debug, Clone)]
pub(crate) struct Token {
    pub tok: Tok,
    pub line: usize,
    pub col: usize,
}

// Longest symbols first so that `->` wins over `-`.
const SYMBOLS: &[&str] = &[
    ":=", "/\\", "\\/", "->", "!=", "~", "=", "+", "-", "&", "{", "}", "[", "]", "(", ")", "|",
    ",", ".", ":", ";", "<", ">",
];

pub(crate) fn tokenize(src: &str) -> Result<Vec<Token>, SpecError> {
    let mut out = Vec::new();
    let chars: Vec<char> = src.chars().collect();
    let (mut i, mut line, mut col) = (0usize, 1usize, 1usize);
    while i < chars.len() {
        let c = chars[i];
        if c == '\n' {
            i += 1;
            line += 1;
            col = 1;
            continue;
        }
        if c.is_whitespace() {
            i += 1;
            col += 1;
            continue;
        }
        if c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
            continue;
        }
        let (start_line, start_col) = (line, col);
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            col += i - start;
            out.push(Token {
                tok: Tok::Ident(chars[start..i].iter().collect()),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        if c.is_ascii_digit() {
            let start = i;
            while i < chars.len() && chars[i].is_ascii_digit() {
                i += 1;
            }
            col += i - start;
            let text: String = chars[start..i].iter().collect();
            let n = text.parse::<u32>().map_err(|_| SpecError::Syntax {
                line: start_line,
                col: start_col,
                msg: format!("integer literal `{text}` out of range"),
            })?;
            out.push(Token {
                tok: Tok::Int(n),
                line: start_line,
                col: start_col,
            });
            continue;
        }
        let sym = SYMBOLS.iter().find(|s| {
            let sc: Vec<char> = s.chars().collect();
            chars.len() >= i + sc.len() && chars[i..i + sc.len()] == sc[..]
        });
        match sym {
            Some(s) => {
                i += s.len();
                col += s.len();
                out.push(Token {
                    tok: Tok::Sym(s),
                    line: start_line,
                    col: start_col,
                });
            }
            None => {
                return Err(SpecError::Syntax {
                    line,
                    col,
                    msg: format!("unexpected character `{c}`"),
                })
            }
        }
    }
    out.push(Token {
        tok: Tok::Eof,
        line,
        col,
    });
    Ok(out)
}
