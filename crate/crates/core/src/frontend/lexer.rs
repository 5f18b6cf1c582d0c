use super::ast::Pos;
use super::SyntaxError;

#[derive(Clone, Debug, PartialEq)]
pub enum Tok {
    Int(i32),
    Float(f64),
    Str(String),
    Ident(String),
    Keyword(&'static str),
    Punct(&'static str),
    Eof,
}

const KEYWORDS: &[&str] = &[
    "var", "function", "return", "if", "else", "while", "for", "true", "false", "null", "undefined",
];

// Longest first so that maximal munch works with a linear scan.
const PUNCTS: &[&str] = &[
    "===", "!==", "<<=", ">>=", "==", "!=", "<=", ">=", "<<", ">>", "++", "--", "+=", "-=", "*=", "/=", "%=", "&=",
    "|=", "^=", "+", "-", "*", "/", "%", "&", "|", "^", "<", ">", "=", "!", "(", ")", "{", "}", "[", "]", ";",
    ",", ".", ":",
];

#[derive(Clone, Debug)]
pub struct Token {
    pub tok: Tok,
    pub pos: Pos,
}

pub fn tokenize(src: &str) -> Result<Vec<Token>, SyntaxError> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let (mut i, mut line, mut col) = (0usize, 1u32, 1u32);
    let err = |pos: Pos, msg: String| SyntaxError { line: pos.line, col: pos.col, message: msg };

    macro_rules! bump {
        () => {{
            if chars[i] == '\n' {
                line += 1;
                col = 1;
            } else {
                col += 1;
            }
            i += 1;
        }};
    }

    while i < chars.len() {
        let c = chars[i];
        let pos = Pos { line, col };
        if c.is_whitespace() {
            bump!();
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'/') {
            while i < chars.len() && chars[i] != '\n' {
                bump!();
            }
            continue;
        }
        if c == '/' && chars.get(i + 1) == Some(&'*') {
            bump!();
            bump!();
            loop {
                if i + 1 >= chars.len() {
                    return Err(err(pos, "unterminated comment".into()));
                }
                if chars[i] == '*' && chars[i + 1] == '/' {
                    bump!();
                    bump!();
                    break;
                }
                bump!();
            }
            continue;
        }
        if c.is_ascii_digit() || (c == '.' && chars.get(i + 1).is_some_and(|d| d.is_ascii_digit())) {
            let start = i;
            if c == '0' && matches!(chars.get(i + 1), Some('x' | 'X')) {
                bump!();
                bump!();
                let hs = i;
                while i < chars.len() && chars[i].is_ascii_hexdigit() {
                    bump!();
                }
                let digits: String = chars[hs..i].iter().collect();
                let v = u64::from_str_radix(&digits, 16).map_err(|_| err(pos, "malformed hex literal".into()))?;
                out.push(Token { tok: number_token(v as f64, true), pos });
                continue;
            }
            let mut integral = true;
            while i < chars.len() && chars[i].is_ascii_digit() {
                bump!();
            }
            if i < chars.len() && chars[i] == '.' {
                integral = false;
                bump!();
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            if i < chars.len() && matches!(chars[i], 'e' | 'E') {
                integral = false;
                bump!();
                if i < chars.len() && matches!(chars[i], '+' | '-') {
                    bump!();
                }
                if !(i < chars.len() && chars[i].is_ascii_digit()) {
                    return Err(err(pos, "malformed exponent".into()));
                }
                while i < chars.len() && chars[i].is_ascii_digit() {
                    bump!();
                }
            }
            let text: String = chars[start..i].iter().collect();
            let v: f64 = text.parse().map_err(|_| err(pos, format!("malformed number `{text}`")))?;
            out.push(Token { tok: number_token(v, integral), pos });
            continue;
        }
        if c.is_alphabetic() || c == '_' || c == '$' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_' || chars[i] == '$') {
                bump!();
            }
            let word: String = chars[start..i].iter().collect();
            let tok = match KEYWORDS.iter().find(|k| **k == word) {
                Some(k) => Tok::Keyword(k),
                None => Tok::Ident(word),
            };
            out.push(Token { tok, pos });
            continue;
        }
        if c == '"' || c == '\'' {
            bump!();
            let mut s = String::new();
            loop {
                if i >= chars.len() || chars[i] == '\n' {
                    return Err(err(pos, "unterminated string literal".into()));
                }
                let d = chars[i];
                bump!();
                if d == c {
                    break;
                }
                if d == '\\' {
                    if i >= chars.len() {
                        return Err(err(pos, "unterminated string literal".into()));
                    }
                    let e = chars[i];
                    bump!();
                    s.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        'r' => '\r',
                        '0' => '\0',
                        other => other,
                    });
                } else {
                    s.push(d);
                }
            }
            out.push(Token { tok: Tok::Str(s), pos });
            continue;
        }
        let rest: String = chars[i..chars.len().min(i + 3)].iter().collect();
        match PUNCTS.iter().find(|p| rest.starts_with(**p)) {
            Some(p) => {
                for _ in 0..p.chars().count() {
                    bump!();
                }
                out.push(Token { tok: Tok::Punct(p), pos });
            }
            None => return Err(err(pos, format!("unexpected character `{c}`"))),
        }
    }
    out.push(Token { tok: Tok::Eof, pos: Pos { line, col } });
    Ok(out)
}

/// Integer literals without a decimal point or exponent and with magnitude
/// below 2^31 are int32; everything else is float64.
fn number_token(v: f64, integral: bool) -> Tok {
    if integral && v < 2_147_483_648.0 {
        Tok::Int(v as i32)
    } else {
        Tok::Float(v)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toks(s: &str) -> Vec<Tok> {
        tokenize(s).unwrap().into_iter().map(|t| t.tok).collect()
    }

    #[test]
    fn numbers() {
        assert_eq!(toks("1 0x100 1.5 2147483648 1e3"), vec![
            Tok::Int(1),
            Tok::Int(256),
            Tok::Float(1.5),
            Tok::Float(2147483648.0),
            Tok::Float(1000.0),
            Tok::Eof
        ]);
    }

    #[test]
    fn punctuation_is_maximal_munch() {
        assert_eq!(toks("a<<=b"), vec![
            Tok::Ident("a".into()),
            Tok::Punct("<<="),
            Tok::Ident("b".into()),
            Tok::Eof
        ]);
    }

    #[test]
    fn positions_and_comments() {
        let t = tokenize("// hi\n  /* x\n */ foo").unwrap();
        assert_eq!(t[0].pos, Pos { line: 3, col: 5 });
    }

    #[test]
    fn bad_char() {
        let e = tokenize("a # b").unwrap_err();
        assert_eq!((e.line, e.col), (1, 3));
    }
}
