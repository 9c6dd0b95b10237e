//! Quoted-argument lists as agents write them:
//! `'SELECT ?e WHERE { ... }', semantic="government form"`.

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Arg {
    pub name: Option<String>,
    pub value: String,
}

/// Parses a comma-separated list of optionally named, single- or
/// double-quoted strings. Returns `None` when the text is not such a list.
pub fn parse_string_args(text: &str) -> Option<Vec<Arg>> {
    let chars: Vec<char> = text.chars().collect();
    let mut i = 0;
    let mut out = Vec::new();
    let skip_ws = |i: &mut usize| {
        while *i < chars.len() && chars[*i].is_whitespace() {
            *i += 1;
        }
    };
    skip_ws(&mut i);
    if i == chars.len() {
        return Some(out);
    }
    loop {
        skip_ws(&mut i);
        let mut name = None;
        let start = i;
        while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
            i += 1;
        }
        if i > start {
            let ident: String = chars[start..i].iter().collect();
            skip_ws(&mut i);
            if chars.get(i) != Some(&'=') {
                return None;
            }
            i += 1;
            skip_ws(&mut i);
            name = Some(ident);
        }
        let quote = *chars.get(i)?;
        if quote != '"' && quote != '\'' {
            return None;
        }
        i += 1;
        let mut value = String::new();
        loop {
            let c = *chars.get(i)?;
            i += 1;
            match c {
                '\\' => {
                    let e = *chars.get(i)?;
                    i += 1;
                    value.push(match e {
                        'n' => '\n',
                        't' => '\t',
                        other => other,
                    });
                }
                c if c == quote => break,
                c => value.push(c),
            }
        }
        out.push(Arg { name, value });
        skip_ws(&mut i);
        match chars.get(i) {
            None => return Some(out),
            Some(',') => i += 1,
            Some(_) => return None,
        }
    }
}

/// Quotes `value` so that [`parse_string_args`] recovers it.
pub fn quote(value: &str) -> String {
    let mut out = String::with_capacity(value.len() + 2);
    out.push('"');
    for c in value.chars() {
        match c {
            '"' => out.push_str("\\\""),
            '\\' => out.push_str("\\\\"),
            '\n' => out.push_str("\\n"),
            c => out.push(c),
        }
    }
    out.push('"');
    out
}
