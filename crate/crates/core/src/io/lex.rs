use crate::error::{Error, Result};
use crate::graph::Param;
use crate::probability::{Gaussian, ProbSpec};

/// One whitespace-separated token, split at its first unquoted `=`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Field {
    pub key: Option<String>,
    pub value: String,
    /// 1-based column of the token start.
    pub col: usize,
    /// Column where the value starts.
    pub value_col: usize,
    pub quoted: bool,
}

#[derive(Debug, Clone)]
pub(crate) struct Line {
    pub number: usize,
    pub fields: Vec<Field>,
}

impl Line {
    pub fn err(&self, col: usize, reason: impl Into<String>) -> Error {
        Error::Parse { line: self.number, column: col, reason: reason.into() }
    }

    /// The bare positional token at `i` (after the keyword).
    pub fn positional(&self, i: usize, what: &str) -> Result<&Field> {
        match self.fields.get(i) {
            Some(f) if f.key.is_none() => Ok(f),
            Some(f) => Err(self.err(f.col, format!("expected {what}, found `{}=`", f.key.as_deref().unwrap_or("")))),
            None => Err(self.err(self.end_col(), format!("missing {what}"))),
        }
    }

    pub fn end_col(&self) -> usize {
        self.fields.last().map_or(1, |f| f.value_col + f.value.chars().count())
    }

    /// Keyed fields from position `from` on; bare tokens there are errors.
    pub fn keyed(&self, from: usize) -> Result<Vec<(&str, &Field)>> {
        self.fields[from.min(self.fields.len())..]
            .iter()
            .map(|f| match &f.key {
                Some(k) => Ok((k.as_str(), f)),
                None => Err(self.err(f.col, format!("expected key=value, found `{}`", f.value))),
            })
            .collect()
    }
}

fn tokenize(number: usize, text: &str) -> Result<Vec<Field>> {
    let chars: Vec<char> = text.chars().collect();
    let mut fields = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        if chars[i].is_whitespace() {
            i += 1;
            continue;
        }
        if chars[i] == '#' {
            break;
        }
        let col = i + 1;
        let mut key: Option<String> = None;
        let mut buf = String::new();
        let mut value_col = col;
        let mut quoted = false;
        while i < chars.len() && !chars[i].is_whitespace() {
            match chars[i] {
                '"' => {
                    quoted = true;
                    let open = i + 1;
                    i += 1;
                    loop {
                        match chars.get(i) {
                            None => {
                                return Err(Error::Parse { line: number, column: open, reason: "unterminated quote".into() })
                            }
                            Some('"') => break,
                            Some('\\') => {
                                match chars.get(i + 1) {
                                    Some(c @ ('"' | '\\')) => buf.push(*c),
                                    Some('n') => buf.push('\n'),
                                    _ => {
                                        return Err(Error::Parse {
                                            line: number,
                                            column: i + 1,
                                            reason: "bad escape".into(),
                                        })
                                    }
                                }
                                i += 2;
                                continue;
                            }
                            Some(c) => buf.push(*c),
                        }
                        i += 1;
                    }
                    i += 1;
                }
                '=' if key.is_none() && !quoted => {
                    key = Some(std::mem::take(&mut buf));
                    value_col = i + 2;
                    i += 1;
                }
                c => {
                    buf.push(c);
                    i += 1;
                }
            }
        }
        fields.push(Field { key, value: buf, col, value_col, quoted });
    }
    Ok(fields)
}

/// Tokenized non-empty lines with their 1-based numbers.
pub(crate) fn lines(text: &str) -> Result<Vec<Line>> {
    let mut out = Vec::new();
    for (n, raw) in text.split('\n').enumerate() {
        let raw = raw.strip_suffix('\r').unwrap_or(raw);
        let fields = tokenize(n + 1, raw)?;
        if !fields.is_empty() {
            out.push(Line { number: n + 1, fields });
        }
    }
    Ok(out)
}

pub(crate) fn real(line: &Line, f: &Field) -> Result<f64> {
    f.value
        .parse::<f64>()
        .ok()
        .filter(|v| v.is_finite() && !f.quoted)
        .ok_or_else(|| line.err(f.value_col, format!("expected a number, found `{}`", f.value)))
}

pub(crate) fn probability(line: &Line, f: &Field) -> Result<f64> {
    let p = real(line, f)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(line.err(f.value_col, format!("probability {p} outside [0,1]")));
    }
    Ok(p)
}

pub(crate) fn pair(line: &Line, f: &Field, text: &str) -> Result<(f64, f64)> {
    let bad = || line.err(f.value_col, format!("expected two numbers `<x>,<y>`, found `{text}`"));
    let (x, y) = text.split_once(',').ok_or_else(bad)?;
    let x: f64 = x.parse().map_err(|_| bad())?;
    let y: f64 = y.parse().map_err(|_| bad())?;
    if !x.is_finite() || !y.is_finite() {
        return Err(bad());
    }
    Ok((x, y))
}

pub(crate) fn gaussian(line: &Line, f: &Field, text: &str) -> Result<Gaussian> {
    let (mu, sigma) = pair(line, f, text)?;
    Gaussian::new(mu, sigma).map_err(|e| line.err(f.value_col, e.to_string()))
}

pub(crate) fn prob_spec(line: &Line, f: &Field) -> Result<ProbSpec> {
    match f.value.strip_prefix("gauss:") {
        Some(rest) if !f.quoted => Ok(ProbSpec::Gaussian(gaussian(line, f, rest)?)),
        _ => Ok(ProbSpec::Point(probability(line, f)?)),
    }
}

pub(crate) fn boolean(line: &Line, f: &Field) -> Result<bool> {
    match f.value.as_str() {
        "true" => Ok(true),
        "false" => Ok(false),
        other => Err(line.err(f.value_col, format!("expected true or false, found `{other}`"))),
    }
}

pub(crate) fn integer(line: &Line, f: &Field) -> Result<u64> {
    f.value.parse().map_err(|_| line.err(f.value_col, format!("expected a count, found `{}`", f.value)))
}

pub(crate) fn param(line: &Line, f: &Field) -> Result<Param> {
    if f.quoted {
        return Ok(Param::Text(f.value.clone()));
    }
    if let Some(rest) = f.value.strip_prefix("gauss:") {
        return Ok(Param::Gauss(gaussian(line, f, rest)?));
    }
    if let Some(rest) = f.value.strip_prefix("interval:") {
        let (lo, hi) = pair(line, f, rest)?;
        if !(lo < hi) {
            return Err(line.err(f.value_col, "interval needs lo < hi"));
        }
        return Ok(Param::Interval { lo, hi });
    }
    match f.value.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Param::Real(v)),
        _ => Ok(Param::Text(f.value.clone())),
    }
}

/// Quotes text whenever it would otherwise read back differently.
pub(crate) fn text_token(s: &str) -> String {
    let plain = !s.is_empty()
        && !s.starts_with('#')
        && !s.starts_with("gauss:")
        && !s.starts_with("interval:")
        && s.parse::<f64>().is_err()
        && !s.chars().any(|c| c.is_whitespace() || c == '"' || c == '\\' || c == '=' || c == ',');
    if plain {
        return s.to_owned();
    }
    let mut out = String::from("\"");
    for c in s.chars() {
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

pub(crate) fn param_token(p: &Param) -> String {
    match p {
        Param::Real(v) => format!("{v}"),
        Param::Text(s) => text_token(s),
        Param::Gauss(g) => format!("gauss:{},{}", g.mu, g.sigma),
        Param::Interval { lo, hi } => format!("interval:{lo},{hi}"),
    }
}

pub(crate) fn spec_token(p: &ProbSpec) -> String {
    match p {
        ProbSpec::Point(v) => format!("{v}"),
        ProbSpec::Gaussian(g) => format!("gauss:{},{}", g.mu, g.sigma),
    }
}
