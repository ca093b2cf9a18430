use std::collections::{HashMap, HashSet};
use std::f64::consts::PI;

use super::{
    ComponentKind, Connection, Declaration, DriveDecl, DriveShape, ErrorKind, IoAlias, NetworkDescription, ParseError,
    PortRef, Span,
};
use crate::model::{Coupling, CouplingKind};

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Ident(String),
    Number(String),
    Sym(char),
    Arrow,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    col: usize,
}

fn describe(t: &Tok) -> String {
    match t {
        Tok::Ident(s) => format!("'{s}'"),
        Tok::Number(s) => format!("number {s}"),
        Tok::Sym(c) => format!("'{c}'"),
        Tok::Arrow => "'->'".into(),
    }
}

fn lex(line: &str, lineno: usize) -> Result<Vec<Token>, ParseError> {
    let chars: Vec<char> = line.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let ch = chars[i];
        let col = i + 1;
        if ch == '#' {
            break;
        }
        if ch.is_whitespace() {
            i += 1;
            continue;
        }
        if ch.is_ascii_alphabetic() || ch == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Token { tok: Tok::Ident(chars[start..i].iter().collect()), col });
            continue;
        }
        if ch.is_ascii_digit() || (ch == '.' && chars.get(i + 1).is_some_and(|c| c.is_ascii_digit())) {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    i = j;
                    while i < chars.len() && chars[i].is_ascii_digit() {
                        i += 1;
                    }
                }
            }
            out.push(Token { tok: Tok::Number(chars[start..i].iter().collect()), col });
            continue;
        }
        if ch == '-' && chars.get(i + 1) == Some(&'>') {
            out.push(Token { tok: Tok::Arrow, col });
            i += 2;
            continue;
        }
        if "(){}[],;=.-*/".contains(ch) {
            out.push(Token { tok: Tok::Sym(ch), col });
            i += 1;
            continue;
        }
        return Err(ParseError::new(ErrorKind::Syntax, lineno, col, format!("unexpected character {ch:?}")));
    }
    Ok(out)
}

struct Cursor<'a> {
    toks: &'a [Token],
    pos: usize,
    line: usize,
    /// Column just past the end of the line, for errors at end of input.
    eol: usize,
}

impl<'a> Cursor<'a> {
    fn peek(&self) -> Option<&'a Token> {
        self.toks.get(self.pos)
    }

    fn col(&self) -> usize {
        self.peek().map_or(self.eol, |t| t.col)
    }

    fn err(&self, kind: ErrorKind, col: usize, msg: impl Into<String>) -> ParseError {
        ParseError::new(kind, self.line, col, msg)
    }

    fn syntax(&self, expected: &str) -> ParseError {
        let found = self.peek().map_or("end of line".to_string(), |t| describe(&t.tok));
        self.err(ErrorKind::Syntax, self.col(), format!("expected {expected}, found {found}"))
    }

    fn next(&mut self) -> Option<&'a Token> {
        let t = self.toks.get(self.pos);
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn at_sym(&self, c: char) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Sym(s), .. }) if *s == c)
    }

    fn expect_sym(&mut self, c: char) -> Result<usize, ParseError> {
        if self.at_sym(c) {
            Ok(self.next().expect("peeked").col)
        } else {
            Err(self.syntax(&format!("'{c}'")))
        }
    }

    fn ident(&mut self, what: &str) -> Result<(String, usize), ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), col }) => {
                self.pos += 1;
                Ok((s.clone(), *col))
            }
            _ => Err(self.syntax(what)),
        }
    }

    fn keyword(&mut self, word: &str) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Ident(s), col }) if s == word => {
                self.pos += 1;
                Ok(*col)
            }
            _ => Err(self.syntax(&format!("'{word}'"))),
        }
    }

    fn end(&self) -> Result<(), ParseError> {
        match self.peek() {
            None => Ok(()),
            Some(_) => Err(self.syntax("end of line")),
        }
    }

    fn decimal(&mut self) -> Result<f64, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Number(s), col }) => {
                self.pos += 1;
                s.parse::<f64>()
                    .ok()
                    .filter(|v| v.is_finite())
                    .ok_or_else(|| self.err(ErrorKind::Syntax, *col, format!("malformed number '{s}'")))
            }
            _ => Err(self.syntax("a number")),
        }
    }

    fn at_pi(&self) -> bool {
        matches!(self.peek(), Some(Token { tok: Tok::Ident(s), .. }) if s == "pi")
    }

    /// `['-'] (decimal | [decimal ['*']] 'pi' ['/' decimal])`; returns the
    /// value and the column of its first token.
    fn number(&mut self) -> Result<(f64, usize), ParseError> {
        let col = self.col();
        let sign = if self.at_sym('-') {
            self.pos += 1;
            -1.0
        } else {
            1.0
        };
        let mut value = if self.at_pi() { 1.0 } else { self.decimal()? };
        let mut scaled = false;
        if self.at_sym('*') {
            self.pos += 1;
            if !self.at_pi() {
                return Err(self.syntax("'pi'"));
            }
        }
        if self.at_pi() {
            self.pos += 1;
            value *= PI;
            scaled = true;
        }
        if scaled && self.at_sym('/') {
            self.pos += 1;
            let dcol = self.col();
            let d = self.decimal()?;
            if d == 0.0 {
                return Err(self.err(ErrorKind::BadParameter, dcol, "division by zero"));
            }
            value /= d;
        }
        if !value.is_finite() {
            return Err(self.err(ErrorKind::BadParameter, col, "value is not finite"));
        }
        Ok((sign * value, col))
    }

    fn index(&mut self) -> Result<usize, ParseError> {
        match self.peek() {
            Some(Token { tok: Tok::Number(s), col }) => {
                self.pos += 1;
                if !s.bytes().all(|b| b.is_ascii_digit()) {
                    return Err(self.err(ErrorKind::Syntax, *col, format!("channel index must be an integer, got '{s}'")));
                }
                s.parse::<usize>()
                    .map_err(|_| self.err(ErrorKind::BadParameter, *col, format!("channel index '{s}' is too large")))
            }
            _ => Err(self.syntax("a channel index")),
        }
    }

    /// `'(' name '=' number {',' name '=' number} ')'`, names checked
    /// against `allowed`.
    fn params(&mut self, allowed: &[&str]) -> Result<Vec<(String, f64, usize)>, ParseError> {
        self.expect_sym('(')?;
        let mut out: Vec<(String, f64, usize)> = Vec::new();
        if self.at_sym(')') {
            self.pos += 1;
            return Ok(out);
        }
        loop {
            let (name, col) = self.ident("a parameter name")?;
            if !allowed.contains(&name.as_str()) {
                return Err(self.err(
                    ErrorKind::BadParameter,
                    col,
                    format!("unknown parameter '{name}' (expected one of {})", allowed.join(", ")),
                ));
            }
            if out.iter().any(|p| p.0 == name) {
                return Err(self.err(ErrorKind::BadParameter, col, format!("parameter '{name}' given twice")));
            }
            self.expect_sym('=')?;
            let (v, vcol) = self.number()?;
            out.push((name, v, vcol));
            if self.at_sym(',') {
                self.pos += 1;
                continue;
            }
            self.expect_sym(')')?;
            return Ok(out);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dir {
    In,
    Out,
}

struct State {
    desc: NetworkDescription,
    /// name → number of channels
    components: HashMap<String, usize>,
    used_in: HashSet<(String, usize)>,
    used_out: HashSet<(String, usize)>,
}

impl State {
    /// `NAME '.' ('in'|'out') '[' index ']'` checked against declarations.
    fn port(&self, cur: &mut Cursor, want: Dir) -> Result<PortRef, ParseError> {
        let (block, col) = cur.ident("a port such as name.out[0]")?;
        let channels = *self
            .components
            .get(&block)
            .ok_or_else(|| cur.err(ErrorKind::UnknownComponent, col, format!("unknown component '{block}'")))?;
        cur.expect_sym('.')?;
        let (dir, dcol) = cur.ident("'in' or 'out'")?;
        let dir = match dir.as_str() {
            "in" => Dir::In,
            "out" => Dir::Out,
            _ => return Err(cur.err(ErrorKind::Syntax, dcol, format!("expected 'in' or 'out', found '{dir}'"))),
        };
        if dir != want {
            let w = if want == Dir::In { "an input" } else { "an output" };
            return Err(cur.err(ErrorKind::Syntax, dcol, format!("expected {w} port")));
        }
        cur.expect_sym('[')?;
        let icol = cur.col();
        let channel = cur.index()?;
        cur.expect_sym(']')?;
        if channel >= channels {
            return Err(cur.err(
                ErrorKind::UnknownComponent,
                icol,
                format!("'{block}' has {channels} channel(s), no index {channel}"),
            ));
        }
        Ok(PortRef { block, channel })
    }

    fn claim(&mut self, cur: &Cursor, port: &PortRef, dir: Dir, col: usize) -> Result<(), ParseError> {
        let key = (port.block.clone(), port.channel);
        let set = if dir == Dir::In { &mut self.used_in } else { &mut self.used_out };
        if !set.insert(key) {
            let d = if dir == Dir::In { "in" } else { "out" };
            return Err(cur.err(
                ErrorKind::DuplicateConnection,
                col,
                format!("port {}.{d}[{}] is already in use", port.block, port.channel),
            ));
        }
        Ok(())
    }

    fn declare(&mut self, cur: &Cursor, name: &str, col: usize, channels: usize) -> Result<(), ParseError> {
        if self.components.contains_key(name) {
            return Err(cur.err(ErrorKind::BadParameter, col, format!("component '{name}' is declared twice")));
        }
        self.components.insert(name.to_string(), channels);
        Ok(())
    }

    fn statement(&mut self, cur: &mut Cursor) -> Result<(), ParseError> {
        let (kw, kcol) = cur.ident("a keyword")?;
        let span = Span { line: cur.line, column: kcol };
        match kw.as_str() {
            "mode" => self.mode(cur, span),
            "bs" => {
                let (name, col) = cur.ident("a component name")?;
                let theta = if cur.at_sym('(') {
                    let ps = cur.params(&["theta"])?;
                    ps.first().map_or(PI / 4.0, |p| p.1)
                } else {
                    PI / 4.0
                };
                cur.end()?;
                self.declare(cur, &name, col, 2)?;
                self.desc.declarations.push(Declaration { name, kind: ComponentKind::BeamSplitter { theta }, span });
                Ok(())
            }
            "connect" => {
                let fcol = cur.col();
                let from = self.port(cur, Dir::Out)?;
                if !matches!(cur.peek(), Some(Token { tok: Tok::Arrow, .. })) {
                    return Err(cur.syntax("'->'"));
                }
                cur.pos += 1;
                let tcol = cur.col();
                let to = self.port(cur, Dir::In)?;
                cur.end()?;
                self.claim(cur, &from, Dir::Out, fcol)?;
                self.claim(cur, &to, Dir::In, tcol)?;
                self.desc.connections.push(Connection { from, to, span });
                Ok(())
            }
            "input" | "output" => {
                let dir = if kw == "input" { Dir::In } else { Dir::Out };
                let (alias, acol) = cur.ident("an alias")?;
                cur.expect_sym('=')?;
                let pcol = cur.col();
                let port = self.port(cur, dir)?;
                cur.end()?;
                let list = if dir == Dir::In { &self.desc.inputs } else { &self.desc.outputs };
                if list.iter().any(|a| a.name == alias) {
                    return Err(cur.err(ErrorKind::BadParameter, acol, format!("alias '{alias}' is declared twice")));
                }
                self.claim(cur, &port, dir, pcol)?;
                let entry = IoAlias { name: alias, port, span };
                if dir == Dir::In {
                    self.desc.inputs.push(entry);
                } else {
                    self.desc.outputs.push(entry);
                }
                Ok(())
            }
            "drive" => self.drive(cur, span),
            other => Err(cur.err(ErrorKind::Syntax, kcol, format!("unknown keyword '{other}'"))),
        }
    }

    fn mode(&mut self, cur: &mut Cursor, span: Span) -> Result<(), ParseError> {
        let (name, col) = cur.ident("a component name")?;
        let omega = if cur.at_sym('(') {
            let ps = cur.params(&["omega"])?;
            ps.first().map_or(0.0, |p| p.1)
        } else {
            0.0
        };
        cur.expect_sym('{')?;
        let mut couplings = Vec::new();
        while !cur.at_sym('}') {
            cur.keyword("couple")?;
            let (kind, kcol) = cur.ident("'annihilation' or 'creation'")?;
            let kind = match kind.as_str() {
                "annihilation" => CouplingKind::Annihilation,
                "creation" => CouplingKind::Creation,
                _ => {
                    return Err(cur.err(
                        ErrorKind::BadParameter,
                        kcol,
                        format!("unknown coupling kind '{kind}' (expected annihilation or creation)"),
                    ))
                }
            };
            let (rate, rcol) = cur.number()?;
            if rate < 0.0 {
                return Err(cur.err(ErrorKind::BadParameter, rcol, format!("coupling rate must be non-negative, got {rate}")));
            }
            couplings.push(Coupling { kind, rate });
            if cur.at_sym(';') {
                cur.pos += 1;
            } else if !cur.at_sym('}') {
                return Err(cur.syntax("';' or '}'"));
            }
        }
        cur.expect_sym('}')?;
        cur.end()?;
        self.declare(cur, &name, col, couplings.len())?;
        self.desc.declarations.push(Declaration { name, kind: ComponentKind::Mode { omega, couplings }, span });
        Ok(())
    }

    fn drive(&mut self, cur: &mut Cursor, span: Span) -> Result<(), ParseError> {
        let tcol = cur.col();
        let is_port = matches!(cur.toks.get(cur.pos + 1), Some(Token { tok: Tok::Sym('.'), .. }));
        let target = if is_port {
            let p = self.port(cur, Dir::In)?;
            let label = format!("{}.in[{}]", p.block, p.channel);
            if self.used_in.contains(&(p.block.clone(), p.channel)) && !self.desc.inputs.iter().any(|a| a.port == p) {
                return Err(cur.err(ErrorKind::DanglingPort, tcol, format!("{label} is connected internally")));
            }
            label
        } else {
            let (alias, acol) = cur.ident("an input alias or port")?;
            if !self.desc.inputs.iter().any(|a| a.name == alias) {
                return Err(cur.err(ErrorKind::UnknownComponent, acol, format!("unknown input '{alias}'")));
            }
            alias
        };
        let (shape, scol) = cur.ident("a drive shape (const, sin, pulse)")?;
        let need: &[&str] = match shape.as_str() {
            "const" => &["amp"],
            "sin" => &["amp", "freq"],
            "pulse" => &["amp", "start", "stop"],
            _ => return Err(cur.err(ErrorKind::BadParameter, scol, format!("unknown drive shape '{shape}'"))),
        };
        let ps = cur.params(need)?;
        cur.end()?;
        let get = |k: &str| ps.iter().find(|p| p.0 == k).map(|p| p.1);
        if let Some(missing) = need.iter().find(|k| get(k).is_none()) {
            return Err(cur.err(ErrorKind::BadParameter, scol, format!("{shape} needs parameter '{missing}'")));
        }
        let v = |k: &str| get(k).expect("checked above");
        let shape = match shape.as_str() {
            "const" => DriveShape::Constant { amp: v("amp") },
            "sin" => DriveShape::Sinusoid { amp: v("amp"), freq: v("freq") },
            _ => {
                let (start, stop) = (v("start"), v("stop"));
                if !(start >= 0.0 && start < stop) {
                    return Err(cur.err(ErrorKind::BadParameter, scol, "pulse needs 0 <= start < stop"));
                }
                DriveShape::Pulse { amp: v("amp"), start, stop }
            }
        };
        self.desc.drives.push(DriveDecl { target, shape, span });
        Ok(())
    }
}

pub(super) fn parse(text: &str) -> Result<NetworkDescription, ParseError> {
    let mut st = State {
        desc: NetworkDescription::default(),
        components: HashMap::new(),
        used_in: HashSet::new(),
        used_out: HashSet::new(),
    };
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let toks = lex(raw, line)?;
        if toks.is_empty() {
            continue;
        }
        let mut cur = Cursor { toks: &toks, pos: 0, line, eol: raw.chars().count() + 1 };
        st.statement(&mut cur)?;
    }
    Ok(st.desc)
}
