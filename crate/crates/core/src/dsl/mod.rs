//! The `.qnet` block-diagram language.
//!
//! ```text
//! # one-way cascade
//! mode plant(omega=1){couple annihilation 0.5}
//! mode observer(omega=1){couple annihilation 0.5}
//! connect plant.out[0] -> observer.in[0]
//! ```
//!
//! See `docs/DSL.md` for the grammar. [`parse`] checks names, channel
//! indices and port usage; [`compile`] wires and reduces the network.

mod parser;

use std::f64::consts::PI;
use std::fmt;

use crate::dynamics::{Drive, DriveProfile};
use crate::error::Result;
use crate::linalg::re;
use crate::model::{derive_state_space, make_mode, Coupling, CouplingKind, StateSpace};
use crate::network::{Block, ComposedNetwork, StaticComponent};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Syntax,
    UnknownComponent,
    BadParameter,
    DanglingPort,
    DuplicateConnection,
}

impl ErrorKind {
    pub fn name(self) -> &'static str {
        match self {
            ErrorKind::Syntax => "syntax",
            ErrorKind::UnknownComponent => "unknown-component",
            ErrorKind::BadParameter => "bad-parameter",
            ErrorKind::DanglingPort => "dangling-port",
            ErrorKind::DuplicateConnection => "duplicate-connection",
        }
    }
}

/// Positions are 1-based; columns count characters.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ParseError {
    pub line: usize,
    pub column: usize,
    pub kind: ErrorKind,
    pub message: String,
}

impl ParseError {
    pub fn new(kind: ErrorKind, line: usize, column: usize, message: impl Into<String>) -> Self {
        Self { line, column, kind, message: message.into() }
    }
}

impl fmt::Display for ParseError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}: {}: {}", self.line, self.column, self.kind.name(), self.message)
    }
}

impl std::error::Error for ParseError {}

/// Source position of a statement. Positions are not part of a description's
/// identity: any two spans compare equal.
#[derive(Debug, Clone, Copy, Default, Eq)]
pub struct Span {
    pub line: usize,
    pub column: usize,
}

impl PartialEq for Span {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ComponentKind {
    Mode { omega: f64, couplings: Vec<Coupling> },
    BeamSplitter { theta: f64 },
}

impl ComponentKind {
    pub fn num_channels(&self) -> usize {
        match self {
            ComponentKind::Mode { couplings, .. } => couplings.len(),
            ComponentKind::BeamSplitter { .. } => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Declaration {
    pub name: String,
    pub kind: ComponentKind,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PortRef {
    pub block: String,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Connection {
    pub from: PortRef,
    pub to: PortRef,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IoAlias {
    pub name: String,
    pub port: PortRef,
    pub span: Span,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DriveShape {
    Constant { amp: f64 },
    Sinusoid { amp: f64, freq: f64 },
    Pulse { amp: f64, start: f64, stop: f64 },
}

impl DriveShape {
    pub fn profile(self) -> DriveProfile {
        match self {
            DriveShape::Constant { amp } => DriveProfile::Constant { amplitude: re(amp) },
            DriveShape::Sinusoid { amp, freq } => DriveProfile::Sinusoid { amplitude: re(amp), frequency: freq },
            DriveShape::Pulse { amp, start, stop } => DriveProfile::Pulse { amplitude: re(amp), start, stop },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DriveDecl {
    /// Input alias, or a port label `name.in[k]`.
    pub target: String,
    pub shape: DriveShape,
    pub span: Span,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NetworkDescription {
    pub declarations: Vec<Declaration>,
    pub connections: Vec<Connection>,
    pub inputs: Vec<IoAlias>,
    pub outputs: Vec<IoAlias>,
    pub drives: Vec<DriveDecl>,
}

pub fn parse(text: &str) -> std::result::Result<NetworkDescription, ParseError> {
    parser::parse(text)
}

/// Like [`parse`], for raw bytes; invalid UTF-8 is a syntax error at the
/// first offending byte.
pub fn parse_bytes(bytes: &[u8]) -> std::result::Result<NetworkDescription, ParseError> {
    match std::str::from_utf8(bytes) {
        Ok(text) => parse(text),
        Err(e) => {
            let valid = std::str::from_utf8(&bytes[..e.valid_up_to()]).expect("valid prefix");
            let line = valid.matches('\n').count() + 1;
            let column = valid.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
            Err(ParseError::new(ErrorKind::Syntax, line, column, "invalid UTF-8"))
        }
    }
}

fn fmt_port(f: &mut fmt::Formatter<'_>, p: &PortRef, dir: &str) -> fmt::Result {
    write!(f, "{}.{dir}[{}]", p.block, p.channel)
}

/// Canonical text form; parsing it yields an equal description.
impl fmt::Display for NetworkDescription {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for d in &self.declarations {
            match &d.kind {
                ComponentKind::Mode { omega, couplings } => {
                    write!(f, "mode {}(omega={omega}){{", d.name)?;
                    for (k, c) in couplings.iter().enumerate() {
                        let kind = match c.kind {
                            CouplingKind::Annihilation => "annihilation",
                            CouplingKind::Creation => "creation",
                        };
                        let sep = if k == 0 { "" } else { "; " };
                        write!(f, "{sep}couple {kind} {}", c.rate)?;
                    }
                    writeln!(f, "}}")?;
                }
                ComponentKind::BeamSplitter { theta } if *theta == PI / 4.0 => writeln!(f, "bs {}", d.name)?,
                ComponentKind::BeamSplitter { theta } => writeln!(f, "bs {}(theta={theta})", d.name)?,
            }
        }
        for c in &self.connections {
            write!(f, "connect ")?;
            fmt_port(f, &c.from, "out")?;
            write!(f, " -> ")?;
            fmt_port(f, &c.to, "in")?;
            writeln!(f)?;
        }
        for (kw, list, dir) in [("input", &self.inputs, "in"), ("output", &self.outputs, "out")] {
            for a in list {
                write!(f, "{kw} {} = ", a.name)?;
                fmt_port(f, &a.port, dir)?;
                writeln!(f)?;
            }
        }
        for d in &self.drives {
            match d.shape {
                DriveShape::Constant { amp } => writeln!(f, "drive {} const(amp={amp})", d.target)?,
                DriveShape::Sinusoid { amp, freq } => writeln!(f, "drive {} sin(amp={amp}, freq={freq})", d.target)?,
                DriveShape::Pulse { amp, start, stop } => {
                    writeln!(f, "drive {} pulse(amp={amp}, start={start}, stop={stop})", d.target)?
                }
            }
        }
        Ok(())
    }
}

/// A wired network with its external channels named.
#[derive(Debug, Clone)]
pub struct CompiledNetwork {
    pub network: ComposedNetwork,
    /// One name per external input, in channel order.
    pub input_names: Vec<String>,
    pub output_names: Vec<String>,
    pub drives: Vec<Drive>,
}

impl CompiledNetwork {
    pub fn input_index(&self, name: &str) -> Option<usize> {
        self.input_names.iter().position(|n| n == name)
    }

    pub fn output_index(&self, name: &str) -> Option<usize> {
        self.output_names.iter().position(|n| n == name)
    }
}

/// Declared aliases must cover every free port of their direction; returns
/// the port labels in declaration order, or `None` when nothing is declared.
fn io_order(
    aliases: &[IoAlias],
    free: &[String],
    dir: &str,
) -> std::result::Result<Option<Vec<String>>, ParseError> {
    if aliases.is_empty() {
        return Ok(None);
    }
    let labels: Vec<String> = aliases.iter().map(|a| format!("{}.{dir}[{}]", a.port.block, a.port.channel)).collect();
    if let Some(missing) = free.iter().find(|p| !labels.contains(p)) {
        let at = aliases.last().expect("non-empty").span;
        return Err(ParseError::new(
            ErrorKind::DanglingPort,
            at.line,
            at.column,
            format!("{missing} is neither connected nor declared"),
        ));
    }
    Ok(Some(labels))
}

pub fn build_network(desc: &NetworkDescription) -> Result<CompiledNetwork> {
    let mut blocks = Vec::with_capacity(desc.declarations.len());
    for d in &desc.declarations {
        blocks.push(match &d.kind {
            ComponentKind::Mode { omega, couplings } => {
                Block::dynamic(d.name.clone(), derive_state_space(&make_mode(*omega, couplings)?))
            }
            ComponentKind::BeamSplitter { theta } => Block::fixed(d.name.clone(), StaticComponent::beamsplitter(*theta)),
        });
    }
    let mut net = ComposedNetwork::concatenate(blocks)?;
    for c in &desc.connections {
        net = net.connect(
            &format!("{}.out[{}]", c.from.block, c.from.channel),
            &format!("{}.in[{}]", c.to.block, c.to.channel),
        )?;
    }

    let ins = io_order(&desc.inputs, &net.input_labels(), "in")?;
    let outs = io_order(&desc.outputs, &net.output_labels(), "out")?;
    if ins.is_some() || outs.is_some() {
        let il = ins.clone().unwrap_or_else(|| net.input_labels());
        let ol = outs.clone().unwrap_or_else(|| net.output_labels());
        let ir: Vec<&str> = il.iter().map(String::as_str).collect();
        let or: Vec<&str> = ol.iter().map(String::as_str).collect();
        net = net.with_external_order(&ir, &or)?;
    }
    let input_names = match ins {
        Some(_) => desc.inputs.iter().map(|a| a.name.clone()).collect(),
        None => net.input_labels(),
    };
    let output_names = match outs {
        Some(_) => desc.outputs.iter().map(|a| a.name.clone()).collect(),
        None => net.output_labels(),
    };

    let mut drives = Vec::with_capacity(desc.drives.len());
    for d in &desc.drives {
        let channel = input_names
            .iter()
            .position(|n| *n == d.target)
            .or_else(|| net.input_index(&d.target))
            .ok_or_else(|| {
                ParseError::new(
                    ErrorKind::DanglingPort,
                    d.span.line,
                    d.span.column,
                    format!("drive target {} is not an external input", d.target),
                )
            })?;
        drives.push(Drive::new(channel, d.shape.profile()));
    }
    Ok(CompiledNetwork { network: net, input_names, output_names, drives })
}

/// Wire and reduce the described network.
pub fn compile(desc: &NetworkDescription) -> Result<StateSpace> {
    build_network(desc)?.network.reduce()
}

pub fn compile_str(text: &str) -> Result<StateSpace> {
    compile(&parse(text)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::linalg::{c, max_abs};

    fn err(text: &str) -> ParseError {
        parse(text).expect_err("should fail")
    }

    #[test]
    fn minimal_program() {
        let d = parse("mode plant(omega=1.0){couple annihilation 0.5}\nbs J1\nconnect J1.out[0] -> plant.in[0]").unwrap();
        assert_eq!(d.declarations.len(), 2);
        assert_eq!(d.connections.len(), 1);
        assert_eq!(d.declarations[1].kind, ComponentKind::BeamSplitter { theta: PI / 4.0 });
    }

    #[test]
    fn negative_rate_flagged_at_token() {
        let e = err("mode p(omega=1.0){couple annihilation -1}");
        assert_eq!(e.kind, ErrorKind::BadParameter);
        assert_eq!((e.line, e.column), (1, 39));
    }

    #[test]
    fn unknown_component_position() {
        let e = err("# header\n\n  connect ghost.out[0] -> plant.in[0]");
        assert_eq!(e.kind, ErrorKind::UnknownComponent);
        assert_eq!((e.line, e.column), (3, 11));
        assert!(e.message.contains("ghost"));
    }

    #[test]
    fn duplicate_connection() {
        let src = "mode a{couple annihilation 1}\nmode b{couple annihilation 1}\nconnect a.out[0] -> b.in[0]\nconnect a.out[0] -> a.in[0]";
        let e = err(src);
        assert_eq!(e.kind, ErrorKind::DuplicateConnection);
        assert_eq!((e.line, e.column), (4, 9));
    }

    #[test]
    fn channel_out_of_range() {
        let e = err("mode a{couple annihilation 1}\nconnect a.out[1] -> a.in[0]");
        assert_eq!(e.kind, ErrorKind::UnknownComponent);
        assert_eq!(e.column, 15);
    }

    #[test]
    fn syntax_errors() {
        assert_eq!(err("modes a{}").kind, ErrorKind::Syntax);
        assert_eq!(err("bs J1 J2").kind, ErrorKind::Syntax);
        assert_eq!(err("mode a{couple annihilation 1").kind, ErrorKind::Syntax);
        assert_eq!(err("bs J$").kind, ErrorKind::Syntax);
        assert_eq!(err("bs J(theta=1.2.3)").kind, ErrorKind::Syntax);
        assert_eq!(err("mode a{couple sideways 1}").kind, ErrorKind::BadParameter);
        assert_eq!(err("bs J(phi=1)").kind, ErrorKind::BadParameter);
        assert_eq!(err("bs J\nbs J").kind, ErrorKind::BadParameter);
    }

    #[test]
    fn pi_scaled_literals() {
        for (src, want) in [("pi", PI), ("pi/4", PI / 4.0), ("3*pi/4", 0.75 * PI), ("-pi/2", -PI / 2.0), ("2pi", 2.0 * PI)] {
            let d = parse(&format!("bs J(theta={src})")).unwrap();
            match d.declarations[0].kind {
                ComponentKind::BeamSplitter { theta } => assert!((theta - want).abs() < 1e-15, "{src}"),
                _ => unreachable!(),
            }
        }
        assert_eq!(err("bs J(theta=pi/0)").kind, ErrorKind::BadParameter);
    }

    #[test]
    fn round_trip() {
        let src = "mode p(omega=1){couple annihilation 0.5; couple creation 2}\nbs J1\nbs J2(theta=0.3)\n\
                   connect J1.out[0] -> p.in[0]\ninput u = J1.in[0]\ninput v = J1.in[1]\ninput w = p.in[1]\n\
                   output y = J1.out[1]\ndrive u sin(amp=1, freq=2)\ndrive w pulse(amp=0.5, start=0, stop=1)";
        let d = parse(src).unwrap();
        let printed = d.to_string();
        assert_eq!(parse(&printed).unwrap(), d);
    }

    #[test]
    fn invalid_utf8_is_syntax_error() {
        let e = parse_bytes(b"bs J1\nbs \xff").unwrap_err();
        assert_eq!((e.kind, e.line, e.column), (ErrorKind::Syntax, 2, 4));
    }

    #[test]
    fn compile_cascade() {
        let ss = compile_str(
            "mode plant(omega=1){couple annihilation 0.5}\nmode obs(omega=1){couple annihilation 0.5}\nconnect plant.out[0] -> obs.in[0]",
        )
        .unwrap();
        let want = crate::linalg::CMatrix::from_row_slice(2, 2, &[c(-0.25, -1.0), c(0.0, 0.0), c(-0.5, 0.0), c(-0.25, -1.0)]);
        assert!(max_abs(&(&ss.a_minus - want)) < 1e-15);
    }

    #[test]
    fn declared_io_must_cover_free_ports() {
        let src = "bs J\ninput a = J.in[0]";
        match compile_str(src) {
            Err(Error::Parse(e)) => assert_eq!(e.kind, ErrorKind::DanglingPort),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn io_order_and_drive_channel() {
        let src = "bs J\ninput b = J.in[1]\ninput a = J.in[0]\ndrive a const(amp=1)";
        let net = build_network(&parse(src).unwrap()).unwrap();
        assert_eq!(net.input_names, vec!["b", "a"]);
        assert_eq!(net.drives[0].channel, 1);
        let ss = net.network.reduce().unwrap();
        // swapped input columns of the 50-50 matrix
        let h = std::f64::consts::FRAC_1_SQRT_2;
        assert!((ss.d[(1, 0)] - c(-h, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn singular_loop_propagates() {
        let src = "bs J(theta=0)\nconnect J.out[0] -> J.in[0]";
        assert!(matches!(compile_str(src), Err(Error::SingularLoop { .. })));
    }
}
