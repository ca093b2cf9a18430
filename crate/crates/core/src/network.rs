//! Composition of linear blocks and static scatterers into a single network
//! model.
//!
//! Blocks are concatenated as a direct sum; each connection then feeds one
//! output channel into one input channel. [`ComposedNetwork::reduce`]
//! eliminates the internal channels in one linear solve on the doubled form
//! and returns the model seen from the remaining external ports.

use std::fmt;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{max_abs, rcond, re, CMatrix};
use crate::model::{DoubledForm, StateSpace, DEFAULT_TOLERANCE};

/// Reciprocal condition number below which an algebraic loop is rejected.
pub const LOOP_RCOND_THRESHOLD: f64 = 1e-12;

/// A memoryless scatterer `b_out = S b_in`.
#[derive(Debug, Clone, PartialEq)]
pub struct StaticComponent {
    s: CMatrix,
}

impl StaticComponent {
    pub fn new(s: CMatrix) -> Result<Self> {
        let k = s.nrows();
        if s.ncols() != k {
            return Err(Error::InvalidSpec(format!("scattering matrix must be square, got {:?}", s.shape())));
        }
        let dev = max_abs(&(&s * s.adjoint() - CMatrix::identity(k, k)));
        if dev > DEFAULT_TOLERANCE {
            return Err(Error::InvalidSpec(format!("scattering matrix is not unitary (deviation {dev:.3e})")));
        }
        Ok(Self { s })
    }

    /// Real beam splitter with mixing angle `theta`:
    /// `S = [[cos θ, sin θ], [sin θ, −cos θ]]`.
    pub fn beamsplitter(theta: f64) -> Self {
        let (s, c) = theta.sin_cos();
        Self { s: CMatrix::from_row_slice(2, 2, &[re(c), re(s), re(s), re(-c)]) }
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.s
    }

    pub fn num_ports(&self) -> usize {
        self.s.nrows()
    }

    /// Scatter a vector of input means.
    pub fn apply(&self, inputs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(inputs.len(), self.num_ports());
        (0..self.num_ports())
            .map(|i| (0..self.num_ports()).map(|j| self.s[(i, j)] * inputs[j]).sum())
            .collect()
    }

    pub fn as_state_space(&self) -> StateSpace {
        StateSpace::static_scatter(self.s.clone()).expect("validated unitary")
    }
}

/// The 50-50 junction `S = (1/√2)[[1, 1], [1, −1]]`, i.e. mixing angle π/4.
pub fn beamsplitter_5050() -> StaticComponent {
    let h = re(std::f64::consts::FRAC_1_SQRT_2);
    StaticComponent { s: CMatrix::from_row_slice(2, 2, &[h, h, h, -h]) }
}

#[derive(Debug, Clone, PartialEq)]
pub enum BlockKind {
    Dynamic(Box<StateSpace>),
    Static(StaticComponent),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Block {
    pub name: String,
    pub kind: BlockKind,
}

impl Block {
    pub fn dynamic(name: impl Into<String>, ss: StateSpace) -> Self {
        Self { name: name.into(), kind: BlockKind::Dynamic(Box::new(ss)) }
    }

    pub fn fixed(name: impl Into<String>, comp: StaticComponent) -> Self {
        Self { name: name.into(), kind: BlockKind::Static(comp) }
    }

    fn state_space(&self) -> StateSpace {
        match &self.kind {
            BlockKind::Dynamic(ss) => (**ss).clone(),
            BlockKind::Static(c) => c.as_state_space(),
        }
    }

    pub fn num_channels(&self) -> usize {
        match &self.kind {
            BlockKind::Dynamic(ss) => ss.num_channels(),
            BlockKind::Static(c) => c.num_ports(),
        }
    }

    pub fn num_modes(&self) -> usize {
        match &self.kind {
            BlockKind::Dynamic(ss) => ss.num_modes(),
            BlockKind::Static(_) => 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Direction {
    In,
    Out,
}

/// A channel of a block, addressed by block position and channel index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Port {
    pub block: usize,
    pub channel: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkWarning {
    NoExternalInputs,
    NoExternalOutputs,
}

impl fmt::Display for NetworkWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            NetworkWarning::NoExternalInputs => write!(f, "dangling port: network has no external inputs"),
            NetworkWarning::NoExternalOutputs => write!(f, "dangling port: network has no external outputs"),
        }
    }
}

/// Split `"name.in[k]"` / `"name.out[k]"` into its parts.
pub fn parse_port_label(label: &str) -> Option<(&str, Direction, usize)> {
    let (name, rest) = label.rsplit_once('.')?;
    let (dir, idx) = match rest.strip_prefix("in[") {
        Some(r) => (Direction::In, r),
        None => (Direction::Out, rest.strip_prefix("out[")?),
    };
    let idx = idx.strip_suffix(']')?.parse().ok()?;
    if name.is_empty() {
        return None;
    }
    Some((name, dir, idx))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ComposedNetwork {
    blocks: Vec<Block>,
    channel_offsets: Vec<usize>,
    mode_offsets: Vec<usize>,
    edges: Vec<(Port, Port)>,
    external_inputs: Vec<Port>,
    external_outputs: Vec<Port>,
}

impl ComposedNetwork {
    /// Direct sum of `blocks`; every port starts out external, in declaration
    /// order.
    pub fn concatenate(blocks: Vec<Block>) -> Result<Self> {
        if blocks.is_empty() {
            return Err(Error::InvalidSpec("cannot concatenate an empty block list".into()));
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.name.is_empty() || b.name.contains(['.', '[', ']', ' ']) {
                return Err(Error::InvalidSpec(format!("invalid block name {:?}", b.name)));
            }
            if blocks[..i].iter().any(|o| o.name == b.name) {
                return Err(Error::InvalidSpec(format!("duplicate block name {:?}", b.name)));
            }
        }
        let mut channel_offsets = Vec::with_capacity(blocks.len());
        let mut mode_offsets = Vec::with_capacity(blocks.len());
        let (mut ch, mut md) = (0, 0);
        let mut ports = Vec::new();
        for (i, b) in blocks.iter().enumerate() {
            channel_offsets.push(ch);
            mode_offsets.push(md);
            ch += b.num_channels();
            md += b.num_modes();
            ports.extend((0..b.num_channels()).map(|k| Port { block: i, channel: k }));
        }
        Ok(Self {
            blocks,
            channel_offsets,
            mode_offsets,
            edges: Vec::new(),
            external_inputs: ports.clone(),
            external_outputs: ports,
        })
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn edges(&self) -> &[(Port, Port)] {
        &self.edges
    }

    pub fn external_inputs(&self) -> &[Port] {
        &self.external_inputs
    }

    pub fn external_outputs(&self) -> &[Port] {
        &self.external_outputs
    }

    pub fn num_modes(&self) -> usize {
        self.blocks.iter().map(Block::num_modes).sum()
    }

    pub fn block_index(&self, name: &str) -> Option<usize> {
        self.blocks.iter().position(|b| b.name == name)
    }

    /// Index of the first mode of block `name` in the reduced state vector.
    pub fn mode_offset(&self, name: &str) -> Option<usize> {
        self.block_index(name).map(|i| self.mode_offsets[i])
    }

    pub fn port_label(&self, port: Port, dir: Direction) -> String {
        let d = match dir {
            Direction::In => "in",
            Direction::Out => "out",
        };
        format!("{}.{}[{}]", self.blocks[port.block].name, d, port.channel)
    }

    pub fn input_labels(&self) -> Vec<String> {
        self.external_inputs.iter().map(|p| self.port_label(*p, Direction::In)).collect()
    }

    pub fn output_labels(&self) -> Vec<String> {
        self.external_outputs.iter().map(|p| self.port_label(*p, Direction::Out)).collect()
    }

    /// Position of an external input in the reduced model's input vector.
    pub fn input_index(&self, label: &str) -> Option<usize> {
        let port = self.lookup(label, Direction::In).ok()?;
        self.external_inputs.iter().position(|p| *p == port)
    }

    pub fn output_index(&self, label: &str) -> Option<usize> {
        let port = self.lookup(label, Direction::Out).ok()?;
        self.external_outputs.iter().position(|p| *p == port)
    }

    fn lookup(&self, label: &str, want: Direction) -> Result<Port> {
        let (name, dir, idx) =
            parse_port_label(label).ok_or_else(|| Error::PortNotFound(format!("malformed port label {label:?}")))?;
        if dir != want {
            let kind = if want == Direction::In { "an input" } else { "an output" };
            return Err(Error::PortNotFound(format!("{label} is not {kind} port")));
        }
        let block = self.block_index(name).ok_or_else(|| Error::PortNotFound(format!("no block named {name:?}")))?;
        if idx >= self.blocks[block].num_channels() {
            return Err(Error::PortNotFound(format!(
                "{label}: block {name} has {} channels",
                self.blocks[block].num_channels()
            )));
        }
        Ok(Port { block, channel: idx })
    }

    /// Route output `out_port` into input `in_port`.
    pub fn connect(&self, out_port: &str, in_port: &str) -> Result<ComposedNetwork> {
        let src = self.lookup(out_port, Direction::Out)?;
        let dst = self.lookup(in_port, Direction::In)?;
        let oi = self
            .external_outputs
            .iter()
            .position(|p| *p == src)
            .ok_or_else(|| Error::PortAlreadyUsed(out_port.to_string()))?;
        let ii = self
            .external_inputs
            .iter()
            .position(|p| *p == dst)
            .ok_or_else(|| Error::PortAlreadyUsed(in_port.to_string()))?;
        let mut next = self.clone();
        next.external_outputs.remove(oi);
        next.external_inputs.remove(ii);
        next.edges.push((src, dst));
        Ok(next)
    }

    /// Reorder the external ports. Both lists must be permutations of the
    /// current external ports.
    pub fn with_external_order(&self, inputs: &[&str], outputs: &[&str]) -> Result<ComposedNetwork> {
        fn reorder(
            net: &ComposedNetwork,
            labels: &[&str],
            current: &[Port],
            dir: Direction,
        ) -> Result<Vec<Port>> {
            let mut out = Vec::with_capacity(labels.len());
            for l in labels {
                let p = net.lookup(l, dir)?;
                if !current.contains(&p) || out.contains(&p) {
                    return Err(Error::PortAlreadyUsed(l.to_string()));
                }
                out.push(p);
            }
            if let Some(missing) = current.iter().find(|p| !out.contains(p)) {
                return Err(Error::DanglingPort(net.port_label(*missing, dir)));
            }
            Ok(out)
        }
        let mut next = self.clone();
        next.external_inputs = reorder(self, inputs, &self.external_inputs, Direction::In)?;
        next.external_outputs = reorder(self, outputs, &self.external_outputs, Direction::Out)?;
        Ok(next)
    }

    pub fn diagnostics(&self) -> Vec<NetworkWarning> {
        let mut w = Vec::new();
        if self.external_inputs.is_empty() {
            w.push(NetworkWarning::NoExternalInputs);
        }
        if self.external_outputs.is_empty() {
            w.push(NetworkWarning::NoExternalOutputs);
        }
        w
    }

    /// The unconnected direct sum over all channels.
    pub fn concatenated(&self) -> StateSpace {
        let parts: Vec<StateSpace> = self.blocks.iter().map(Block::state_space).collect();
        let refs: Vec<&StateSpace> = parts.iter().collect();
        StateSpace::direct_sum(&refs)
    }

    fn global(&self, p: Port) -> usize {
        self.channel_offsets[p.block] + p.channel
    }

    /// Eliminate internal edges on the doubled form.
    ///
    /// Each edge imposes `b_dst = y_src`. With `b = F_ext u + F_int b_int` and
    /// `y = C̄x + D̄b`, the internal inputs solve
    /// `(I − D̄_int) b_int = C̄_src x + D̄_src,ext u`.
    pub fn reduce_doubled(&self) -> Result<DoubledForm> {
        let full = self.concatenated().to_doubled();
        let n: usize = self.blocks.iter().map(Block::num_channels).sum();

        let both = |idx: Vec<usize>| -> Vec<usize> {
            let mut v = idx.clone();
            v.extend(idx.iter().map(|i| i + n));
            v
        };
        let int_in = both(self.edges.iter().map(|(_, d)| self.global(*d)).collect());
        let src_out = both(self.edges.iter().map(|(s, _)| self.global(*s)).collect());
        let ext_in = both(self.external_inputs.iter().map(|p| self.global(*p)).collect());
        let ext_out = both(self.external_outputs.iter().map(|p| self.global(*p)).collect());

        let b_ext = full.bbar.select_columns(&ext_in);
        let c_ext = full.cbar.select_rows(&ext_out);
        let d_ext = full.dbar.select_rows(&ext_out).select_columns(&ext_in);
        if int_in.is_empty() {
            return Ok(DoubledForm { abar: full.abar, bbar: b_ext, cbar: c_ext, dbar: d_ext });
        }

        let d_src = full.dbar.select_rows(&src_out);
        let d_loop = d_src.select_columns(&int_in);
        let k = int_in.len();
        let lhs = CMatrix::identity(k, k) - d_loop;
        let rc = rcond(&lhs);
        if rc < LOOP_RCOND_THRESHOLD {
            return Err(Error::SingularLoop { rcond: rc });
        }
        let lu = lhs.lu();
        let x_state = lu
            .solve(&full.cbar.select_rows(&src_out))
            .ok_or(Error::SingularLoop { rcond: rc })?;
        let x_input = lu
            .solve(&d_src.select_columns(&ext_in))
            .ok_or(Error::SingularLoop { rcond: rc })?;

        let b_int = full.bbar.select_columns(&int_in);
        let d_out_int = full.dbar.select_rows(&ext_out).select_columns(&int_in);
        Ok(DoubledForm {
            abar: &full.abar + &b_int * &x_state,
            bbar: b_ext + &b_int * &x_input,
            cbar: c_ext + &d_out_int * &x_state,
            dbar: d_ext + &d_out_int * &x_input,
        })
    }

    pub fn reduce(&self) -> Result<StateSpace> {
        self.reduce_doubled()?.to_state_space()
    }
}
