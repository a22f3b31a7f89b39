//! Quadtree encoder and decoder for single channels and whole images.
//!
//! A channel is edge-padded to a multiple of `max_n` and tiled into
//! `max_n`x`max_n` roots, visited in row-major order. Every block is
//! sparse-coded; a block whose code spends its whole atom budget without
//! reaching the error tolerance is replaced by its four quadrants (top-left,
//! top-right, bottom-left, bottom-right) one level down, until `min_n`.
//! The node sequence of a channel is the depth-first pre-order of these
//! trees.

use rayon::prelude::*;

use crate::color::{merge_channels, split_channels, ColorMode, ImageBuffer};
use crate::dictionary::{block_sizes, DictionaryBank};
use crate::error::{invalid, Error, Result, StreamRegion};
use crate::plane::Plane;
use crate::sparse::{omp, SparseCode};

/// The five codec hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CodecParams {
    /// Tolerance on the squared l2 residual of a block (pixels in `[0, 1]`).
    pub max_error: f64,
    /// Atom budget as a fraction of the block's pixel count, in `(0, 1]`.
    pub min_sparsity: f64,
    pub min_n: usize,
    pub max_n: usize,
    /// Number of dictionary atoms.
    pub a_cols: usize,
}

impl CodecParams {
    pub fn new(max_error: f64, min_sparsity: f64, min_n: usize, max_n: usize, a_cols: usize) -> Result<Self> {
        let p = Self { max_error, min_sparsity, min_n, max_n, a_cols };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_error.is_nan() || self.max_error < 0.0 || !self.max_error.is_finite() {
            return invalid(format!("max_error must be a finite non-negative number, got {}", self.max_error));
        }
        if !(self.min_sparsity > 0.0 && self.min_sparsity <= 1.0) {
            return invalid(format!("min_sparsity must be in (0, 1], got {}", self.min_sparsity));
        }
        if self.min_n < 2 {
            return invalid(format!("min_n must be at least 2, got {}", self.min_n));
        }
        block_sizes(self.min_n, self.max_n)?;
        if self.a_cols == 0 {
            return invalid("a_cols must be at least 1");
        }
        Ok(())
    }

    /// Admissible block sizes `min_n, 2*min_n, ..., max_n`.
    pub fn block_sizes(&self) -> Vec<usize> {
        block_sizes(self.min_n, self.max_n).expect("validated params")
    }

    /// Atom budget for an `n`x`n` block:
    /// `clamp(round(min_sparsity * n^2), 1, min(n^2, a_cols))`.
    pub fn sparsity_budget(&self, n: usize) -> usize {
        let area = n * n;
        let k = (self.min_sparsity * area as f64).round() as usize;
        k.clamp(1, area.min(self.a_cols).max(1))
    }
}

/// When a coded block is replaced by its quadrants.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub enum SplitRule {
    /// Split when the code used its full budget and still misses the
    /// tolerance.
    #[default]
    Conjunctive,
    /// Split whenever the code used its full budget, whatever its error.
    Literal,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct EncoderOptions {
    pub split_rule: SplitRule,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Node {
    Split,
    Leaf(SparseCode),
}

/// A coded channel: original size plus the depth-first node sequence of
/// all roots.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadtreeChannel {
    pub width: usize,
    pub height: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub nodes: Vec<Node>,
}

/// A leaf together with its position in the padded channel.
#[derive(Debug, Clone, Copy)]
pub struct PlacedLeaf<'a> {
    pub x: usize,
    pub y: usize,
    pub size: usize,
    pub code: &'a SparseCode,
}

impl QuadtreeChannel {
    /// Root grid `(columns, rows)`.
    pub fn root_grid(&self) -> (usize, usize) {
        (self.width.div_ceil(self.max_n), self.height.div_ceil(self.max_n))
    }

    pub fn padded_size(&self) -> (usize, usize) {
        let (c, r) = self.root_grid();
        (c * self.max_n, r * self.max_n)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| matches!(n, Node::Leaf(_))).count()
    }

    /// Resolves the geometry of every leaf, checking that the node sequence
    /// forms exactly one complete tree per root.
    pub fn placed_leaves(&self) -> Result<Vec<PlacedLeaf<'_>>> {
        let (cols, rows) = self.root_grid();
        let mut cursor = 0;
        let mut out = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                self.place(c * self.max_n, r * self.max_n, self.max_n, &mut cursor, &mut out)?;
            }
        }
        if cursor != self.nodes.len() {
            return Err(corrupt_node(cursor, "nodes left over after the last root"));
        }
        Ok(out)
    }

    fn place<'a>(
        &'a self,
        x: usize,
        y: usize,
        n: usize,
        cursor: &mut usize,
        out: &mut Vec<PlacedLeaf<'a>>,
    ) -> Result<()> {
        let at = *cursor;
        let node = self.nodes.get(at).ok_or_else(|| corrupt_node(at, "node sequence ends inside a tree"))?;
        *cursor += 1;
        match node {
            Node::Leaf(code) => {
                if code.block_size != n {
                    return Err(corrupt_node(at, format!("leaf of size {} at a size-{n} position", code.block_size)));
                }
                out.push(PlacedLeaf { x, y, size: n, code });
            }
            Node::Split if n > self.min_n => {
                let h = n / 2;
                for (dx, dy) in [(0, 0), (h, 0), (0, h), (h, h)] {
                    self.place(x + dx, y + dy, h, cursor, out)?;
                }
            }
            Node::Split => return Err(corrupt_node(at, "split below the minimum block size")),
        }
        Ok(())
    }
}

fn corrupt_node(at: usize, reason: impl Into<String>) -> Error {
    Error::CorruptStream { region: StreamRegion::Node, offset: at, reason: reason.into() }
}

/// Codes one channel with the default [`EncoderOptions`].
pub fn encode_channel(channel: &Plane, params: &CodecParams, bank: &DictionaryBank) -> Result<QuadtreeChannel> {
    encode_channel_with(channel, params, bank, &EncoderOptions::default())
}

pub fn encode_channel_with(
    channel: &Plane,
    params: &CodecParams,
    bank: &DictionaryBank,
    options: &EncoderOptions,
) -> Result<QuadtreeChannel> {
    params.validate()?;
    if bank.a_cols() != params.a_cols {
        return Err(Error::Configuration(format!(
            "dictionary bank has {} atoms, params ask for {}",
            bank.a_cols(),
            params.a_cols
        )));
    }
    for n in params.block_sizes() {
        bank.get(n)?;
    }
    if channel.data().iter().any(|v| !v.is_finite()) {
        return invalid("channel contains non-finite samples");
    }

    let (w, h) = (channel.width(), channel.height());
    let cols = w.div_ceil(params.max_n);
    let rows = h.div_ceil(params.max_n);
    let padded = channel.pad_replicate(cols * params.max_n, rows * params.max_n);

    let coder = BlockCoder { plane: &padded, params, bank, options };
    let roots: Vec<Vec<Node>> = (0..cols * rows)
        .into_par_iter()
        .map(|i| {
            let mut nodes = Vec::new();
            let mut scratch = Vec::new();
            coder.code((i % cols) * params.max_n, (i / cols) * params.max_n, params.max_n, &mut nodes, &mut scratch)?;
            Ok(nodes)
        })
        .collect::<Result<_>>()?;

    Ok(QuadtreeChannel {
        width: w,
        height: h,
        min_n: params.min_n,
        max_n: params.max_n,
        nodes: roots.into_iter().flatten().collect(),
    })
}

struct BlockCoder<'a> {
    plane: &'a Plane,
    params: &'a CodecParams,
    bank: &'a DictionaryBank,
    options: &'a EncoderOptions,
}

impl BlockCoder<'_> {
    fn code(&self, x: usize, y: usize, n: usize, out: &mut Vec<Node>, scratch: &mut Vec<f64>) -> Result<()> {
        self.plane.read_block(x, y, n, scratch);
        let budget = self.params.sparsity_budget(n);
        let code = omp(self.bank.get(n)?, scratch, self.params.max_error, budget)?;

        let exhausted = code.nnz() >= budget && n > self.params.min_n;
        let split = exhausted
            && match self.options.split_rule {
                SplitRule::Conjunctive => code.residual_sq >= self.params.max_error,
                SplitRule::Literal => true,
            };
        if split {
            out.push(Node::Split);
            let h = n / 2;
            for (dx, dy) in [(0, 0), (h, 0), (0, h), (h, h)] {
                self.code(x + dx, y + dy, h, out, scratch)?;
            }
        } else {
            out.push(Node::Leaf(code));
        }
        Ok(())
    }
}

/// Reconstructs a channel, cropped to its original size and clamped to
/// `[0, 1]`.
pub fn decode_channel(qt: &QuadtreeChannel, bank: &DictionaryBank) -> Result<Plane> {
    let leaves = qt.placed_leaves()?;
    let a_cols = bank.a_cols();
    for (i, leaf) in leaves.iter().enumerate() {
        if let Some(&bad) = leaf.code.indices.iter().find(|&&j| j >= a_cols) {
            return Err(corrupt_node(i, format!("atom index {bad} outside a dictionary of {a_cols}")));
        }
        if leaf.code.indices.len() != leaf.code.coefficients.len() {
            return Err(corrupt_node(i, "indices and coefficients differ in length"));
        }
        bank.get(leaf.size)?;
    }

    let blocks: Vec<Vec<f64>> = leaves
        .par_iter()
        .map(|leaf| {
            let dict = bank.get(leaf.size).expect("checked above");
            let mut block = vec![0.0; dict.dim()];
            dict.synthesize(&leaf.code.indices, &leaf.code.coefficients, &mut block);
            block
        })
        .collect();

    let (pw, ph) = qt.padded_size();
    let mut padded = Plane::filled(pw, ph, 0.0);
    for (leaf, block) in leaves.iter().zip(&blocks) {
        padded.write_block(leaf.x, leaf.y, leaf.size, block);
    }
    let mut out = padded.crop(qt.width, qt.height);
    out.clamp_unit();
    Ok(out)
}

/// Splits `img` into `mode`'s channels and codes each independently.
pub fn encode_image(
    img: &ImageBuffer,
    mode: ColorMode,
    params: &CodecParams,
    bank: &DictionaryBank,
) -> Result<Vec<QuadtreeChannel>> {
    split_channels(img, mode)?.iter().map(|c| encode_channel(c, params, bank)).collect()
}

pub fn decode_image(channels: &[QuadtreeChannel], mode: ColorMode, bank: &DictionaryBank) -> Result<ImageBuffer> {
    let planes = channels.iter().map(|c| decode_channel(c, bank)).collect::<Result<Vec<_>>>()?;
    merge_channels(&planes, mode)
}
