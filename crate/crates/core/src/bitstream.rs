//! The `.aqmp` container.
//!
//! ```text
//! offset size  field
//!      0    4  magic "AQMP"
//!      4    1  version (1)
//!      5    1  color mode (0 gray, 1 YCbCr, 2 RGB)
//!      6    4  width, u32 LE
//!     10    4  height, u32 LE
//!     14    1  log2(min_n)
//!     15    1  log2(max_n)
//!     16    2  a_cols, u16 LE
//!     18    1  dictionary id (0 = DCT | Haar)
//!     19    .  raw DEFLATE stream of the node payload
//! ```
//!
//! The payload lists every channel in order, and within a channel every
//! root tree in row-major order, depth first. A node larger than `min_n`
//! starts with a flag byte (0 leaf, 1 split); nodes at `min_n` are always
//! leaves and carry no flag. A leaf is an atom count (u16 LE) followed by
//! that many `(index: u16 LE, coefficient: f32 LE)` pairs with strictly
//! increasing indices.

use std::io::{Read, Write};

use flate2::read::DeflateDecoder;
use flate2::write::DeflateEncoder;
use flate2::Compression;

use crate::codec::{decode_image, CodecParams, Node, QuadtreeChannel};
use crate::color::{ColorMode, ImageBuffer};
use crate::dictionary::{DictionaryBank, DictionaryCache};
use crate::error::{invalid, Error, Result, StreamRegion};
use crate::sparse::SparseCode;

pub const MAGIC: [u8; 4] = *b"AQMP";
pub const VERSION: u8 = 1;
pub const HEADER_LEN: usize = 19;
/// Dictionary id of the DCT | Haar construction.
pub const DICT_DCT_HAAR: u8 = 0;
/// Largest block side the container accepts (`2^10`).
pub const MAX_BLOCK_LOG2: u8 = 10;

const FLAG_LEAF: u8 = 0;
const FLAG_SPLIT: u8 = 1;

/// A parsed `.aqmp` file.
#[derive(Debug, Clone, PartialEq)]
pub struct AqmpFile {
    pub mode: ColorMode,
    pub width: usize,
    pub height: usize,
    pub min_n: usize,
    pub max_n: usize,
    pub a_cols: usize,
    /// Decoded leaves carry `residual_sq = 0.0`; residuals are not stored.
    pub channels: Vec<QuadtreeChannel>,
}

impl AqmpFile {
    pub fn bank(&self) -> Result<DictionaryBank> {
        DictionaryBank::new(self.min_n, self.max_n, self.a_cols)
    }

    pub fn bank_from(&self, cache: &DictionaryCache) -> Result<DictionaryBank> {
        cache.bank(self.min_n, self.max_n, self.a_cols)
    }

    pub fn decode(&self, bank: &DictionaryBank) -> Result<ImageBuffer> {
        decode_image(&self.channels, self.mode, bank)
    }
}

/// Writes the container for `channels`, coded with `params` in `mode`.
pub fn serialize(channels: &[QuadtreeChannel], params: &CodecParams, mode: ColorMode) -> Result<Vec<u8>> {
    if channels.is_empty() {
        return invalid("nothing to serialize: no channels");
    }
    if channels.len() != mode.channel_count() {
        return invalid(format!("{mode} needs {} channels, got {}", mode.channel_count(), channels.len()));
    }
    params.validate()?;
    let (w, h) = (channels[0].width, channels[0].height);
    for c in channels {
        if (c.width, c.height, c.min_n, c.max_n) != (w, h, params.min_n, params.max_n) {
            return invalid("channels disagree with each other or with the codec parameters");
        }
    }
    let width = u32::try_from(w).map_err(|_| capacity(format!("width {w} exceeds u32")))?;
    let height = u32::try_from(h).map_err(|_| capacity(format!("height {h} exceeds u32")))?;
    let a_cols = u16::try_from(params.a_cols).map_err(|_| capacity(format!("a_cols {} exceeds u16", params.a_cols)))?;
    let min_log2 = params.min_n.trailing_zeros() as u8;
    let max_log2 = params.max_n.trailing_zeros() as u8;
    if max_log2 > MAX_BLOCK_LOG2 {
        return Err(capacity(format!("max_n {} exceeds the container limit {}", params.max_n, 1 << MAX_BLOCK_LOG2)));
    }

    let mut out = Vec::with_capacity(HEADER_LEN + 1024);
    out.extend_from_slice(&MAGIC);
    out.push(VERSION);
    out.push(mode.code());
    out.extend_from_slice(&width.to_le_bytes());
    out.extend_from_slice(&height.to_le_bytes());
    out.push(min_log2);
    out.push(max_log2);
    out.extend_from_slice(&a_cols.to_le_bytes());
    out.push(DICT_DCT_HAAR);

    let mut payload = Vec::new();
    for c in channels {
        write_channel(c, params.a_cols, &mut payload)?;
    }
    let mut enc = DeflateEncoder::new(out, Compression::best());
    enc.write_all(&payload)?;
    Ok(enc.finish()?)
}

fn capacity(msg: String) -> Error {
    Error::FormatCapacity(msg)
}

fn write_channel(c: &QuadtreeChannel, a_cols: usize, out: &mut Vec<u8>) -> Result<()> {
    // Validates the tree shape before anything is written.
    c.placed_leaves()?;
    let mut size_stack = Vec::new();
    let (cols, rows) = c.root_grid();
    let mut nodes = c.nodes.iter();
    for _ in 0..cols * rows {
        size_stack.push(c.max_n);
        while let Some(n) = size_stack.pop() {
            let node = nodes.next().expect("shape validated");
            match node {
                Node::Split => {
                    out.push(FLAG_SPLIT);
                    size_stack.extend([n / 2; 4]);
                }
                Node::Leaf(code) => {
                    if n > c.min_n {
                        out.push(FLAG_LEAF);
                    }
                    write_leaf(code, a_cols, out)?;
                }
            }
        }
    }
    Ok(())
}

fn write_leaf(code: &SparseCode, a_cols: usize, out: &mut Vec<u8>) -> Result<()> {
    let count =
        u16::try_from(code.nnz()).map_err(|_| capacity(format!("{} atoms in one leaf exceed u16", code.nnz())))?;
    if code.indices.len() != code.coefficients.len() {
        return invalid("leaf indices and coefficients differ in length");
    }
    if code.indices.windows(2).any(|w| w[0] >= w[1]) {
        return invalid("leaf indices must be strictly increasing");
    }
    out.extend_from_slice(&count.to_le_bytes());
    for (&i, &c) in code.indices.iter().zip(&code.coefficients) {
        if i >= a_cols {
            return invalid(format!("atom index {i} outside a dictionary of {a_cols}"));
        }
        let c32 = c as f32;
        if !c32.is_finite() {
            return Err(capacity(format!("coefficient {c} is not representable as f32")));
        }
        out.extend_from_slice(&(i as u16).to_le_bytes());
        out.extend_from_slice(&c32.to_le_bytes());
    }
    Ok(())
}

/// Parses a container produced by [`serialize`].
pub fn deserialize(bytes: &[u8]) -> Result<AqmpFile> {
    let prefix = bytes.len().min(MAGIC.len());
    if bytes[..prefix] != MAGIC[..prefix] {
        return Err(Error::UnsupportedFormat("not an AQMP file (bad magic)".into()));
    }
    if bytes.len() < HEADER_LEN {
        return Err(file_corrupt(bytes.len(), "truncated header"));
    }
    if bytes[4] != VERSION {
        return Err(Error::UnsupportedFormat(format!("unsupported version {}", bytes[4])));
    }
    let mode =
        ColorMode::from_code(bytes[5]).ok_or_else(|| file_corrupt(5, format!("unknown color mode {}", bytes[5])))?;
    let width = u32::from_le_bytes(bytes[6..10].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(bytes[10..14].try_into().unwrap()) as usize;
    if width == 0 {
        return Err(file_corrupt(6, "zero width"));
    }
    if height == 0 {
        return Err(file_corrupt(10, "zero height"));
    }
    let (min_log2, max_log2) = (bytes[14], bytes[15]);
    if min_log2 == 0 || min_log2 > MAX_BLOCK_LOG2 {
        return Err(file_corrupt(14, format!("min block size 2^{min_log2} out of range")));
    }
    if max_log2 < min_log2 || max_log2 > MAX_BLOCK_LOG2 {
        return Err(file_corrupt(15, format!("max block size 2^{max_log2} out of range")));
    }
    let a_cols = u16::from_le_bytes([bytes[16], bytes[17]]) as usize;
    if a_cols == 0 {
        return Err(file_corrupt(16, "empty dictionary"));
    }
    if bytes[18] != DICT_DCT_HAAR {
        return Err(Error::UnsupportedFormat(format!("unknown dictionary id {}", bytes[18])));
    }
    let (min_n, max_n) = (1usize << min_log2, 1usize << max_log2);

    let limit = payload_bound(mode.channel_count(), width, height, min_n, max_n, a_cols);
    let mut decoder = DeflateDecoder::new(&bytes[HEADER_LEN..]);
    let mut payload = Vec::new();
    if let Err(e) = (&mut decoder).take(limit + 1).read_to_end(&mut payload) {
        let at = HEADER_LEN + decoder.total_in() as usize;
        return Err(file_corrupt(at, format!("DEFLATE stream invalid: {e}")));
    }
    if payload.len() as u64 > limit {
        return Err(payload_corrupt(limit as usize, "payload larger than the header allows"));
    }

    let mut reader = PayloadReader { buf: &payload, pos: 0, min_n, a_cols };
    let cols = width.div_ceil(max_n);
    let rows = height.div_ceil(max_n);
    let mut channels = Vec::with_capacity(mode.channel_count());
    for _ in 0..mode.channel_count() {
        let mut nodes = Vec::new();
        for _ in 0..cols * rows {
            reader.read_tree(max_n, &mut nodes)?;
        }
        channels.push(QuadtreeChannel { width, height, min_n, max_n, nodes });
    }
    if reader.pos != payload.len() {
        return Err(payload_corrupt(reader.pos, "trailing bytes after the last channel"));
    }
    Ok(AqmpFile { mode, width, height, min_n, max_n, a_cols, channels })
}

/// Upper bound on the payload length of any valid stream with this header.
fn payload_bound(channels: usize, w: usize, h: usize, min_n: usize, max_n: usize, a_cols: usize) -> u64 {
    fn tree(n: usize, min_n: usize, a_cols: usize) -> u64 {
        let leaf = 2 + 6 * (n * n).min(a_cols) as u64;
        if n == min_n {
            leaf
        } else {
            1 + leaf.max(4 * tree(n / 2, min_n, a_cols))
        }
    }
    let roots = (w.div_ceil(max_n) as u64).saturating_mul(h.div_ceil(max_n) as u64);
    tree(max_n, min_n, a_cols).saturating_mul(roots).saturating_mul(channels as u64).min(1 << 34)
}

fn file_corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptStream { region: StreamRegion::File, offset, reason: reason.into() }
}

fn payload_corrupt(offset: usize, reason: impl Into<String>) -> Error {
    Error::CorruptStream { region: StreamRegion::Payload, offset, reason: reason.into() }
}

struct PayloadReader<'a> {
    buf: &'a [u8],
    pos: usize,
    min_n: usize,
    a_cols: usize,
}

impl PayloadReader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.buf.len() - self.pos < n {
            return Err(payload_corrupt(self.pos, "payload ends inside a node"));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn read_tree(&mut self, n: usize, out: &mut Vec<Node>) -> Result<()> {
        if n > self.min_n {
            let at = self.pos;
            match self.take(1)?[0] {
                FLAG_LEAF => {}
                FLAG_SPLIT => {
                    out.push(Node::Split);
                    for _ in 0..4 {
                        self.read_tree(n / 2, out)?;
                    }
                    return Ok(());
                }
                other => return Err(payload_corrupt(at, format!("invalid node flag {other}"))),
            }
        }
        let at = self.pos;
        let count = u16::from_le_bytes(self.take(2)?.try_into().unwrap()) as usize;
        if count > (n * n).min(self.a_cols) {
            return Err(payload_corrupt(at, format!("{count} atoms in a {n}x{n} leaf")));
        }
        let mut indices = Vec::with_capacity(count);
        let mut coefficients = Vec::with_capacity(count);
        for _ in 0..count {
            let at = self.pos;
            let rec = self.take(6)?;
            let index = u16::from_le_bytes([rec[0], rec[1]]) as usize;
            let coef = f32::from_le_bytes([rec[2], rec[3], rec[4], rec[5]]);
            if index >= self.a_cols {
                return Err(payload_corrupt(at, format!("atom index {index} outside a dictionary of {}", self.a_cols)));
            }
            if indices.last().is_some_and(|&prev| prev >= index) {
                return Err(payload_corrupt(at, "atom indices not strictly increasing"));
            }
            if !coef.is_finite() {
                return Err(payload_corrupt(at + 2, "non-finite coefficient"));
            }
            indices.push(index);
            coefficients.push(coef as f64);
        }
        out.push(Node::Leaf(SparseCode { block_size: n, indices, coefficients, residual_sq: 0.0 }));
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::encode_channel;
    use crate::plane::Plane;

    fn sample_file(mode: ColorMode) -> (Vec<QuadtreeChannel>, CodecParams) {
        let p = CodecParams::new(0.01, 0.3, 4, 16, 32).unwrap();
        let bank = DictionaryBank::new(4, 16, 32).unwrap();
        let channels = (0..mode.channel_count())
            .map(|c| {
                let plane = Plane::from_fn(23, 17, |x, y| ((x * 7 + y * 3 + c * 5) % 11) as f64 / 10.0);
                encode_channel(&plane, &p, &bank).unwrap()
            })
            .collect();
        (channels, p)
    }

    /// Header fields decoded by hand, independent of `deserialize`.
    fn parse_header(b: &[u8]) -> (String, u8, u8, u32, u32, u8, u8, u16, u8) {
        (
            String::from_utf8(b[0..4].to_vec()).unwrap(),
            b[4],
            b[5],
            u32::from_le_bytes([b[6], b[7], b[8], b[9]]),
            u32::from_le_bytes([b[10], b[11], b[12], b[13]]),
            b[14],
            b[15],
            u16::from_le_bytes([b[16], b[17]]),
            b[18],
        )
    }

    #[test]
    fn header_bytes() {
        let p = CodecParams::new(0.1, 0.5, 4, 8, 32).unwrap();
        let leaf = |n| Node::Leaf(SparseCode::empty(n, 0.0));
        let channel = QuadtreeChannel { width: 512, height: 512, min_n: 4, max_n: 8, nodes: vec![leaf(8); 64 * 64] };
        let bytes = serialize(&vec![channel; 3], &p, ColorMode::YCbCr).unwrap();
        assert_eq!(
            &bytes[..HEADER_LEN],
            &[
                0x41, 0x51, 0x4D, 0x50, 0x01, 0x01, 0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x00, 0x00, 0x02, 0x03, 0x20,
                0x00, 0x00
            ]
        );
        assert_eq!(parse_header(&bytes), ("AQMP".into(), 1, 1, 512, 512, 2, 3, 32, 0));
    }

    #[test]
    fn round_trip_is_byte_identical() {
        for mode in [ColorMode::Gray, ColorMode::Rgb, ColorMode::YCbCr] {
            let (channels, p) = sample_file(mode);
            let bytes = serialize(&channels, &p, mode).unwrap();
            let file = deserialize(&bytes).unwrap();
            assert_eq!((file.mode, file.width, file.height), (mode, 23, 17));
            assert_eq!((file.min_n, file.max_n, file.a_cols), (4, 16, 32));
            assert_eq!(file.channels.len(), mode.channel_count());
            for (a, b) in file.channels.iter().zip(&channels) {
                assert_eq!(a.nodes.len(), b.nodes.len());
            }
            assert_eq!(serialize(&file.channels, &p, mode).unwrap(), bytes);
        }
    }

    #[test]
    fn rejects_empty_and_inconsistent_input() {
        let (channels, p) = sample_file(ColorMode::Rgb);
        assert!(matches!(serialize(&[], &p, ColorMode::Gray), Err(Error::InvalidArgument(_))));
        assert!(serialize(&channels[..1], &p, ColorMode::Rgb).is_err());
        let other = CodecParams::new(0.01, 0.3, 4, 8, 32).unwrap();
        assert!(serialize(&channels, &other, ColorMode::Rgb).is_err());
    }

    #[test]
    fn oversized_leaf_is_a_capacity_error() {
        let p = CodecParams::new(0.1, 0.5, 256, 256, 65535).unwrap();
        let code = SparseCode {
            block_size: 256,
            indices: (0..65536).collect(),
            coefficients: vec![0.0; 65536],
            residual_sq: 0.0,
        };
        let c = QuadtreeChannel { width: 256, height: 256, min_n: 256, max_n: 256, nodes: vec![Node::Leaf(code)] };
        assert!(matches!(serialize(&[c], &p, ColorMode::Gray), Err(Error::FormatCapacity(_))));
    }

    #[test]
    fn header_errors() {
        let (channels, p) = sample_file(ColorMode::Gray);
        let good = serialize(&channels, &p, ColorMode::Gray).unwrap();

        assert!(matches!(deserialize(b"PNG\x00"), Err(Error::UnsupportedFormat(_))));
        assert!(matches!(deserialize(&good[..10]), Err(Error::CorruptStream { offset: 10, .. })));

        let mut v2 = good.clone();
        v2[4] = 2;
        let err = deserialize(&v2).unwrap_err();
        assert!(err.to_string().contains("unsupported version 2"));

        let mut bad_mode = good.clone();
        bad_mode[5] = 9;
        assert!(matches!(deserialize(&bad_mode), Err(Error::CorruptStream { offset: 5, .. })));

        let mut bad_dict = good.clone();
        bad_dict[18] = 1;
        assert!(matches!(deserialize(&bad_dict), Err(Error::UnsupportedFormat(_))));
    }

    #[test]
    fn payload_errors() {
        let (channels, p) = sample_file(ColorMode::Gray);
        let good = serialize(&channels, &p, ColorMode::Gray).unwrap();

        let truncated = &good[..good.len() - 5];
        assert!(matches!(deserialize(truncated), Err(Error::CorruptStream { .. })));

        // Re-compress a payload with one extra trailing byte.
        let mut payload = Vec::new();
        DeflateDecoder::new(&good[HEADER_LEN..]).read_to_end(&mut payload).unwrap();
        let recompress = |payload: &[u8]| {
            let mut enc = DeflateEncoder::new(good[..HEADER_LEN].to_vec(), Compression::default());
            enc.write_all(payload).unwrap();
            enc.finish().unwrap()
        };
        let mut longer = payload.clone();
        longer.push(0);
        assert!(matches!(
            deserialize(&recompress(&longer)),
            Err(Error::CorruptStream { region: StreamRegion::Payload, .. })
        ));
        let mut bad_flag = payload.clone();
        bad_flag[0] = 7;
        assert!(matches!(
            deserialize(&recompress(&bad_flag)),
            Err(Error::CorruptStream { region: StreamRegion::Payload, offset: 0, .. })
        ));
        assert!(deserialize(&recompress(&payload)).is_ok());
    }
}
