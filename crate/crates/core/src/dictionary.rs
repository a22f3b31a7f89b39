//! Overcomplete DCT + Haar dictionaries, one per admissible block size.
//!
//! A dictionary for block side `N` holds `a_cols` unit-norm atoms in
//! `R^(N*N)`, each one a flattened (row-major) `N`x`N` pattern. The first
//! `ceil(a_cols / 2)` atoms are 2D cosines in zigzag order, starting with
//! the constant (DC) atom. The rest are 2D Haar detail atoms ordered coarse
//! to fine; the Haar scaling function is omitted because it would duplicate
//! the DC atom.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::{Arc, Mutex};

use crate::error::{invalid, Error, Result};

/// Above this width the Gram matrix is not precomputed and correlations
/// are taken against the explicit residual instead.
const GRAM_MAX_ATOMS: usize = 2048;

/// Rows of the (possibly overcomplete) 1D cosine frame: `p` rows of
/// length `n`, row `k` sampling `cos(pi/p * (i + 1/2) * k)`, each row
/// normalized to unit length. For `p == n` this is the orthonormal DCT-II.
pub fn dct_matrix_1d(n: usize, p: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 || p == 0 {
        return invalid(format!("dct size and atom count must be positive (n={n}, p={p})"));
    }
    let rows = (0..p)
        .map(|k| {
            let alpha = if k == 0 { (1.0 / p as f64).sqrt() } else { (2.0 / p as f64).sqrt() };
            let mut row: Vec<f64> =
                (0..n).map(|i| alpha * (PI / p as f64 * (i as f64 + 0.5) * k as f64).cos()).collect();
            normalize(&mut row);
            row
        })
        .collect();
    Ok(rows)
}

/// The first `count` separable 2D cosine atoms for `n`x`n` blocks.
///
/// Frequencies come from a 1D frame with `max(n, ceil(sqrt(count)))` rows,
/// so fewer than `n*n` atoms are the lowest frequencies of the square DCT
/// and more than `n*n` come from an overcomplete cosine frame. Pairs
/// `(k1, k2)` are visited by ascending `k1 + k2`, then ascending `k1`.
/// Atom `(k1, k2)` varies with frequency `k1` down the rows and `k2`
/// across the columns.
pub fn build_dct_atoms_2d(n: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if count == 0 {
        return invalid("dct atom count must be at least 1");
    }
    let p = ceil_sqrt(count).max(n);
    let frame = dct_matrix_1d(n, p)?;

    let mut pairs: Vec<(usize, usize)> = (0..p).flat_map(|k1| (0..p).map(move |k2| (k1, k2))).collect();
    pairs.sort_by_key(|&(k1, k2)| (k1 + k2, k1));

    Ok(pairs
        .into_iter()
        .take(count)
        .map(|(k1, k2)| {
            let mut atom = Vec::with_capacity(n * n);
            for r in 0..n {
                for c in 0..n {
                    atom.push(frame[k1][r] * frame[k2][c]);
                }
            }
            normalize(&mut atom);
            atom
        })
        .collect())
}

/// The first `count` 2D Haar detail atoms for `n`x`n` blocks.
///
/// Atoms are ordered by decreasing support, then by subband (LH, HL, HH),
/// then by row-major position of the support. LH changes sign between the
/// upper and lower half of its support, HL between the left and right half.
/// Past the `n*n - 1` atoms of the orthonormal basis, the sequence repeats
/// with every flattened atom cyclically shifted by one more sample.
pub fn build_haar_atoms_2d(n: usize, count: usize) -> Result<Vec<Vec<f64>>> {
    if n == 0 || !n.is_power_of_two() {
        return invalid(format!("haar block size must be a power of two, got {n}"));
    }
    let basis = haar_detail_basis(n);
    if basis.is_empty() {
        return if count == 0 { Ok(Vec::new()) } else { invalid("a 1x1 block has no haar detail atoms") };
    }
    let len = n * n;
    Ok((0..count)
        .map(|i| {
            let base = &basis[i % basis.len()];
            let shift = i / basis.len();
            if shift == 0 {
                return base.clone();
            }
            let mut atom = vec![0.0; len];
            for (p, &v) in base.iter().enumerate() {
                atom[(p + shift) % len] = v;
            }
            atom
        })
        .collect())
}

fn haar_detail_basis(n: usize) -> Vec<Vec<f64>> {
    let mut atoms = Vec::with_capacity(n * n - 1);
    let mut side = n;
    while side >= 2 {
        let half = side / 2;
        let tiles = n / side;
        let mag = 1.0 / side as f64;
        for band in 0..3 {
            for ty in 0..tiles {
                for tx in 0..tiles {
                    let mut atom = vec![0.0; n * n];
                    for r in 0..side {
                        for c in 0..side {
                            let vertical = if r < half { 1.0 } else { -1.0 };
                            let horizontal = if c < half { 1.0 } else { -1.0 };
                            let sign = match band {
                                0 => vertical,
                                1 => horizontal,
                                _ => vertical * horizontal,
                            };
                            atom[(ty * side + r) * n + tx * side + c] = sign * mag;
                        }
                    }
                    atoms.push(atom);
                }
            }
        }
        side = half;
    }
    atoms
}

/// Builds the `a_cols`-atom DCT | Haar dictionary for `n`x`n` blocks.
pub fn build_dictionary(n: usize, a_cols: usize) -> Result<Dictionary> {
    if a_cols == 0 {
        return invalid("a_cols must be at least 1");
    }
    if n < 2 || !n.is_power_of_two() {
        return invalid(format!("dictionary block size must be a power of two >= 2, got {n}"));
    }
    let dct_count = a_cols.div_ceil(2);
    let mut atoms = build_dct_atoms_2d(n, dct_count)?;
    atoms.extend(build_haar_atoms_2d(n, a_cols - dct_count)?);
    for atom in &mut atoms {
        normalize(atom);
    }
    Dictionary::from_atoms(n, atoms)
}

/// Unit-norm atoms for one block size, stored atom-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dictionary {
    block_size: usize,
    a_cols: usize,
    atoms: Vec<f64>,
    gram: Option<Vec<f64>>,
}

impl Dictionary {
    /// Wraps explicit atoms. Each atom must have `block_size^2` entries and
    /// unit norm (to within 1e-9).
    pub fn from_atoms(block_size: usize, atoms: Vec<Vec<f64>>) -> Result<Self> {
        let dim = block_size * block_size;
        if block_size == 0 || atoms.is_empty() {
            return invalid("dictionary needs a positive block size and at least one atom");
        }
        let mut flat = Vec::with_capacity(dim * atoms.len());
        for (i, atom) in atoms.iter().enumerate() {
            if atom.len() != dim {
                return invalid(format!("atom {i} has {} entries, expected {dim}", atom.len()));
            }
            let norm = dot(atom, atom).sqrt();
            if (norm - 1.0).abs() > 1e-9 {
                return invalid(format!("atom {i} has norm {norm}, expected 1"));
            }
            flat.extend_from_slice(atom);
        }
        let a_cols = atoms.len();
        let mut dict = Self { block_size, a_cols, atoms: flat, gram: None };
        if a_cols <= GRAM_MAX_ATOMS {
            dict.gram = Some(dict.compute_gram());
        }
        Ok(dict)
    }

    fn compute_gram(&self) -> Vec<f64> {
        let m = self.a_cols;
        let mut g = vec![0.0; m * m];
        for i in 0..m {
            for j in i..m {
                let v = dot(self.atom(i), self.atom(j));
                g[i * m + j] = v;
                g[j * m + i] = v;
            }
        }
        g
    }

    /// Drops the precomputed Gram matrix so the solver falls back to
    /// explicit residuals.
    pub fn without_gram(mut self) -> Self {
        self.gram = None;
        self
    }

    pub fn block_size(&self) -> usize {
        self.block_size
    }

    /// Number of atoms `M`.
    pub fn a_cols(&self) -> usize {
        self.a_cols
    }

    /// Length of each atom, `N^2`.
    pub fn dim(&self) -> usize {
        self.block_size * self.block_size
    }

    pub fn atom(&self, i: usize) -> &[f64] {
        let d = self.dim();
        &self.atoms[i * d..(i + 1) * d]
    }

    pub fn atoms(&self) -> impl Iterator<Item = &[f64]> {
        self.atoms.chunks_exact(self.dim())
    }

    /// Row `i` of `D^T D`, if precomputed.
    pub fn gram_row(&self, i: usize) -> Option<&[f64]> {
        self.gram.as_ref().map(|g| &g[i * self.a_cols..(i + 1) * self.a_cols])
    }

    pub fn has_gram(&self) -> bool {
        self.gram.is_some()
    }

    /// `out[i] = <atom_i, v>` for every atom.
    pub fn correlate(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.dim());
        for (o, atom) in out.iter_mut().zip(self.atoms()) {
            *o = dot(atom, v);
        }
    }

    /// `out = sum_j coefficients[j] * atom[indices[j]]`.
    pub fn synthesize(&self, indices: &[usize], coefficients: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (&i, &c) in indices.iter().zip(coefficients) {
            for (o, a) in out.iter_mut().zip(self.atom(i)) {
                *o += c * a;
            }
        }
    }
}

/// Dictionaries for every block size a codec configuration may use.
#[derive(Debug, Clone)]
pub struct DictionaryBank {
    a_cols: usize,
    by_size: HashMap<usize, Arc<Dictionary>>,
}

impl DictionaryBank {
    /// Builds dictionaries for `min_n, 2*min_n, ..., max_n`.
    pub fn new(min_n: usize, max_n: usize, a_cols: usize) -> Result<Self> {
        let mut bank = Self { a_cols, by_size: HashMap::new() };
        for n in block_sizes(min_n, max_n)? {
            bank.by_size.insert(n, Arc::new(build_dictionary(n, a_cols)?));
        }
        Ok(bank)
    }

    /// Assembles a bank from prebuilt dictionaries; all must share `a_cols`.
    pub fn from_dictionaries(dicts: impl IntoIterator<Item = Arc<Dictionary>>) -> Result<Self> {
        let mut by_size = HashMap::new();
        let mut a_cols = None;
        for d in dicts {
            if *a_cols.get_or_insert(d.a_cols()) != d.a_cols() {
                return invalid("all dictionaries in a bank must have the same width");
            }
            by_size.insert(d.block_size(), d);
        }
        let a_cols = a_cols.ok_or_else(|| Error::InvalidArgument("empty dictionary bank".into()))?;
        Ok(Self { a_cols, by_size })
    }

    pub fn a_cols(&self) -> usize {
        self.a_cols
    }

    pub fn get(&self, n: usize) -> Result<&Dictionary> {
        self.by_size
            .get(&n)
            .map(Arc::as_ref)
            .ok_or_else(|| Error::Configuration(format!("no dictionary for block size {n}")))
    }
}

/// Shares built dictionaries across many encodes with different settings.
#[derive(Debug, Default)]
pub struct DictionaryCache {
    built: Mutex<HashMap<(usize, usize), Arc<Dictionary>>>,
}

impl DictionaryCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n: usize, a_cols: usize) -> Result<Arc<Dictionary>> {
        if let Some(d) = self.built.lock().expect("dictionary cache poisoned").get(&(n, a_cols)) {
            return Ok(Arc::clone(d));
        }
        // Built outside the lock; a racing duplicate build is harmless.
        let d = Arc::new(build_dictionary(n, a_cols)?);
        self.built.lock().expect("dictionary cache poisoned").insert((n, a_cols), Arc::clone(&d));
        Ok(d)
    }

    pub fn bank(&self, min_n: usize, max_n: usize, a_cols: usize) -> Result<DictionaryBank> {
        let dicts = block_sizes(min_n, max_n)?.into_iter().map(|n| self.get(n, a_cols)).collect::<Result<Vec<_>>>()?;
        DictionaryBank::from_dictionaries(dicts)
    }
}

/// The admissible sizes `min_n, 2*min_n, ..., max_n`.
pub fn block_sizes(min_n: usize, max_n: usize) -> Result<Vec<usize>> {
    if min_n == 0 || !min_n.is_power_of_two() || !max_n.is_power_of_two() || max_n < min_n {
        return invalid(format!("block sizes must be powers of two with min <= max, got {min_n}..{max_n}"));
    }
    let mut sizes = vec![min_n];
    while *sizes.last().unwrap() < max_n {
        sizes.push(sizes.last().unwrap() * 2);
    }
    Ok(sizes)
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    // Four accumulators let the compiler vectorize without reassociating.
    let mut acc = [0.0f64; 4];
    let chunks_a = a.chunks_exact(4);
    let chunks_b = b.chunks_exact(4);
    let (ra, rb) = (chunks_a.remainder(), chunks_b.remainder());
    for (x, y) in chunks_a.zip(chunks_b) {
        acc[0] += x[0] * y[0];
        acc[1] += x[1] * y[1];
        acc[2] += x[2] * y[2];
        acc[3] += x[3] * y[3];
    }
    let mut tail = 0.0;
    for (x, y) in ra.iter().zip(rb) {
        tail += x * y;
    }
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

fn normalize(v: &mut [f64]) {
    let norm = dot(v, v).sqrt();
    if norm > 0.0 {
        for x in v.iter_mut() {
            *x /= norm;
        }
    }
}

fn ceil_sqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r < x {
        r += 1;
    }
    while r > 1 && (r - 1) * (r - 1) >= x {
        r -= 1;
    }
    r
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matmul_t(rows: &[Vec<f64>]) -> Vec<Vec<f64>> {
        // (C^T C)[i][j] = sum_k C[k][i] C[k][j]
        let n = rows[0].len();
        (0..n).map(|i| (0..n).map(|j| rows.iter().map(|r| r[i] * r[j]).sum()).collect()).collect()
    }

    fn gram(atoms: &[Vec<f64>]) -> Vec<Vec<f64>> {
        atoms.iter().map(|a| atoms.iter().map(|b| a.iter().zip(b).map(|(x, y)| x * y).sum()).collect()).collect()
    }

    fn assert_identity(m: &[Vec<f64>], tol: f64) {
        for (i, row) in m.iter().enumerate() {
            for (j, &v) in row.iter().enumerate() {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((v - want).abs() < tol, "entry ({i},{j}) = {v}");
            }
        }
    }

    #[test]
    fn dct_trivial_sizes() {
        assert_eq!(dct_matrix_1d(1, 1).unwrap(), vec![vec![1.0]]);
        let c = dct_matrix_1d(4, 4).unwrap();
        for v in &c[0] {
            assert!((v - 0.5).abs() < 1e-15);
        }
        assert!(dct_matrix_1d(0, 3).is_err());
        assert!(dct_matrix_1d(3, 0).is_err());
    }

    #[test]
    fn square_dct_is_orthonormal() {
        for n in [2, 4, 8, 16, 32] {
            let c = dct_matrix_1d(n, n).unwrap();
            assert_identity(&matmul_t(&c), 1e-10);
        }
    }

    #[test]
    fn overcomplete_dct_rows_are_unit() {
        let c = dct_matrix_1d(4, 12).unwrap();
        assert_eq!(c.len(), 12);
        for row in &c {
            let norm: f64 = row.iter().map(|x| x * x).sum();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn few_dct_atoms_are_low_frequencies_of_the_square_basis() {
        let few = build_dct_atoms_2d(8, 10).unwrap();
        let full = build_dct_atoms_2d(8, 64).unwrap();
        assert_eq!(&full[..10], &few[..]);
        for i in 0..10 {
            for j in 0..10 {
                let g = dot(&few[i], &few[j]);
                assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn dct_2d_dc_and_zigzag() {
        let dc = build_dct_atoms_2d(4, 1).unwrap();
        assert_eq!(dc.len(), 1);
        assert!(dc[0].iter().all(|v| (v - 0.25).abs() < 1e-15));

        let three = build_dct_atoms_2d(4, 3).unwrap();
        let c = dct_matrix_1d(4, 4).unwrap();
        let expect = |k1: usize, k2: usize| -> Vec<f64> { (0..16).map(|p| c[k1][p / 4] * c[k2][p % 4]).collect() };
        for (atom, (k1, k2)) in three.iter().zip([(0, 0), (0, 1), (1, 0)]) {
            for (a, b) in atom.iter().zip(expect(k1, k2)) {
                assert!((a - b).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn full_square_dct_2d_is_orthonormal() {
        let atoms = build_dct_atoms_2d(8, 64).unwrap();
        assert_eq!(atoms.len(), 64);
        assert_identity(&gram(&atoms), 1e-10);
    }

    #[test]
    fn haar_2x2() {
        let atoms = build_haar_atoms_2d(2, 3).unwrap();
        assert_eq!(atoms, vec![vec![0.5, 0.5, -0.5, -0.5], vec![0.5, -0.5, 0.5, -0.5], vec![0.5, -0.5, -0.5, 0.5],]);
        assert!(build_haar_atoms_2d(2, 0).unwrap().is_empty());
        assert!(build_haar_atoms_2d(6, 3).is_err());
    }

    #[test]
    fn haar_4x4_basis_is_orthonormal_and_zero_mean() {
        let atoms = build_haar_atoms_2d(4, 15).unwrap();
        assert_identity(&gram(&atoms), 1e-12);
        for a in &atoms {
            assert!(a.iter().sum::<f64>().abs() < 1e-12);
        }
    }

    #[test]
    fn haar_overcomplete_copies_are_shifted() {
        let atoms = build_haar_atoms_2d(2, 5).unwrap();
        // atom 3 = atom 0 rolled by one sample
        assert_eq!(atoms[3], vec![-0.5, 0.5, 0.5, -0.5]);
        assert_eq!(atoms[4], vec![-0.5, 0.5, -0.5, 0.5]);
    }

    #[test]
    fn dictionary_layout() {
        let d = build_dictionary(4, 2).unwrap();
        assert_eq!(d.a_cols(), 2);
        assert!(d.atom(0).iter().all(|v| (v - 0.25).abs() < 1e-15));
        assert_eq!(d.atom(1), build_haar_atoms_2d(4, 1).unwrap()[0].as_slice());
        assert!(build_dictionary(4, 0).is_err());
        assert!(build_dictionary(3, 4).is_err());
    }

    #[test]
    fn wide_dictionary_has_unit_columns_and_one_dc() {
        let d = build_dictionary(8, 256).unwrap();
        assert_eq!((d.dim(), d.a_cols()), (64, 256));
        let mut constant = 0;
        for atom in d.atoms() {
            let norm = dot(atom, atom).sqrt();
            assert!((norm - 1.0).abs() <= 1e-12);
            if atom.iter().all(|v| (v - atom[0]).abs() < 1e-12) {
                constant += 1;
            }
        }
        assert_eq!(constant, 1);
    }

    #[test]
    fn construction_is_bit_identical() {
        let a = build_dictionary(16, 96).unwrap();
        let b = build_dictionary(16, 96).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn gram_matches_atoms() {
        let d = build_dictionary(4, 20).unwrap();
        for i in 0..20 {
            for j in 0..20 {
                assert_eq!(d.gram_row(i).unwrap()[j], dot(d.atom(i), d.atom(j)));
            }
        }
    }

    #[test]
    fn bank_covers_admissible_sizes() {
        let bank = DictionaryBank::new(4, 16, 8).unwrap();
        for n in [4, 8, 16] {
            assert_eq!(bank.get(n).unwrap().block_size(), n);
        }
        assert!(matches!(bank.get(32), Err(Error::Configuration(_))));
        assert_eq!(block_sizes(8, 8).unwrap(), vec![8]);
        assert!(block_sizes(8, 4).is_err());
        assert!(block_sizes(6, 12).is_err());
    }

    #[test]
    fn cache_reuses_dictionaries() {
        let cache = DictionaryCache::new();
        let a = cache.get(8, 16).unwrap();
        let b = cache.get(8, 16).unwrap();
        assert!(Arc::ptr_eq(&a, &b));
    }

    #[test]
    fn ceil_sqrt_values() {
        for (x, r) in [(1, 1), (2, 2), (4, 2), (5, 3), (9, 3), (10, 4), (128, 12)] {
            assert_eq!(ceil_sqrt(x), r);
        }
    }
}
