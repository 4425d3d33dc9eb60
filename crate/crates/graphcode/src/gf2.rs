//! Bit-exact linear algebra over GF(2): packed bit vectors, bit matrices,
//! and solving linear systems in which some observations are erased.

use rand::Rng;

const WORD_BITS: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A ternary symbol: a bit, or an erasure.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Ternary {
    Zero,
    One,
    Erased,
}

impl Ternary {
    pub fn from_bit(bit: u8) -> Self {
        match bit {
            0 => Ternary::Zero,
            1 => Ternary::One,
            _ => panic!("bit must be 0 or 1, got {bit}"),
        }
    }

    pub fn bit(self) -> Option<u8> {
        match self {
            Ternary::Zero => Some(0),
            Ternary::One => Some(1),
            Ternary::Erased => None,
        }
    }

    pub fn is_erased(self) -> bool {
        matches!(self, Ternary::Erased)
    }
}

/// A fixed-length vector of bits, packed into machine words.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitVector {
    len: usize,
    words: Vec<u64>,
}

impl BitVector {
    pub fn zeros(len: usize) -> Self {
        Self { len, words: vec![0; words_for(len)] }
    }

    pub fn from_bits(bits: &[u8]) -> Self {
        let mut v = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Samples `len` independent fair bits.
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = Self::zeros(len);
        for i in 0..len {
            if rng.random::<bool>() {
                v.words[i / WORD_BITS] |= 1u64 << (i % WORD_BITS);
            }
        }
        v
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    #[inline]
    pub fn get(&self, i: usize) -> u8 {
        debug_assert!(i < self.len);
        ((self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1) as u8
    }

    #[inline]
    pub fn set(&mut self, i: usize, bit: u8) {
        debug_assert!(i < self.len);
        debug_assert!(bit <= 1, "bit must be 0 or 1");
        let mask = 1u64 << (i % WORD_BITS);
        if bit == 1 {
            self.words[i / WORD_BITS] |= mask;
        } else {
            self.words[i / WORD_BITS] &= !mask;
        }
    }

    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "length mismatch in xor");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn iter_bits(&self) -> impl Iterator<Item = u8> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    pub fn to_bits(&self) -> Vec<u8> {
        self.iter_bits().collect()
    }

    /// Hamming distance to another vector of the same length.
    pub fn distance(&self, other: &BitVector) -> usize {
        assert_eq!(self.len, other.len, "length mismatch in distance");
        self.words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    /// Lexicographic comparison by bit sequence (bit 0 first).
    pub fn lex_lt(&self, other: &BitVector) -> bool {
        debug_assert_eq!(self.len, other.len);
        for i in 0..self.len {
            let (a, b) = (self.get(i), other.get(i));
            if a != b {
                return a < b;
            }
        }
        false
    }
}

impl std::fmt::Debug for BitVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for b in self.iter_bits() {
            write!(f, "{b}")?;
        }
        Ok(())
    }
}

/// A dense bit matrix stored row-major in packed words.
#[derive(Clone, PartialEq, Eq)]
pub struct BitMatrix {
    rows: usize,
    cols: usize,
    stride: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        let stride = words_for(cols);
        Self { rows, cols, stride, words: vec![0; rows * stride] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, 1);
        }
        m
    }

    pub fn from_rows(rows: &[Vec<u8>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        let mut m = Self::zeros(rows.len(), cols);
        for (i, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), cols, "ragged rows");
            for (j, &b) in row.iter().enumerate() {
                m.set(i, j, b);
            }
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u8 {
        debug_assert!(r < self.rows && c < self.cols);
        ((self.words[r * self.stride + c / WORD_BITS] >> (c % WORD_BITS)) & 1) as u8
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, bit: u8) {
        debug_assert!(r < self.rows && c < self.cols);
        debug_assert!(bit <= 1);
        let mask = 1u64 << (c % WORD_BITS);
        let w = &mut self.words[r * self.stride + c / WORD_BITS];
        if bit == 1 {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    fn row_words(&self, r: usize) -> &[u64] {
        &self.words[r * self.stride..(r + 1) * self.stride]
    }

    /// XORs row `r` into the word buffer `acc`.
    fn xor_row_into(&self, r: usize, acc: &mut [u64]) {
        for (a, w) in acc.iter_mut().zip(self.row_words(r)) {
            *a ^= w;
        }
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Horizontal concatenation `[self | right]`.
    pub fn hstack(&self, right: &BitMatrix) -> BitMatrix {
        assert_eq!(self.rows, right.rows, "row mismatch in hstack");
        let mut m = BitMatrix::zeros(self.rows, self.cols + right.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.get(r, c) == 1 {
                    m.set(r, c, 1);
                }
            }
            for c in 0..right.cols {
                if right.get(r, c) == 1 {
                    m.set(r, self.cols + c, 1);
                }
            }
        }
        m
    }

    /// Computes the row-vector product `xᵀ · M`, i.e. the XOR of the rows
    /// of `M` selected by the ones of `x`.
    ///
    /// # Panics
    ///
    /// Panics if `x.len() != self.rows()`.
    pub fn left_mul(&self, x: &BitVector) -> BitVector {
        assert_eq!(
            x.len(),
            self.rows,
            "dimension mismatch: vector length {} vs {} matrix rows",
            x.len(),
            self.rows
        );
        let mut acc = vec![0u64; self.stride];
        for i in 0..self.rows {
            if x.get(i) == 1 {
                self.xor_row_into(i, &mut acc);
            }
        }
        BitVector { len: self.cols, words: acc }
    }

    /// GF(2) row rank, computed on a private copy by Gaussian elimination.
    pub fn rank(&self) -> usize {
        let mut rows: Vec<Vec<u64>> = (0..self.rows).map(|r| self.row_words(r).to_vec()).collect();
        let mut rank = 0;
        for c in 0..self.cols {
            let word = c / WORD_BITS;
            let mask = 1u64 << (c % WORD_BITS);
            let Some(pivot) = (rank..rows.len()).find(|&r| rows[r][word] & mask != 0) else {
                continue;
            };
            rows.swap(rank, pivot);
            let pivot_row = rows[rank].clone();
            for (r, row) in rows.iter_mut().enumerate() {
                if r != rank && row[word] & mask != 0 {
                    for (a, b) in row.iter_mut().zip(&pivot_row) {
                        *a ^= b;
                    }
                }
            }
            rank += 1;
            if rank == rows.len() {
                break;
            }
        }
        rank
    }
}

impl std::fmt::Debug for BitMatrix {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for r in 0..self.rows {
            for c in 0..self.cols {
                write!(f, "{}", self.get(r, c))?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// A vector over {0, 1, erased}, stored as a value mask plus an erasure mask.
#[derive(Clone, PartialEq, Eq)]
pub struct TernaryVector {
    values: BitVector,
    erased: BitVector,
}

impl TernaryVector {
    pub fn zeros(len: usize) -> Self {
        Self { values: BitVector::zeros(len), erased: BitVector::zeros(len) }
    }

    pub fn from_symbols(symbols: &[Ternary]) -> Self {
        let mut v = Self::zeros(symbols.len());
        for (i, &s) in symbols.iter().enumerate() {
            v.set(i, s);
        }
        v
    }

    /// Lifts a plain bit vector: no positions erased.
    pub fn from_bitvector(bits: &BitVector) -> Self {
        Self { values: bits.clone(), erased: BitVector::zeros(bits.len()) }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, i: usize) -> Ternary {
        if self.erased.get(i) == 1 {
            Ternary::Erased
        } else if self.values.get(i) == 1 {
            Ternary::One
        } else {
            Ternary::Zero
        }
    }

    pub fn set(&mut self, i: usize, s: Ternary) {
        match s {
            Ternary::Erased => {
                self.erased.set(i, 1);
                self.values.set(i, 0);
            }
            Ternary::Zero => {
                self.erased.set(i, 0);
                self.values.set(i, 0);
            }
            Ternary::One => {
                self.erased.set(i, 0);
                self.values.set(i, 1);
            }
        }
    }

    pub fn erased_count(&self) -> usize {
        self.erased.count_ones()
    }

    pub fn iter(&self) -> impl Iterator<Item = Ternary> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }
}

impl std::fmt::Debug for TernaryVector {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for s in self.iter() {
            match s {
                Ternary::Zero => write!(f, "0")?,
                Ternary::One => write!(f, "1")?,
                Ternary::Erased => write!(f, "e")?,
            }
        }
        Ok(())
    }
}

/// Outcome of solving `xᵀ·G = observed` over the non-erased positions.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum SolveOutcome {
    /// Exactly one message is consistent with the surviving positions.
    Unique(BitVector),
    /// Two or more messages are consistent.
    Ambiguous,
    /// No message is consistent. Impossible under a pure erasure model,
    /// detected anyway in case a corrupted word is fed in.
    Inconsistent,
}

/// Solves `xᵀ·g = observed` over GF(2) for `x` (length `g.rows()`), using
/// only the positions of `observed` that are not erased.
///
/// Elimination runs on the transposed system (one equation per surviving
/// column of `g`), packed column-major into words; the observed bit rides
/// along as an augmented coefficient.
///
/// # Panics
///
/// Panics if `observed.len() != g.cols()`.
pub fn solve_with_erasures(g: &BitMatrix, observed: &TernaryVector) -> SolveOutcome {
    assert_eq!(
        observed.len(),
        g.cols(),
        "dimension mismatch: observed length {} vs {} matrix columns",
        observed.len(),
        g.cols()
    );
    let k = g.rows();
    // Equation for surviving column j: sum_i x_i g[i][j] = observed[j].
    // Augmented bit stored at position k.
    let width = words_for(k + 1);
    let mut eqs: Vec<Vec<u64>> = Vec::new();
    for j in 0..g.cols() {
        let Some(rhs) = observed.get(j).bit() else { continue };
        let mut row = vec![0u64; width];
        for i in 0..k {
            if g.get(i, j) == 1 {
                row[i / WORD_BITS] |= 1u64 << (i % WORD_BITS);
            }
        }
        if rhs == 1 {
            row[k / WORD_BITS] |= 1u64 << (k % WORD_BITS);
        }
        eqs.push(row);
    }

    // Forward elimination over the first k columns.
    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut next_row = 0;
    for c in 0..k {
        let word = c / WORD_BITS;
        let mask = 1u64 << (c % WORD_BITS);
        let Some(pivot) = (next_row..eqs.len()).find(|&r| eqs[r][word] & mask != 0) else {
            continue;
        };
        eqs.swap(next_row, pivot);
        let pivot_row = eqs[next_row].clone();
        for (r, row) in eqs.iter_mut().enumerate() {
            if r != next_row && row[word] & mask != 0 {
                for (a, b) in row.iter_mut().zip(&pivot_row) {
                    *a ^= b;
                }
            }
        }
        pivot_cols.push(c);
        next_row += 1;
        if next_row == eqs.len() {
            break;
        }
    }

    // A row that is zero on the coefficients but one on the augmented bit
    // certifies inconsistency.
    let aug_word = k / WORD_BITS;
    let aug_mask = 1u64 << (k % WORD_BITS);
    for row in eqs.iter().skip(next_row) {
        let coeff_zero = (0..k).all(|c| row[c / WORD_BITS] & (1u64 << (c % WORD_BITS)) == 0);
        if coeff_zero && row[aug_word] & aug_mask != 0 {
            return SolveOutcome::Inconsistent;
        }
    }

    // Unique iff the surviving columns have full rank k.
    if pivot_cols.len() < k {
        return SolveOutcome::Ambiguous;
    }

    // Rows were fully reduced (eliminated above and below), so each pivot
    // row directly reads off one solution bit.
    let mut x = BitVector::zeros(k);
    for (r, &c) in pivot_cols.iter().enumerate() {
        if eqs[r][aug_word] & aug_mask != 0 {
            x.set(c, 1);
        }
    }
    SolveOutcome::Unique(x)
}
