//! DFT codebook for a reflecting unit set and received-power codeword sweep.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;

use crate::channel::{receive_pilots, CascadeTerms, ChannelVector, LinkBudget, SubbandGrid};
use crate::error::{Error, Result};
use crate::geometry::{rus_elements, RisLayout, RusSpec, Vec3};

/// Oversampled 2D DFT beams for an `n_rows x n_cols` unit set.
///
/// Codeword `(l, p)` (1-based) is stored at index `(l - 1) * O_1 * n_rows + p`.
/// Entries follow the unit-set element order (column-major from the lower
/// left element).
#[derive(Debug, Clone)]
pub struct Codebook {
    pub n_rows: usize,
    pub n_cols: usize,
    pub oversampling: (usize, usize),
    codewords: Vec<Vec<Complex64>>,
}

impl Codebook {
    pub fn len(&self) -> usize {
        self.codewords.len()
    }

    pub fn is_empty(&self) -> bool {
        self.codewords.is_empty()
    }

    /// Number of vertical beams, `O_1 * n_rows`.
    pub fn vertical_beams(&self) -> usize {
        self.oversampling.0 * self.n_rows
    }

    pub fn horizontal_beams(&self) -> usize {
        self.oversampling.1 * self.n_cols
    }

    /// Codeword with 1-based index `n`.
    pub fn codeword(&self, n: usize) -> Result<&[Complex64]> {
        if n == 0 || n > self.len() {
            return Err(Error::IndexOutOfRange {
                index: n,
                len: self.len(),
            });
        }
        Ok(&self.codewords[n - 1])
    }

    pub fn index_of(&self, l: usize, p: usize) -> usize {
        (l - 1) * self.vertical_beams() + p
    }

    /// `(l, p)` for the 1-based codeword index `n`.
    pub fn beam_of(&self, n: usize) -> (usize, usize) {
        let v = self.vertical_beams();
        ((n - 1) / v + 1, (n - 1) % v + 1)
    }

    pub fn iter(&self) -> impl Iterator<Item = &[Complex64]> {
        self.codewords.iter().map(Vec::as_slice)
    }
}

pub fn build_codebook(n_rows: usize, n_cols: usize, o1: usize, o2: usize) -> Result<Codebook> {
    if n_rows == 0 || n_cols == 0 || o1 == 0 || o2 == 0 {
        return Err(Error::InvalidInput("codebook dimensions must be positive".into()));
    }
    let (vb, hb) = (o1 * n_rows, o2 * n_cols);
    let mut codewords = Vec::with_capacity(vb * hb);
    for l in 1..=hb {
        for p in 1..=vb {
            let word = (0..n_cols)
                .flat_map(|q| (0..n_rows).map(move |r| (r, q)))
                .map(|(r, q)| {
                    let frac = (p * r) as f64 / vb as f64 + (l * q) as f64 / hb as f64;
                    Complex64::from_polar(1.0, 2.0 * PI * frac.fract())
                })
                .collect();
            codewords.push(word);
        }
    }
    Ok(Codebook {
        n_rows,
        n_cols,
        oversampling: (o1, o2),
        codewords,
    })
}

/// Outcome of sweeping every codeword once.
#[derive(Debug, Clone)]
pub struct CodewordSweep {
    /// Selected 1-based codeword index.
    pub index: usize,
    /// Wideband received energy `||r||^2` per codeword.
    pub energies: Vec<f64>,
    /// Received pilots per codeword.
    pub receptions: Vec<ChannelVector>,
}

impl CodewordSweep {
    pub fn selected_reception(&self) -> &ChannelVector {
        &self.receptions[self.index - 1]
    }
}

/// Noiseless wideband channel through the unit set for every codeword.
pub fn codeword_channels(terms: &CascadeTerms, codebook: &Codebook, grid: &SubbandGrid) -> Result<Vec<ChannelVector>> {
    codebook.iter().map(|cw| terms.wideband(cw, grid)).collect()
}

/// Argmax of received energy; ties go to the lowest index.
pub fn argmax_energy(energies: &[f64]) -> usize {
    let mut best = 0;
    for (i, &e) in energies.iter().enumerate() {
        if e > energies[best] {
            best = i;
        }
    }
    best + 1
}

/// One pilot reception per codeword, then pick the strongest.
pub fn sweep_channels<R: Rng + ?Sized>(
    channels: &[ChannelVector],
    grid: &SubbandGrid,
    budget: &LinkBudget,
    rng: &mut R,
) -> CodewordSweep {
    let receptions: Vec<ChannelVector> = channels.iter().map(|w| receive_pilots(w, grid, budget, rng)).collect();
    let energies: Vec<f64> = receptions.iter().map(ChannelVector::norm_sqr).collect();
    CodewordSweep {
        index: argmax_energy(&energies),
        energies,
        receptions,
    }
}

#[allow(clippy::too_many_arguments)]
pub fn select_codeword<R: Rng + ?Sized>(
    bs: Vec3,
    ue: Vec3,
    layout: &RisLayout,
    rus: &RusSpec,
    codebook: &Codebook,
    grid: &SubbandGrid,
    budget: &LinkBudget,
    rng: &mut R,
) -> Result<CodewordSweep> {
    if !rus.active {
        return Err(Error::InvalidInput("codeword sweep needs an active unit set".into()));
    }
    let elements = rus_elements(layout, rus)?;
    if elements.len() != codebook.n_rows * codebook.n_cols {
        return Err(Error::LengthMismatch {
            expected: codebook.n_rows * codebook.n_cols,
            found: elements.len(),
        });
    }
    let terms = CascadeTerms::new(bs, ue, layout, &elements, budget)?;
    let channels = codeword_channels(&terms, codebook, grid)?;
    Ok(sweep_channels(&channels, grid, budget, rng))
}
