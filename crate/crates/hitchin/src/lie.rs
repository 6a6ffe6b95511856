//! Static data of the classical series A/B/C/D: standard-representation
//! dimension, invariant degrees, algebra dimension, Pfaffian flag, and the
//! layout of the Hamiltonian coefficient vector.

use std::fmt;

use crate::curves::{monomial_basis, MonomialBasis};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Series {
    A,
    B,
    C,
    D,
}

/// A classical simple Lie type, e.g. `A1`, `C2`, `D2`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct LieType {
    pub series: Series,
    pub rank: usize,
}

impl LieType {
    pub fn new(series: Series, rank: usize) -> Result<LieType> {
        let min_rank = if series == Series::D { 2 } else { 1 };
        if rank < min_rank {
            return Err(Error::UnsupportedRank(format!(
                "{series:?} series needs rank >= {min_rank}, got {rank}"
            )));
        }
        Ok(LieType { series, rank })
    }

    /// Parse the CLI-facing name, e.g. "A1", "D2".
    pub fn parse(name: &str) -> Result<LieType> {
        let mut chars = name.chars();
        let series = match chars.next() {
            Some('A') | Some('a') => Series::A,
            Some('B') | Some('b') => Series::B,
            Some('C') | Some('c') => Series::C,
            Some('D') | Some('d') => Series::D,
            _ => return Err(Error::BadInput(format!("unknown Lie type '{name}'"))),
        };
        let rank: usize = chars
            .as_str()
            .parse()
            .map_err(|_| Error::BadInput(format!("bad rank in Lie type '{name}'")))?;
        LieType::new(series, rank)
    }
}

impl fmt::Display for LieType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{}", self.series, self.rank)
    }
}

/// Integer data of a classical type in its standard representation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ClassicalData {
    /// Dimension of the standard representation (number of spectral sheets
    /// before dropping trivial components).
    pub n: usize,
    /// Degrees of the basis invariants; for D the last entry is the
    /// Pfaffian degree `l`.
    pub degrees: Vec<usize>,
    /// Dimension of the Lie algebra.
    pub dim: usize,
    /// Whether the last invariant is the Pfaffian (series D), entering the
    /// spectral curve as its square.
    pub pfaffian: bool,
}

pub fn classical_data(t: LieType) -> ClassicalData {
    let l = t.rank;
    match t.series {
        Series::A => ClassicalData {
            n: l + 1,
            degrees: (1..=l).map(|i| i + 1).collect(),
            dim: (l + 1) * (l + 1) - 1,
            pfaffian: false,
        },
        Series::B => ClassicalData {
            n: 2 * l + 1,
            degrees: (1..=l).map(|i| 2 * i).collect(),
            dim: l * (2 * l + 1),
            pfaffian: false,
        },
        Series::C => ClassicalData {
            n: 2 * l,
            degrees: (1..=l).map(|i| 2 * i).collect(),
            dim: l * (2 * l + 1),
            pfaffian: false,
        },
        Series::D => {
            let mut degrees: Vec<usize> = (1..l).map(|i| 2 * i).collect();
            degrees.push(l);
            ClassicalData {
                n: 2 * l,
                degrees,
                dim: l * (2 * l - 1),
                pfaffian: true,
            }
        }
    }
}

/// One block of the Hamiltonian vector: the coefficients of a single basis
/// invariant expanded over `monomial_basis(d_i, g)`.
#[derive(Debug, Clone)]
pub struct LayoutBlock {
    /// Degree of the invariant this block expands.
    pub degree: usize,
    pub basis: MonomialBasis,
    /// Offset of the block in the flat Hamiltonian vector.
    pub offset: usize,
    /// Marks the Pfaffian block of series D: the invariant enters the
    /// spectral curve squared.
    pub pfaffian: bool,
}

impl LayoutBlock {
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }
}

/// Flat layout of the `N = dim g * (g-1)` independent Hamiltonians.
#[derive(Debug, Clone)]
pub struct HamiltonianLayout {
    pub lie: LieType,
    pub genus: usize,
    pub blocks: Vec<LayoutBlock>,
    total: usize,
}

impl HamiltonianLayout {
    pub fn len(&self) -> usize {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }
}

pub fn hamiltonian_layout(t: LieType, genus: usize) -> HamiltonianLayout {
    assert!(genus >= 2, "hamiltonian_layout requires genus >= 2");
    let data = classical_data(t);
    let mut blocks = Vec::with_capacity(data.degrees.len());
    let mut offset = 0;
    let last = data.degrees.len() - 1;
    for (i, &d) in data.degrees.iter().enumerate() {
        let basis = monomial_basis(d, genus);
        let len = basis.len();
        blocks.push(LayoutBlock {
            degree: d,
            basis,
            offset,
            pfaffian: data.pfaffian && i == last,
        });
        offset += len;
    }
    debug_assert_eq!(offset, data.dim * (genus - 1));
    HamiltonianLayout {
        lie: t,
        genus,
        blocks,
        total: offset,
    }
}
