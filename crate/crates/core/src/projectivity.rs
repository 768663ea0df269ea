//! Projectivity analysis of the centre-node neighbourhood: the 16x16
//! reduction matrix built from cylinder additivity plus the conditional
//! activation row, its determinant, and the equivalent alternating-sum
//! singularity criterion used to detect possible phase transitions.

use serde::Serialize;

use crate::dynamics::{
    activation_probability, coalition_term, phi_symmetry_check, symmetry_residual, NeighbourMask,
    PotentialSet,
};
use crate::error::{Error, Result};

/// Relative determinant-nullity threshold: the matrix counts as singular
/// when `|det| < DET_NULLITY_REL_TOL * scale` with `scale` the product of
/// row norms (Hadamard bound), so the test is invariant under rescaling.
pub const DET_NULLITY_REL_TOL: f64 = 1e-9;

/// Absolute threshold under which the alternating sum counts as zero.
pub const ALT_SUM_TOL: f64 = 1e-11;

/// The 16 neighbour subsets enumerated by cardinality, then lexically by
/// sorted element tuple (elements are the 4 strict neighbours in lexical
/// slot order, bit 0 = first slot). Index `c` encodes the INACTIVE set; the
/// enumeration places complements at mirrored positions: `c ^ complement`
/// always pairs `c` with `15 - c`.
pub const SUBSET_MASKS: [u8; 16] = [
    0b0000, 0b0001, 0b0010, 0b0100, 0b1000, 0b0011, 0b0101, 0b1001, 0b0110, 0b1010, 0b1100,
    0b0111, 0b1011, 0b1101, 0b1110, 0b1111,
];

/// Position of each 4-bit mask in [`SUBSET_MASKS`].
pub fn subset_index(mask: NeighbourMask) -> usize {
    const INDEX: [usize; 16] = build_index();
    INDEX[(mask.0 & 0xF) as usize]
}

const fn build_index() -> [usize; 16] {
    let mut index = [0usize; 16];
    let mut c = 0;
    while c < 16 {
        index[SUBSET_MASKS[c] as usize] = c;
        c += 1;
    }
    index
}

/// Conditional probability that the centre node becomes active given the
/// active strict-neighbour set `k_set` (the rest inactive).
pub fn conditional_phi(k_set: NeighbourMask, p: &PotentialSet) -> f64 {
    let exponent = p.u(0) + p.u(1) * k_set.count() as f64 + coalition_term(k_set, p);
    activation_probability(exponent)
}

/// 16x16 reduction matrix: one additivity row per nonempty inactive set
/// (ones at the set and at the set with its last element removed) and a
/// final row of conditional activation probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectivityMatrix {
    pub rows: Vec<Vec<f64>>,
}

pub fn build_projectivity_matrix(p: &PotentialSet) -> ProjectivityMatrix {
    let mut rows = vec![vec![0.0; 16]; 16];
    for c in 1..16 {
        let b = SUBSET_MASKS[c];
        let pivot = 7 - b.leading_zeros() as u8; // highest set bit
        let parent = NeighbourMask(b & !(1 << pivot));
        rows[c - 1][c] = 1.0;
        rows[c - 1][subset_index(parent)] = 1.0;
    }
    for c in 0..16 {
        let inactive = NeighbourMask(SUBSET_MASKS[c]);
        rows[15][c] = conditional_phi(inactive.complement(), p);
    }
    ProjectivityMatrix { rows }
}

/// Determinant together with the Hadamard scale used for nullity checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeterminantResult {
    pub value: f64,
    /// Product of row 2-norms; an upper bound on |det| and the natural
    /// yardstick for declaring the value numerically zero.
    pub scale: f64,
}

impl DeterminantResult {
    pub fn is_null(&self) -> bool {
        self.value.abs() < DET_NULLITY_REL_TOL * self.scale
    }
}

/// LU determinant with partial pivoting. An exactly zero pivot column
/// short-circuits to a determinant of zero.
pub fn determinant(matrix: &[Vec<f64>]) -> Result<DeterminantResult> {
    let n = matrix.len();
    if n == 0 || matrix.iter().any(|r| r.len() != n) {
        return Err(Error::NotSquare);
    }
    let scale = matrix
        .iter()
        .map(|r| r.iter().map(|x| x * x).sum::<f64>().sqrt())
        .product();

    let mut a: Vec<Vec<f64>> = matrix.to_vec();
    let mut sign = 1.0;
    for col in 0..n {
        let pivot_row = (col..n)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .expect("nonempty range");
        if a[pivot_row][col] == 0.0 {
            return Ok(DeterminantResult { value: 0.0, scale });
        }
        if pivot_row != col {
            a.swap(pivot_row, col);
            sign = -sign;
        }
        let pivot = a[col][col];
        for r in col + 1..n {
            let factor = a[r][col] / pivot;
            if factor == 0.0 {
                continue;
            }
            for c in col..n {
                let sub = factor * a[col][c];
                a[r][c] -= sub;
            }
        }
    }
    let value = sign * (0..n).map(|i| a[i][i]).product::<f64>();
    Ok(DeterminantResult { value, scale })
}

/// Alternating sum over the 16 neighbour subsets,
/// `sum_K (-1)^{|inactive|} Phi(K)`; the reduction matrix is singular
/// exactly when this vanishes.
pub fn alternating_sum(p: &PotentialSet) -> f64 {
    let mut sum = 0.0;
    for k_set in NeighbourMask::all() {
        let inactive = k_set.complement().count();
        let sign = if inactive % 2 == 0 { 1.0 } else { -1.0 };
        sum += sign * conditional_phi(k_set, p);
    }
    sum
}

/// Everything the phase-transition criterion needs in one record.
#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub det: f64,
    pub alt_sum: f64,
    pub symmetry_residual: f64,
    pub phi_symmetric: bool,
    pub necessary_condition_met: bool,
    pub sufficient_symmetry_met: bool,
}

/// Builds the reduction matrix and evaluates both singularity routes plus
/// the sufficient symmetry condition.
pub fn phase_transition_report(p: &PotentialSet) -> CriterionReport {
    let matrix = build_projectivity_matrix(p);
    let det = determinant(&matrix.rows).expect("square by construction");
    let alt = alternating_sum(p);
    let residual = symmetry_residual(p);
    let (phi_symmetric, _) = phi_symmetry_check(p);
    let sufficient = residual.abs() < crate::dynamics::SYMMETRY_TOL && phi_symmetric;
    CriterionReport {
        det: det.value,
        alt_sum: alt,
        symmetry_residual: residual,
        phi_symmetric,
        necessary_condition_met: det.is_null(),
        sufficient_symmetry_met: sufficient,
    }
}
