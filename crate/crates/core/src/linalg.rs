//! Dense complex matrices and interferometer-mesh constructors.
//!
//! A mesh is a product of 2×2 SU(2) blocks, each acting on a pair of adjacent
//! modes `(k, k + 1)` and leaving every other mode untouched. Products are
//! written left to right as usual, so the rightmost factor acts first.
//! [`MeshSpec`] stores its blocks in *application order*: `blocks[0]` is the
//! rightmost factor. Use [`MeshSpec::from_product`] to build a mesh from the
//! factors in the order they appear in a written product.

use std::ops::{Index, IndexMut, Mul};

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Tolerance for unitarity checks.
pub const UNITARY_TOL: f64 = 1e-12;

const ZERO: Complex64 = Complex64::new(0.0, 0.0);
const ONE: Complex64 = Complex64::new(1.0, 0.0);

/// Dense row-major complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim, dim);
        for k in 0..dim {
            m.data[k * dim + k] = ONE;
        }
        m
    }

    /// Builds a matrix from row-major complex entries.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite("matrix entry".into()));
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a real matrix from row-major entries.
    pub fn from_real(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_vec(rows, cols, data.iter().map(|&x| Complex64::new(x, 0.0)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        t
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        let mut t = self.transpose();
        t.data.iter_mut().for_each(|z| *z = z.conj());
        t
    }

    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.cols != rhs.rows {
            return Err(Error::Dimension(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, rhs.rows, rhs.cols
            )));
        }
        let mut out = Self::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[r * self.cols + k];
                if a == ZERO {
                    continue;
                }
                let rhs_row = &rhs.data[k * rhs.cols..(k + 1) * rhs.cols];
                let out_row = &mut out.data[r * rhs.cols..(r + 1) * rhs.cols];
                for (o, b) in out_row.iter_mut().zip(rhs_row) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    /// `‖U·U† − I‖_max`, or infinity for non-square matrices.
    pub fn unitarity_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let prod = self.matmul(&self.adjoint()).expect("square matrices always multiply");
        prod.max_abs_diff(&Self::identity(self.rows))
    }

    pub fn is_unitary(&self) -> bool {
        self.unitarity_defect() <= UNITARY_TOL
    }

    /// Largest absolute imaginary part of any entry.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Entrywise squared modulus, row-major.
    pub fn abs_squared(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.norm_sqr()).collect()
    }

    /// Block-diagonal sum `self ⊕ I_extra`.
    pub fn direct_sum_identity(&self, extra: usize) -> Self {
        assert!(self.is_square());
        let dim = self.rows + extra;
        let mut out = Self::identity(dim);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[r * dim + c] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Left-multiplies in place by a 2×2 block acting on rows `k` and `k + 1`.
    fn apply_block_left(&mut self, k: usize, b: &[[Complex64; 2]; 2]) {
        let cols = self.cols;
        for c in 0..cols {
            let top = self.data[k * cols + c];
            let bottom = self.data[(k + 1) * cols + c];
            self.data[k * cols + c] = b[0][0] * top + b[0][1] * bottom;
            self.data[(k + 1) * cols + c] = b[1][0] * top + b[1][1] * bottom;
        }
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;

    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of range");
        &mut self.data[r * self.cols + c]
    }
}

impl Mul for &ComplexMatrix {
    type Output = ComplexMatrix;

    fn mul(self, rhs: &ComplexMatrix) -> ComplexMatrix {
        self.matmul(rhs).expect("matrix dimensions must agree")
    }
}

/// One Mach–Zehnder stage: an SU(2) block on modes `(upper, upper + 1)`.
///
/// Mode indices are 0-based; the block acting on the written pair `(1,2)`
/// has `upper == 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Su2Block {
    pub theta: f64,
    pub phi1: f64,
    pub phi2: f64,
    pub upper: usize,
}

impl Su2Block {
    pub fn new(theta: f64, phi1: f64, phi2: f64, upper: usize) -> Self {
        Self {
            theta,
            phi1,
            phi2,
            upper,
        }
    }

    /// Block with both phases zero, i.e. a real orthogonal 2×2 map.
    pub fn real(theta: f64, upper: usize) -> Self {
        Self::new(theta, 0.0, 0.0, upper)
    }

    pub fn pair(&self) -> (usize, usize) {
        (self.upper, self.upper + 1)
    }

    fn entries(&self) -> [[Complex64; 2]; 2] {
        let (s, c) = self.theta.sin_cos();
        let e1 = Complex64::from_polar(1.0, self.phi1);
        let e2 = Complex64::from_polar(1.0, self.phi2);
        [[e1 * s, e2 * c], [e2.conj() * c, -e1.conj() * s]]
    }
}

/// The 2×2 matrix `[[e^{iΦ₁} sinΘ, e^{iΦ₂} cosΘ], [e^{−iΦ₂} cosΘ, −e^{−iΦ₁} sinΘ]]`.
pub fn su2_block_matrix(block: &Su2Block) -> ComplexMatrix {
    let e = block.entries();
    ComplexMatrix::from_vec(2, 2, vec![e[0][0], e[0][1], e[1][0], e[1][1]]).expect("finite angles give finite entries")
}

/// Embeds `block` into a `dim × dim` identity.
pub fn embed_block(block: &Su2Block, dim: usize) -> Result<ComplexMatrix> {
    check_block(block, dim)?;
    let mut m = ComplexMatrix::identity(dim);
    let e = block.entries();
    let k = block.upper;
    m[(k, k)] = e[0][0];
    m[(k, k + 1)] = e[0][1];
    m[(k + 1, k)] = e[1][0];
    m[(k + 1, k + 1)] = e[1][1];
    Ok(m)
}

fn check_block(block: &Su2Block, dim: usize) -> Result<()> {
    if block.upper + 1 >= dim {
        return Err(Error::Dimension(format!(
            "block on modes ({}, {}) does not fit {dim} modes",
            block.upper,
            block.upper + 1
        )));
    }
    Ok(())
}

/// An ordered list of SU(2) blocks over `dim` modes, stored in application
/// order (first element acts first).
#[derive(Debug, Clone, PartialEq)]
pub struct MeshSpec {
    dim: usize,
    blocks: Vec<Su2Block>,
}

impl MeshSpec {
    /// Builds a mesh from blocks in application order.
    pub fn new(dim: usize, blocks: Vec<Su2Block>) -> Result<Self> {
        for b in &blocks {
            check_block(b, dim)?;
        }
        Ok(Self { dim, blocks })
    }

    /// Builds a mesh from the factors of a written product `F₁·F₂·…·F_m`
    /// (so `F_m` acts first).
    pub fn from_product(dim: usize, factors: &[Su2Block]) -> Result<Self> {
        Self::new(dim, factors.iter().rev().copied().collect())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[Su2Block] {
        &self.blocks
    }

    /// Four-mode rectangular mesh
    /// `u⁽¹²⁾[θ₁]·u⁽³⁴⁾[θ₂]·u⁽²³⁾[θ₃]·u⁽¹²⁾[θ₄]·u⁽³⁴⁾[θ₅]·u⁽²³⁾[θ₆]` with zero phases.
    pub fn rectangular4(theta: [f64; 6]) -> Self {
        let uppers = [0, 2, 1, 0, 2, 1];
        let factors: Vec<_> = theta.iter().zip(uppers).map(|(&t, k)| Su2Block::real(t, k)).collect();
        Self::from_product(4, &factors).expect("fixed layout fits four modes")
    }

    /// Four-mode triangular mesh `u⁽²³⁾[θ₁]·u⁽¹²⁾[θ₂]·u⁽³⁴⁾[θ₃]` with zero phases.
    pub fn triangular4(theta: [f64; 3]) -> Self {
        let factors = [
            Su2Block::real(theta[0], 1),
            Su2Block::real(theta[1], 0),
            Su2Block::real(theta[2], 2),
        ];
        Self::from_product(4, &factors).expect("fixed layout fits four modes")
    }

    /// Real rectangular mesh over the first `modes` of `dim` modes.
    ///
    /// The written product lists `modes` columns left to right; column `c`
    /// holds the blocks on pairs `(k, k+1)` with `k ≡ c (mod 2)`. This gives
    /// `modes·(modes−1)/2` blocks and reduces to [`MeshSpec::rectangular4`]
    /// for four modes.
    pub fn rectangular(dim: usize, modes: usize, theta: &[f64]) -> Result<Self> {
        if modes > dim {
            return Err(Error::Dimension(format!("{modes} mesh modes exceed dimension {dim}")));
        }
        let expected = rectangular_block_count(modes);
        if theta.len() != expected {
            return Err(Error::InvalidArgument(format!(
                "a {modes}-mode rectangular mesh takes {expected} angles, got {}",
                theta.len()
            )));
        }
        let mut factors = Vec::with_capacity(expected);
        let mut angles = theta.iter();
        for c in 0..modes {
            let mut k = c % 2;
            while k + 1 < modes {
                factors.push(Su2Block::real(*angles.next().expect("count checked"), k));
                k += 2;
            }
        }
        Self::from_product(dim, &factors)
    }
}

/// Number of blocks in a rectangular mesh over `modes` modes.
pub fn rectangular_block_count(modes: usize) -> usize {
    modes * modes.saturating_sub(1) / 2
}

/// Multiplies out the mesh. Blocks act in stored order, so the result is
/// `E(blocks[m−1]) · … · E(blocks[0])`.
pub fn compose_mesh(spec: &MeshSpec) -> ComplexMatrix {
    let mut m = ComplexMatrix::identity(spec.dim);
    for b in &spec.blocks {
        m.apply_block_left(b.upper, &b.entries());
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2, FRAC_PI_4};

    fn real(m: &ComplexMatrix) -> Vec<f64> {
        m.as_slice().iter().map(|z| z.re).collect()
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
    }

    #[test]
    fn su2_block_special_angles() {
        let swap = su2_block_matrix(&Su2Block::real(0.0, 0));
        assert!(close(&real(&swap), &[0.0, 1.0, 1.0, 0.0], 1e-15));

        let z = su2_block_matrix(&Su2Block::real(FRAC_PI_2, 0));
        assert!(close(&real(&z), &[1.0, 0.0, 0.0, -1.0], 1e-15));

        let h = su2_block_matrix(&Su2Block::real(FRAC_PI_4, 0));
        let r = FRAC_1_SQRT_2;
        assert!(close(&real(&h), &[r, r, r, -r], 1e-15));
    }

    #[test]
    fn su2_block_with_phases_is_unitary() {
        let m = su2_block_matrix(&Su2Block::new(0.7, 1.3, -2.1, 0));
        assert!(m.is_unitary());
        assert!(m.max_imag() > 0.1);
    }

    #[test]
    fn embed_swap_in_middle() {
        let m = embed_block(&Su2Block::real(0.0, 1), 4).unwrap();
        #[rustfmt::skip]
        let expected = [
            1.0, 0.0, 0.0, 0.0,
            0.0, 0.0, 1.0, 0.0,
            0.0, 1.0, 0.0, 0.0,
            0.0, 0.0, 0.0, 1.0,
        ];
        assert!(close(&real(&m), &expected, 0.0));
    }

    #[test]
    fn embed_last_pair_phase_flip() {
        let m = embed_block(&Su2Block::real(FRAC_PI_2, 2), 4).unwrap();
        let diag: Vec<f64> = (0..4).map(|k| m[(k, k)].re).collect();
        assert!(close(&diag, &[1.0, 1.0, 1.0, -1.0], 1e-15));
        assert!(m.is_unitary());
    }

    #[test]
    fn embed_out_of_range_is_dimension_error() {
        let err = embed_block(&Su2Block::real(0.3, 3), 4).unwrap_err();
        assert!(matches!(err, Error::Dimension(_)));
        assert!(MeshSpec::new(3, vec![Su2Block::real(0.0, 2)]).is_err());
    }

    #[test]
    fn empty_mesh_is_identity() {
        let spec = MeshSpec::new(4, vec![]).unwrap();
        assert_eq!(compose_mesh(&spec), ComplexMatrix::identity(4));
    }

    #[test]
    fn triangular_zero_angles_permutation() {
        // u23[0]·u12[0]·u34[0] multiplied out by hand: e1→e3, e2→e1, e3→e4, e4→e2.
        let m = compose_mesh(&MeshSpec::triangular4([0.0; 3]));
        let image = |k: usize| (0..4).find(|&r| (m[(r, k)].re - 1.0).abs() < 1e-15).unwrap();
        assert_eq!([image(0), image(1), image(2), image(3)], [2, 0, 3, 1]);
        assert!(m.is_unitary());
    }

    #[test]
    fn composition_matches_explicit_products() {
        let theta = [0.3, -1.1, 2.4, 0.8, 1.9, -0.2];
        let spec = MeshSpec::rectangular4(theta);
        let mut explicit = ComplexMatrix::identity(4);
        for b in spec.blocks() {
            explicit = &embed_block(b, 4).unwrap() * &explicit;
        }
        assert!(compose_mesh(&spec).max_abs_diff(&explicit) <= 1e-14);
    }

    #[test]
    fn general_rectangular_reduces_to_four_mode_layout() {
        let theta = [0.3, -1.1, 2.4, 0.8, 1.9, -0.2];
        let a = compose_mesh(&MeshSpec::rectangular4(theta));
        let b = compose_mesh(&MeshSpec::rectangular(4, 4, &theta).unwrap());
        assert!(a.max_abs_diff(&b) == 0.0);
        assert_eq!(rectangular_block_count(5), 10);
        assert!(MeshSpec::rectangular(4, 3, &[0.1; 2]).is_err());
    }

    #[test]
    fn direct_sum_keeps_spectators() {
        let u = compose_mesh(&MeshSpec::rectangular(3, 3, &[0.4, 1.0, 2.0]).unwrap());
        let padded = u.direct_sum_identity(1);
        assert_eq!(padded.rows(), 4);
        assert_eq!(padded[(3, 3)], ONE);
        assert_eq!(padded[(3, 0)], ZERO);
        assert!(padded.is_unitary());
    }
}
