//! Per-observation quadratic losses from a polynomial score basis.
//!
//! The detector models the log-density gradient (the score) of the data as
//! a linear combination `θᵀ ∇Ψ(x)` of basis-function gradients. Comparing a
//! model score against the unknown sampling score would normally require the
//! sampling density, but integration by parts (Green's first identity)
//! turns the Fisher divergence between them into an expectation of
//!
//! ```text
//! ℓ_x(θ) = ½ θᵀ A(x) θ − b(x)ᵀ θ,   A(x) = ∇Ψ(x) ∇Ψ(x)ᵀ,   b(x) = −ΔΨ(x),
//! ```
//!
//! up to an additive constant independent of `θ`. Each observation therefore
//! yields one quadratic loss computable without knowing the density — the
//! exact shape the forecasters consume. `A(x)` is a Gram matrix of `n`
//! gradient columns, hence PSD of rank at most `n`.
//!
//! The default basis is polynomial of degree 2 — all coordinates, their
//! squares, and their pairwise products — which spans the scores of
//! arbitrary (including correlated) Gaussians. A constant basis function is
//! deliberately excluded: its gradient and Laplacian both vanish, so it
//! would only pad the parameter space with an unidentifiable coordinate.

use nalgebra::{DMatrix, DVector};

use crate::quadloss::QuadraticLoss;
use crate::{Error, Result};

/// One basis monomial of degree at most 2.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Monomial {
    /// `x_i`
    Linear(usize),
    /// `x_i²`
    Square(usize),
    /// `x_i · x_j` with `i < j`
    Cross(usize, usize),
}

/// An ordered polynomial basis over `n` input variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BasisSpec {
    input_dim: usize,
    degree: usize,
    monomials: Vec<Monomial>,
}

impl BasisSpec {
    /// Number of input variables `n`.
    pub fn input_dim(&self) -> usize {
        self.input_dim
    }

    /// Number of basis functions `d` — the forecasters' parameter dimension.
    pub fn param_dim(&self) -> usize {
        self.monomials.len()
    }

    /// Polynomial degree (1 or 2).
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// Short human-readable form, e.g. `poly2(n=3, d=9)`.
    pub fn describe(&self) -> String {
        format!(
            "poly{}(n={}, d={})",
            self.degree,
            self.input_dim,
            self.param_dim()
        )
    }

    fn check_input(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.input_dim,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Analytic gradient and Laplacian of every basis function at `x`.
    pub fn eval_derivatives(&self, x: &DVector<f64>) -> Result<FeatureDerivatives> {
        self.check_input(x)?;
        let d = self.param_dim();
        let n = self.input_dim;
        let mut grad = DMatrix::zeros(d, n);
        let mut laplacian = DVector::zeros(d);
        for (row, monomial) in self.monomials.iter().enumerate() {
            match *monomial {
                Monomial::Linear(i) => {
                    grad[(row, i)] = 1.0;
                }
                Monomial::Square(i) => {
                    grad[(row, i)] = 2.0 * x[i];
                    laplacian[row] = 2.0;
                }
                Monomial::Cross(i, j) => {
                    grad[(row, i)] = x[j];
                    grad[(row, j)] = x[i];
                }
            }
        }
        Ok(FeatureDerivatives { grad, laplacian })
    }

    /// The observation's quadratic loss: `A = ∇Ψ ∇Ψᵀ`, `b = −ΔΨ`.
    pub fn build_loss(&self, x: &DVector<f64>) -> Result<QuadraticLoss> {
        let derivs = self.eval_derivatives(x)?;
        let a = &derivs.grad * derivs.grad.transpose();
        // Gram matrices are PSD by construction; skip the eigenvalue check.
        Ok(QuadraticLoss::from_gram(a, -derivs.laplacian))
    }
}

/// Gradient matrix (row `i` = gradient of basis function `i`) and Laplacian
/// vector of a basis evaluated at one point.
#[derive(Debug, Clone)]
pub struct FeatureDerivatives {
    /// `d × n` matrix `∇Ψ(x)`.
    pub grad: DMatrix<f64>,
    /// `d`-vector `ΔΨ(x)`.
    pub laplacian: DVector<f64>,
}

/// Polynomial basis of the given degree over `n` variables.
///
/// Degree 1 is the `n` coordinates. Degree 2 appends the `n` squares and
/// the `n(n−1)/2` pairwise products in lexicographic order, for
/// `d = 2n + n(n−1)/2` functions in total, ordered
/// `[x_1, …, x_n, x_1², …, x_n², x_1 x_2, x_1 x_3, …, x_{n−1} x_n]`.
pub fn poly_basis(n: usize, degree: usize) -> Result<BasisSpec> {
    if n < 1 {
        return Err(Error::InvalidArgument(
            "basis needs at least one input variable".to_string(),
        ));
    }
    if !(1..=2).contains(&degree) {
        return Err(Error::InvalidArgument(format!(
            "only polynomial degrees 1 and 2 are supported, got {degree}"
        )));
    }
    let mut monomials: Vec<Monomial> = (0..n).map(Monomial::Linear).collect();
    if degree == 2 {
        monomials.extend((0..n).map(Monomial::Square));
        for i in 0..n {
            for j in i + 1..n {
                monomials.push(Monomial::Cross(i, j));
            }
        }
    }
    Ok(BasisSpec {
        input_dim: n,
        degree,
        monomials,
    })
}
