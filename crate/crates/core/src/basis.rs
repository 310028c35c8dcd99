//! Eigenpairs of the base operator and projection onto them.
//!
//! Two concrete families are supported, the 1-D Laplacian on `(0, ℓ)` with
//! homogeneous Dirichlet or Neumann data, plus an `Explicit` kind that only
//! carries a user-supplied eigenvalue list (for abstract operators whose
//! coefficients are known directly).

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{simpson_weights, KahanSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BasisKind {
    #[serde(rename = "dirichlet1d")]
    Dirichlet1D,
    #[serde(rename = "neumann1d")]
    Neumann1D,
    Explicit,
}

impl std::fmt::Display for BasisKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            BasisKind::Dirichlet1D => "dirichlet1d",
            BasisKind::Neumann1D => "neumann1d",
            BasisKind::Explicit => "explicit",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EigenMode {
    /// Wavenumber `j` (starts at 0 for Neumann, 1 for Dirichlet).
    pub index: usize,
    pub lambda: f64,
    /// L²-normalization constant `c_j` of `c_j cos(jπx/ℓ)` / `c_j sin(jπx/ℓ)`.
    pub norm_const: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EigenBasis {
    kind: BasisKind,
    domain_length: f64,
    modes: Vec<EigenMode>,
}

impl EigenBasis {
    /// Builds the first `j_max` eigenpairs of `-d²/dx²` on `(0, domain_length)`.
    ///
    /// Eigenvalues are `(jπ/ℓ)²`, so `ℓ = π` gives `λ_j = j²`. Neumann uses
    /// `j = 0, …, j_max-1`; Dirichlet uses `j = 1, …, j_max`.
    pub fn build(kind: BasisKind, domain_length: f64, j_max: usize) -> Result<Self> {
        if j_max == 0 {
            return Err(Error::invalid("j_max", "must be at least 1"));
        }
        if !(domain_length.is_finite() && domain_length > 0.0) {
            return Err(Error::invalid(
                "domain_length",
                format!("must be positive, got {domain_length}"),
            ));
        }
        let first = match kind {
            BasisKind::Neumann1D => 0,
            BasisKind::Dirichlet1D => 1,
            BasisKind::Explicit => {
                return Err(Error::UnsupportedKind(
                    "explicit bases carry no eigenfunctions; use EigenBasis::explicit".into(),
                ))
            }
        };
        let scale = PI / domain_length;
        let modes = (first..first + j_max)
            .map(|j| {
                let norm_const = if j == 0 {
                    (1.0 / domain_length).sqrt()
                } else {
                    (2.0 / domain_length).sqrt()
                };
                let k = j as f64 * scale;
                EigenMode {
                    index: j,
                    lambda: k * k,
                    norm_const,
                }
            })
            .collect();
        Ok(Self {
            kind,
            domain_length,
            modes,
        })
    }

    /// An abstract basis given by its eigenvalues only.
    pub fn explicit(eigenvalues: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::invalid("eigenvalues", "must not be empty"));
        }
        if eigenvalues.iter().any(|l| !l.is_finite() || *l < 0.0) {
            return Err(Error::invalid(
                "eigenvalues",
                "must be finite and nonnegative",
            ));
        }
        if eigenvalues.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::invalid("eigenvalues", "must be nondecreasing"));
        }
        let modes = eigenvalues
            .into_iter()
            .enumerate()
            .map(|(index, lambda)| EigenMode {
                index,
                lambda,
                norm_const: 1.0,
            })
            .collect();
        Ok(Self {
            kind: BasisKind::Explicit,
            domain_length: 1.0,
            modes,
        })
    }

    pub fn kind(&self) -> BasisKind {
        self.kind
    }

    pub fn domain_length(&self) -> f64 {
        self.domain_length
    }

    pub fn j_max(&self) -> usize {
        self.modes.len()
    }

    pub fn modes(&self) -> &[EigenMode] {
        &self.modes
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.modes.iter().map(|m| m.lambda).collect()
    }

    /// Storage position of wavenumber `index`, if the basis holds it.
    pub fn position_of(&self, index: usize) -> Option<usize> {
        let first = self.modes.first()?.index;
        let pos = index.checked_sub(first)?;
        (pos < self.modes.len()).then_some(pos)
    }

    /// Value of the eigenfunction stored at `pos` at the point `x`.
    pub fn eval(&self, pos: usize, x: f64) -> Result<f64> {
        let mode = self.modes.get(pos).ok_or(Error::ModeOutOfRange {
            index: pos,
            len: self.modes.len(),
        })?;
        let arg = mode.index as f64 * PI / self.domain_length * x;
        match self.kind {
            BasisKind::Neumann1D => Ok(mode.norm_const * arg.cos()),
            BasisKind::Dirichlet1D => Ok(mode.norm_const * arg.sin()),
            BasisKind::Explicit => Err(Error::UnsupportedKind(
                "explicit bases cannot evaluate eigenfunctions".into(),
            )),
        }
    }

    /// Uniform grid of `n` points covering `[0, ℓ]` including both ends.
    pub fn grid(&self, n: usize) -> Vec<f64> {
        let h = self.domain_length / (n - 1) as f64;
        (0..n).map(|i| i as f64 * h).collect()
    }

    /// Minimum number of samples accepted by [`project`](Self::project).
    pub fn min_projection_points(&self) -> usize {
        (4 * self.modes.len()).max(4)
    }

    /// Projects samples of `v` on the uniform grid `self.grid(samples.len())`
    /// onto the basis by composite Simpson quadrature.
    pub fn project(&self, samples: &[f64]) -> Result<SpectralField> {
        if self.kind == BasisKind::Explicit {
            return Err(Error::UnsupportedKind(
                "projection is disabled for explicit bases; supply coefficients directly".into(),
            ));
        }
        let required = self.min_projection_points();
        if samples.len() < required {
            return Err(Error::GridTooCoarse {
                points: samples.len(),
                required,
            });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("projection samples"));
        }
        let xs = self.grid(samples.len());
        let weights = simpson_weights(samples.len(), self.domain_length);
        let mut coeffs = Vec::with_capacity(self.modes.len());
        for pos in 0..self.modes.len() {
            let mut acc = KahanSum::new();
            for ((x, v), w) in xs.iter().zip(samples).zip(&weights) {
                acc.add(w * v * self.eval(pos, *x)?);
            }
            coeffs.push(acc.value());
        }
        Ok(SpectralField { coeffs })
    }

    /// Energy of `v` not captured by the truncated projection,
    /// `max(0, ‖v‖² - Σ_j c_j²)`, with `‖v‖²` by the same Simpson rule.
    pub fn truncation_tail(&self, samples: &[f64], field: &SpectralField) -> Result<f64> {
        self.check_len(field)?;
        if samples.len() < 4 {
            return Err(Error::GridTooCoarse {
                points: samples.len(),
                required: 4,
            });
        }
        let weights = simpson_weights(samples.len(), self.domain_length);
        let mut total = KahanSum::new();
        for (v, w) in samples.iter().zip(&weights) {
            total.add(w * v * v);
        }
        let captured = field.l2_norm_squared();
        Ok((total.value() - captured).max(0.0))
    }

    /// Evaluates `Σ_j c_j e_j(x)` at each point of `xs`.
    pub fn reconstruct(&self, field: &SpectralField, xs: &[f64]) -> Result<Vec<f64>> {
        self.check_len(field)?;
        xs.iter()
            .map(|&x| {
                let mut acc = KahanSum::new();
                for (pos, c) in field.coeffs.iter().enumerate() {
                    if *c != 0.0 {
                        acc.add(c * self.eval(pos, x)?);
                    }
                }
                Ok(acc.value())
            })
            .collect()
    }

    /// Truncated `H^s` norm `(Σ_j λ_j^{2s} c_j²)^{1/2}`.
    pub fn hs_norm(&self, field: &SpectralField, s: f64) -> Result<f64> {
        if !(s.is_finite() && s > 0.0) {
            return Err(Error::invalid("s", format!("hs_norm needs s > 0, got {s}")));
        }
        self.check_len(field)?;
        let mut acc = KahanSum::new();
        for (mode, c) in self.modes.iter().zip(&field.coeffs) {
            let weight = if mode.lambda == 0.0 {
                0.0
            } else {
                mode.lambda.powf(2.0 * s)
            };
            acc.add(weight * c * c);
        }
        Ok(acc.value().sqrt())
    }

    pub(crate) fn check_len(&self, field: &SpectralField) -> Result<()> {
        if field.len() != self.modes.len() {
            return Err(Error::BasisMismatch(format!(
                "field has {} coefficients, basis has {} modes",
                field.len(),
                self.modes.len()
            )));
        }
        Ok(())
    }
}

/// Coefficients `⟨v, e_j⟩` of a spatial function in an [`EigenBasis`],
/// stored by mode position.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SpectralField {
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::NonFinite("spectral coefficients"));
        }
        Ok(Self { coeffs })
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            coeffs: vec![0.0; len],
        }
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn get(&self, pos: usize) -> f64 {
        self.coeffs.get(pos).copied().unwrap_or(0.0)
    }

    pub fn l2_norm_squared(&self) -> f64 {
        let mut acc = KahanSum::new();
        for c in &self.coeffs {
            acc.add(c * c);
        }
        acc.value()
    }

    pub fn l2_norm(&self) -> f64 {
        self.l2_norm_squared().sqrt()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DENSE: usize = 4001;

    fn sample<F: Fn(f64) -> f64>(basis: &EigenBasis, f: F) -> Vec<f64> {
        basis.grid(DENSE).into_iter().map(f).collect()
    }

    #[test]
    fn dirichlet_eigenvalues_on_pi() {
        let b = EigenBasis::build(BasisKind::Dirichlet1D, PI, 3).unwrap();
        assert_eq!(b.eigenvalues(), vec![1.0, 4.0, 9.0]);
    }

    #[test]
    fn neumann_eigenvalues_on_pi() {
        let b = EigenBasis::build(BasisKind::Neumann1D, PI, 3).unwrap();
        assert_eq!(b.eigenvalues(), vec![0.0, 1.0, 4.0]);
    }

    #[test]
    fn single_dirichlet_mode_normalization() {
        let b = EigenBasis::build(BasisKind::Dirichlet1D, PI, 1).unwrap();
        assert_eq!(b.eigenvalues(), vec![1.0]);
        assert!((b.modes()[0].norm_const - (2.0 / PI).sqrt()).abs() < 1e-15);
    }

    #[test]
    fn eigenvalues_scale_with_domain_length() {
        let b = EigenBasis::build(BasisKind::Dirichlet1D, 2.0 * PI, 2).unwrap();
        assert_eq!(b.eigenvalues(), vec![0.25, 1.0]);
    }

    #[test]
    fn build_rejects_bad_arguments() {
        assert!(matches!(
            EigenBasis::build(BasisKind::Neumann1D, PI, 0),
            Err(Error::InvalidArgument { .. })
        ));
        assert!(EigenBasis::build(BasisKind::Neumann1D, -1.0, 3).is_err());
        assert!(matches!(
            EigenBasis::build(BasisKind::Explicit, PI, 3),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn explicit_basis_validation() {
        assert!(EigenBasis::explicit(vec![0.0, 2.0, 2.0, 7.5]).is_ok());
        assert!(EigenBasis::explicit(vec![3.0, 1.0]).is_err());
        assert!(EigenBasis::explicit(vec![-1.0]).is_err());
        let b = EigenBasis::explicit(vec![1.0]).unwrap();
        assert!(matches!(
            b.project(&[0.0; 8]),
            Err(Error::UnsupportedKind(_))
        ));
    }

    #[test]
    fn projection_recovers_single_mode() {
        let b = EigenBasis::build(BasisKind::Dirichlet1D, PI, 5).unwrap();
        let v = sample(&b, |x| b.eval(1, x).unwrap());
        let field = b.project(&v).unwrap();
        for (pos, c) in field.coeffs().iter().enumerate() {
            let expected = if pos == 1 { 1.0 } else { 0.0 };
            assert!((c - expected).abs() < 1e-8, "pos {pos}: {c}");
        }
    }

    #[test]
    fn projection_of_zero_is_zero() {
        let b = EigenBasis::build(BasisKind::Neumann1D, PI, 4).unwrap();
        let field = b.project(&vec![0.0; 64]).unwrap();
        assert!(field.coeffs().iter().all(|c| *c == 0.0));
    }

    #[test]
    fn projection_of_constant_on_neumann() {
        let b = EigenBasis::build(BasisKind::Neumann1D, PI, 4).unwrap();
        let field = b.project(&vec![1.0; DENSE]).unwrap();
        // Oracle: ∫_0^π 1/√π dx = √π, computed independently by the trapezoid rule.
        let n = 200_001;
        let h = PI / (n - 1) as f64;
        let oracle: f64 = (0..n)
            .map(|i| if i == 0 || i == n - 1 { 0.5 } else { 1.0 } * h / PI.sqrt())
            .sum();
        assert!((oracle - PI.sqrt()).abs() < 1e-10);
        assert!((field.get(0) - oracle).abs() < 1e-10);
        for pos in 1..4 {
            assert!(field.get(pos).abs() < 1e-10);
        }
    }

    #[test]
    fn projection_errors() {
        let b = EigenBasis::build(BasisKind::Neumann1D, PI, 4).unwrap();
        assert!(matches!(
            b.project(&[1.0; 15]),
            Err(Error::GridTooCoarse { required: 16, .. })
        ));
        let mut v = vec![0.0; 32];
        v[3] = f64::NAN;
        assert!(matches!(b.project(&v), Err(Error::NonFinite(_))));
    }

    #[test]
    fn orthonormality_matrix_is_identity() {
        for kind in [BasisKind::Neumann1D, BasisKind::Dirichlet1D] {
            let b = EigenBasis::build(kind, PI, 8).unwrap();
            for i in 0..8 {
                let v = sample(&b, |x| b.eval(i, x).unwrap());
                let field = b.project(&v).unwrap();
                for j in 0..8 {
                    let expected = if i == j { 1.0 } else { 0.0 };
                    assert!((field.get(j) - expected).abs() < 1e-8, "{kind} ({i},{j})");
                }
            }
        }
    }

    #[test]
    fn parseval_on_smooth_function() {
        let b = EigenBasis::build(BasisKind::Dirichlet1D, PI, 12).unwrap();
        let v = sample(&b, |x| x * (PI - x) * (1.0 + 0.3 * x.cos()));
        let field = b.project(&v).unwrap();
        let recon = b.reconstruct(&field, &b.grid(DENSE)).unwrap();
        let w = simpson_weights(DENSE, PI);
        let recon_norm_sq: f64 = recon.iter().zip(&w).map(|(r, w)| w * r * r).sum();
        let rel = (field.l2_norm_squared() - recon_norm_sq).abs() / recon_norm_sq;
        assert!(rel < 1e-10, "rel = {rel}");
        let tail = b.truncation_tail(&v, &field).unwrap();
        assert!(tail >= 0.0 && tail < 1e-3 * field.l2_norm_squared());
    }

    #[test]
    fn hs_norm_examples() {
        let d = EigenBasis::build(BasisKind::Dirichlet1D, PI, 3).unwrap();
        let n = EigenBasis::build(BasisKind::Neumann1D, PI, 3).unwrap();
        let e0 = SpectralField::new(vec![1.0, 0.0, 0.0]).unwrap();
        for s in [0.1, 0.5, 2.0] {
            assert_eq!(d.hs_norm(&e0, s).unwrap(), 1.0);
        }
        let e1 = SpectralField::new(vec![0.0, 1.0, 0.0]).unwrap();
        assert_eq!(n.hs_norm(&e1, 0.5).unwrap(), 1.0);
        let e2 = SpectralField::new(vec![0.0, 0.0, 1.0]).unwrap();
        assert!((d.hs_norm(&e2, 1.0).unwrap() - 9.0).abs() < 1e-14);
    }

    #[test]
    fn hs_norm_rejects_nonpositive_s_and_mismatch() {
        let d = EigenBasis::build(BasisKind::Dirichlet1D, PI, 3).unwrap();
        let f = SpectralField::zeros(3);
        assert!(d.hs_norm(&f, -0.5).is_err());
        assert!(d.hs_norm(&f, 0.0).is_err());
        assert!(matches!(
            d.hs_norm(&SpectralField::zeros(2), 1.0),
            Err(Error::BasisMismatch(_))
        ));
    }

    #[test]
    fn hs_norm_monotone_in_truncation() {
        let coeffs: Vec<f64> = (0..10).map(|j| 1.0 / (1.0 + j as f64)).collect();
        let mut prev = 0.0;
        for j_max in 1..=10 {
            let b = EigenBasis::build(BasisKind::Dirichlet1D, PI, j_max).unwrap();
            let f = SpectralField::new(coeffs[..j_max].to_vec()).unwrap();
            let v = b.hs_norm(&f, 0.7).unwrap();
            assert!(v >= prev);
            prev = v;
        }
    }

    #[test]
    fn position_lookup() {
        let d = EigenBasis::build(BasisKind::Dirichlet1D, PI, 4).unwrap();
        assert_eq!(d.position_of(0), None);
        assert_eq!(d.position_of(1), Some(0));
        assert_eq!(d.position_of(4), Some(3));
        assert_eq!(d.position_of(5), None);
        let n = EigenBasis::build(BasisKind::Neumann1D, PI, 4).unwrap();
        assert_eq!(n.position_of(0), Some(0));
        assert_eq!(n.position_of(4), None);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn single_mode_hs_norm_strictly_increasing(j in 2usize..8, c in 0.1f64..5.0, s in 0.05f64..2.0, ds in 0.01f64..1.0) {
                let b = EigenBasis::build(BasisKind::Dirichlet1D, PI, 8).unwrap();
                let mut coeffs = vec![0.0; 8];
                coeffs[j - 1] = c;
                let f = SpectralField::new(coeffs).unwrap();
                prop_assert!(b.hs_norm(&f, s + ds).unwrap() > b.hs_norm(&f, s).unwrap());
            }
        }
    }
}
