use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, CMat, HermitianEig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn matrix(self) -> CMat {
        let o = Complex64::new(0.0, 0.0);
        let one = Complex64::new(1.0, 0.0);
        let i = Complex64::new(0.0, 1.0);
        let e = match self {
            Pauli::I => [one, o, o, one],
            Pauli::X => [o, one, one, o],
            Pauli::Y => [o, -i, i, o],
            Pauli::Z => [one, o, o, -one],
        };
        CMat::from_row_slice(2, 2, &e)
    }

    pub fn from_char(c: char) -> Result<Self> {
        match c.to_ascii_lowercase() {
            'i' => Ok(Pauli::I),
            'x' => Ok(Pauli::X),
            'y' => Ok(Pauli::Y),
            'z' => Ok(Pauli::Z),
            _ => Err(Error::InvalidParameter(format!("unknown Pauli axis '{c}'"))),
        }
    }
}

/// coeff * prod_k sigma^{p_k}_{site_k}; coeff in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PauliTerm {
    pub coeff: f64,
    pub factors: Vec<(usize, Pauli)>,
}

impl PauliTerm {
    pub fn new(coeff: f64, factors: Vec<(usize, Pauli)>) -> Self {
        PauliTerm { coeff, factors }
    }

    /// Product of spin-1/2 operators I = sigma/2 on the given sites.
    pub fn spin(coeff: f64, factors: Vec<(usize, Pauli)>) -> Self {
        let scale = 0.5f64.powi(factors.len() as i32);
        PauliTerm { coeff: coeff * scale, factors }
    }
}

#[derive(Debug, Clone)]
pub struct HamiltonianSpec {
    sites: usize,
    terms: Vec<PauliTerm>,
    matrix: CMat,
}

impl HamiltonianSpec {
    /// Site 0 is the leftmost Kronecker factor.
    pub fn from_terms(sites: usize, terms: Vec<PauliTerm>) -> Result<Self> {
        if sites == 0 || sites > 10 {
            return Err(Error::InvalidParameter(format!("site count {sites} outside 1..=10")));
        }
        let dim = 1usize << sites;
        let mut matrix = CMat::zeros(dim, dim);
        for (t, term) in terms.iter().enumerate() {
            if !term.coeff.is_finite() {
                return Err(Error::NonFinite("Hamiltonian coefficient"));
            }
            let mut ops = vec![Pauli::I; sites];
            for &(site, p) in &term.factors {
                if site >= sites {
                    return Err(Error::InvalidParameter(format!(
                        "term {t} acts on site {site} but there are {sites} sites"
                    )));
                }
                if ops[site] != Pauli::I {
                    return Err(Error::InvalidParameter(format!("term {t} repeats site {site}")));
                }
                ops[site] = p;
            }
            let mut m = CMat::identity(1, 1);
            for p in ops {
                m = linalg::kron(&m, &p.matrix());
            }
            matrix += m * Complex64::new(term.coeff, 0.0);
        }
        Ok(HamiltonianSpec { sites, terms, matrix })
    }

    /// Wraps an explicit Hermitian matrix; the site count is log2 of the
    /// dimension when that is integral, otherwise zero.
    pub fn from_matrix(matrix: CMat) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() {
            return Err(Error::NotSquare { rows: matrix.nrows(), cols: matrix.ncols() });
        }
        linalg::check_finite(&matrix, "Hamiltonian")?;
        let residual = linalg::hermiticity_residual(&matrix);
        if residual > 1e-12 {
            return Err(Error::NotHermitian { residual });
        }
        let d = matrix.nrows();
        let sites = if d.is_power_of_two() { d.trailing_zeros() as usize } else { 0 };
        Ok(HamiltonianSpec { sites, terms: Vec::new(), matrix })
    }

    pub fn zero(sites: usize) -> Result<Self> {
        Self::from_terms(sites, Vec::new())
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn sites(&self) -> usize {
        self.sites
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn matrix(&self) -> &CMat {
        &self.matrix
    }

    pub fn eigen(&self) -> Result<HermitianEig> {
        linalg::eig_hermitian(&self.matrix)
    }

    /// Spectral norm (largest |eigenvalue|).
    pub fn operator_norm(&self) -> Result<f64> {
        let e = self.eigen()?;
        Ok(e.values.iter().fold(0.0f64, |m, v| m.max(v.abs())))
    }

    pub fn plus(&self, other: &HamiltonianSpec) -> Result<Self> {
        self.combine(other, 1.0)
    }

    pub fn minus(&self, other: &HamiltonianSpec) -> Result<Self> {
        self.combine(other, -1.0)
    }

    fn combine(&self, other: &HamiltonianSpec, sign: f64) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(format!(
                "Hamiltonians of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        let mut terms = self.terms.clone();
        terms.extend(other.terms.iter().map(|t| PauliTerm { coeff: sign * t.coeff, factors: t.factors.clone() }));
        Ok(HamiltonianSpec {
            sites: self.sites,
            terms,
            matrix: &self.matrix + &other.matrix * Complex64::new(sign, 0.0),
        })
    }

    pub fn scaled(&self, s: f64) -> Self {
        HamiltonianSpec {
            sites: self.sites,
            terms: self.terms.iter().map(|t| PauliTerm { coeff: s * t.coeff, factors: t.factors.clone() }).collect(),
            matrix: &self.matrix * Complex64::new(s, 0.0),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_site_terms() {
        let h = HamiltonianSpec::from_terms(1, vec![PauliTerm::new(2.0, vec![(0, Pauli::Z)])]).unwrap();
        assert_eq!(h.dim(), 2);
        assert_eq!(h.matrix()[(1, 1)], Complex64::new(-2.0, 0.0));
    }

    #[test]
    fn site_zero_is_leftmost() {
        let h = HamiltonianSpec::from_terms(2, vec![PauliTerm::new(1.0, vec![(0, Pauli::Z)])]).unwrap();
        let diag: Vec<f64> = (0..4).map(|i| h.matrix()[(i, i)].re).collect();
        assert_eq!(diag, vec![1.0, 1.0, -1.0, -1.0]);
    }

    #[test]
    fn bad_terms_rejected() {
        assert!(HamiltonianSpec::from_terms(2, vec![PauliTerm::new(1.0, vec![(2, Pauli::X)])]).is_err());
        assert!(HamiltonianSpec::from_terms(2, vec![PauliTerm::new(1.0, vec![(0, Pauli::X), (0, Pauli::Y)])]).is_err());
        assert!(HamiltonianSpec::from_terms(1, vec![PauliTerm::new(f64::NAN, vec![(0, Pauli::X)])]).is_err());
        assert!(Pauli::from_char('q').is_err());
    }

    #[test]
    fn pauli_y_term_is_hermitian() {
        let h = HamiltonianSpec::from_terms(
            2,
            vec![PauliTerm::spin(3.0, vec![(0, Pauli::Y), (1, Pauli::X)]), PauliTerm::spin(1.0, vec![(1, Pauli::Y)])],
        )
        .unwrap();
        assert!(linalg::hermiticity_residual(h.matrix()) < 1e-15);
    }
}
