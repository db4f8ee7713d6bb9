//! Multivariate monomial bases.
//!
//! A [`BasisSet`] is an ordered list of exponent multi-indices. Every term
//! has total degree at least one, so a basis always vanishes at the origin
//! and any critic built on it satisfies `V(0) = 0`.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use nalgebra::{DMatrix, DVector};

use crate::dynamics::check_len;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BasisSet {
    state_dim: usize,
    terms: Vec<Vec<u32>>,
}

fn ipow(x: f64, e: u32) -> f64 {
    let mut acc = 1.0;
    for _ in 0..e {
        acc *= x;
    }
    acc
}

impl BasisSet {
    pub fn new(state_dim: usize, terms: Vec<Vec<u32>>) -> Result<Self> {
        if state_dim == 0 {
            return Err(Error::InvalidBasis("state dimension must be positive".into()));
        }
        if terms.is_empty() {
            return Err(Error::InvalidBasis("basis has no terms".into()));
        }
        for (j, t) in terms.iter().enumerate() {
            check_len("basis term exponents", state_dim, t.len())?;
            if t.iter().sum::<u32>() == 0 {
                return Err(Error::InvalidBasis(format!("term {j} has total degree 0")));
            }
            if terms[..j].contains(t) {
                return Err(Error::InvalidBasis(format!("term {j} duplicates an earlier term")));
            }
        }
        Ok(Self { state_dim, terms })
    }

    /// All monomials of total degree 2 in lexicographic order, e.g.
    /// `[x₁², x₁x₂, x₂²]` for two states.
    pub fn quadratic(state_dim: usize) -> Self {
        let mut terms = Vec::new();
        for i in 0..state_dim {
            for j in i..state_dim {
                let mut e = alloc::vec![0; state_dim];
                e[i] += 1;
                e[j] += 1;
                terms.push(e);
            }
        }
        Self::new(state_dim, terms).expect("quadratic basis is valid")
    }

    /// `[x₁, …, xₙ]`.
    pub fn linear(state_dim: usize) -> Self {
        let terms = (0..state_dim)
            .map(|i| {
                let mut e = alloc::vec![0; state_dim];
                e[i] = 1;
                e
            })
            .collect();
        Self::new(state_dim, terms).expect("linear basis is valid")
    }

    pub fn state_dim(&self) -> usize {
        self.state_dim
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[Vec<u32>] {
        &self.terms
    }

    pub fn eval(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_len("basis input", self.state_dim, x.len())?;
        Ok(DVector::from_iterator(
            self.terms.len(),
            self.terms
                .iter()
                .map(|e| e.iter().zip(x.iter()).map(|(&p, &xi)| ipow(xi, p)).product::<f64>()),
        ))
    }

    /// Jacobian, one row per term.
    pub fn eval_gradient(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_len("basis input", self.state_dim, x.len())?;
        let n = self.state_dim;
        let mut jac = DMatrix::zeros(self.terms.len(), n);
        for (j, e) in self.terms.iter().enumerate() {
            for i in 0..n {
                if e[i] == 0 {
                    continue;
                }
                let mut d = e[i] as f64 * ipow(x[i], e[i] - 1);
                for (k, &p) in e.iter().enumerate() {
                    if k != i {
                        d *= ipow(x[k], p);
                    }
                }
                jac[(j, i)] = d;
            }
        }
        Ok(jac)
    }

    /// Parses one term per non-empty line, exponents separated by
    /// whitespace. Lines starting with `#` are ignored.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut terms = Vec::new();
        for line in text.lines().map(str::trim) {
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            terms.push(parse_term(line)?);
        }
        let n = terms.first().map(Vec::len).unwrap_or(0);
        Self::new(n, terms)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for t in &self.terms {
            out.push_str(&format_term(t));
            out.push('\n');
        }
        out
    }
}

/// Parses a single whitespace-separated exponent list such as `"2 0"`.
pub fn parse_term(line: &str) -> Result<Vec<u32>> {
    line.split_whitespace()
        .map(|tok| {
            u32::from_str(tok).map_err(|_| Error::InvalidBasis(format!("bad exponent {tok:?} in {line:?}")))
        })
        .collect()
}

pub fn format_term(term: &[u32]) -> String {
    let mut s = String::new();
    for (i, e) in term.iter().enumerate() {
        if i > 0 {
            s.push(' ');
        }
        s.push_str(&format!("{e}"));
    }
    s
}

impl fmt::Display for BasisSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

/// Which of the two reference problems to build bases for.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReferenceProblem {
    ExampleA,
    Missile,
}

/// Critic, actor and disturbance bases of one problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Bases {
    pub critic: BasisSet,
    pub actor: BasisSet,
    pub disturbance: BasisSet,
}

fn two_state(terms: &[[u32; 2]]) -> BasisSet {
    BasisSet::new(2, terms.iter().map(|t| t.to_vec()).collect()).expect("reference basis is valid")
}

pub fn reference_bases(which: ReferenceProblem) -> Bases {
    match which {
        ReferenceProblem::ExampleA => {
            let critic = two_state(&[[2, 0], [0, 2], [1, 1], [4, 0], [0, 4]]);
            let actor = two_state(&[
                [1, 0],
                [0, 1],
                [2, 0],
                [1, 1],
                [0, 2],
                [2, 1],
                [1, 2],
                [3, 0],
                [0, 3],
            ]);
            Bases {
                critic,
                disturbance: actor.clone(),
                actor,
            }
        }
        ReferenceProblem::Missile => {
            let critic = two_state(&[[4, 0], [3, 1], [2, 2], [1, 3], [0, 4], [2, 0], [1, 1], [0, 2]]);
            let actor = two_state(&[[0, 1], [2, 1], [0, 3]]);
            Bases {
                critic,
                disturbance: actor.clone(),
                actor,
            }
        }
    }
}
