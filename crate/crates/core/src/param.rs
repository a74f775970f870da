//! Matrices and vectors whose entries are polynomials in a parameter vector.
//!
//! A [`ParamMatrix`] is stored as a sum of monomials in θ, each carrying a
//! dense coefficient matrix. Evaluation and partial differentiation are
//! exact; the block operations needed to compose augmented systems work
//! term-wise.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Names and nominal values θ* of the parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVectorSpec {
    names: Vec<String>,
    nominal: Vec<f64>,
}

impl ParamVectorSpec {
    pub fn new(names: Vec<String>, nominal: Vec<f64>) -> Result<Self> {
        if names.len() != nominal.len() {
            return Err(Error::dims("parameter spec", names.len(), nominal.len()));
        }
        for (k, name) in names.iter().enumerate() {
            if names[..k].contains(name) {
                return Err(Error::invalid("names", format!("duplicate parameter `{name}`")));
            }
        }
        if nominal.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("nominal", "nominal values must be finite"));
        }
        Ok(Self { names, nominal })
    }

    /// A spec with no parameters.
    pub fn empty() -> Self {
        Self {
            names: Vec::new(),
            nominal: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn nominal(&self) -> &[f64] {
        &self.nominal
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.len() {
            return Err(Error::dims("theta vs parameter spec", self.len(), theta.len()));
        }
        Ok(())
    }
}

/// Product of integer powers of parameters. The empty map is the constant 1.
#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Monomial(BTreeMap<usize, u32>);

impl Monomial {
    pub fn constant() -> Self {
        Self::default()
    }

    pub fn var(index: usize) -> Self {
        Self::pow(index, 1)
    }

    pub fn pow(index: usize, power: u32) -> Self {
        let mut m = BTreeMap::new();
        if power > 0 {
            m.insert(index, power);
        }
        Self(m)
    }

    pub fn from_powers(powers: impl IntoIterator<Item = (usize, u32)>) -> Self {
        let mut m = BTreeMap::new();
        for (i, p) in powers {
            *m.entry(i).or_insert(0) += p;
        }
        m.retain(|_, p| *p > 0);
        Self(m)
    }

    pub fn times(&self, other: &Monomial) -> Monomial {
        Self::from_powers(self.0.iter().chain(other.0.iter()).map(|(&i, &p)| (i, p)))
    }

    pub fn is_constant(&self) -> bool {
        self.0.is_empty()
    }

    pub fn powers(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.0.iter().map(|(&i, &p)| (i, p))
    }

    pub fn power_of(&self, index: usize) -> u32 {
        self.0.get(&index).copied().unwrap_or(0)
    }

    pub fn degree(&self) -> u32 {
        self.0.values().sum()
    }

    pub fn max_index(&self) -> Option<usize> {
        self.0.keys().next_back().copied()
    }

    pub fn eval(&self, theta: &[f64]) -> f64 {
        self.0
            .iter()
            .map(|(&i, &p)| theta[i].powi(p as i32))
            .product()
    }

    /// `m(θ + h·eᵢ) − m(θ)` without cancellation:
    /// `(θᵢ+h)ᵖ − θᵢᵖ = h·Σⱼ (θᵢ+h)ʲ θᵢ^{p−1−j}`.
    pub fn increment(&self, index: usize, theta: &[f64], h: f64) -> f64 {
        let p = self.power_of(index);
        if p == 0 {
            return 0.0;
        }
        let rest: f64 = self
            .0
            .iter()
            .filter(|(&i, _)| i != index)
            .map(|(&i, &q)| theta[i].powi(q as i32))
            .product();
        let (x, y) = (theta[index] + h, theta[index]);
        let sum: f64 = (0..p).map(|j| x.powi(j as i32) * y.powi((p - 1 - j) as i32)).sum();
        rest * h * sum
    }

    /// ∂/∂θᵢ of the monomial as (multiplier, reduced monomial); `None` if zero.
    pub fn derivative(&self, index: usize) -> Option<(f64, Monomial)> {
        let p = self.power_of(index);
        if p == 0 {
            return None;
        }
        let mut m = self.0.clone();
        if p == 1 {
            m.remove(&index);
        } else {
            m.insert(index, p - 1);
        }
        Some((p as f64, Monomial(m)))
    }
}

/// Matrix-valued polynomial in θ: Σ coeffₖ · monomialₖ(θ).
#[derive(Debug, Clone, PartialEq)]
pub struct ParamMatrix {
    rows: usize,
    cols: usize,
    nparams: usize,
    terms: Vec<(Monomial, DMatrix<f64>)>,
}

impl ParamMatrix {
    pub fn zeros(rows: usize, cols: usize, nparams: usize) -> Self {
        Self {
            rows,
            cols,
            nparams,
            terms: Vec::new(),
        }
    }

    pub fn constant(value: DMatrix<f64>, nparams: usize) -> Self {
        let (rows, cols) = value.shape();
        Self::from_terms(rows, cols, nparams, [(Monomial::constant(), value)])
            .expect("shape taken from the value itself")
    }

    /// Builds a matrix polynomial, merging duplicate monomials and dropping
    /// identically zero coefficients.
    pub fn from_terms(
        rows: usize,
        cols: usize,
        nparams: usize,
        terms: impl IntoIterator<Item = (Monomial, DMatrix<f64>)>,
    ) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid("shape", "rows and cols must be positive"));
        }
        let mut merged: BTreeMap<Monomial, DMatrix<f64>> = BTreeMap::new();
        for (mono, coeff) in terms {
            if coeff.shape() != (rows, cols) {
                return Err(Error::dims(
                    "ParamMatrix term",
                    format!("{rows}x{cols}"),
                    format!("{}x{}", coeff.nrows(), coeff.ncols()),
                ));
            }
            if let Some(i) = mono.max_index() {
                if i >= nparams {
                    return Err(Error::ParamIndex { index: i, nparams });
                }
            }
            if coeff.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite("ParamMatrix coefficient"));
            }
            match merged.get_mut(&mono) {
                Some(acc) => *acc += coeff,
                None => {
                    merged.insert(mono, coeff);
                }
            }
        }
        let terms = merged
            .into_iter()
            .filter(|(_, c)| c.iter().any(|&v| v != 0.0))
            .collect();
        Ok(Self {
            rows,
            cols,
            nparams,
            terms,
        })
    }

    /// `c0 + Σ θᵢ·cᵢ`.
    pub fn affine(c0: DMatrix<f64>, slopes: &[(usize, DMatrix<f64>)], nparams: usize) -> Result<Self> {
        let (rows, cols) = c0.shape();
        let terms = std::iter::once((Monomial::constant(), c0))
            .chain(slopes.iter().map(|(i, c)| (Monomial::var(*i), c.clone())));
        Self::from_terms(rows, cols, nparams, terms)
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn nparams(&self) -> usize {
        self.nparams
    }

    pub fn terms(&self) -> &[(Monomial, DMatrix<f64>)] {
        &self.terms
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|(m, _)| m.is_constant())
    }

    pub fn depends_on(&self, index: usize) -> bool {
        self.terms.iter().any(|(m, _)| m.power_of(index) > 0)
    }

    fn check_theta(&self, theta: &[f64]) -> Result<()> {
        if theta.len() != self.nparams {
            return Err(Error::dims("theta", self.nparams, theta.len()));
        }
        Ok(())
    }

    pub fn eval(&self, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (mono, coeff) in &self.terms {
            out += coeff * mono.eval(theta);
        }
        Ok(out)
    }

    /// Symbolic ∂/∂θᵢ.
    pub fn derivative(&self, index: usize) -> Result<ParamMatrix> {
        if index >= self.nparams {
            return Err(Error::ParamIndex {
                index,
                nparams: self.nparams,
            });
        }
        let terms = self.terms.iter().filter_map(|(mono, coeff)| {
            mono.derivative(index).map(|(k, m)| (m, coeff * k))
        });
        Self::from_terms(self.rows, self.cols, self.nparams, terms)
    }

    /// ∂/∂θᵢ evaluated at θ.
    pub fn partial(&self, index: usize, theta: &[f64]) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        self.derivative(index)?.eval(theta)
    }

    /// `eval(θ + h·eᵢ) − eval(θ)`, formed term by term so that small steps
    /// keep full relative accuracy.
    pub fn increment(&self, index: usize, theta: &[f64], h: f64) -> Result<DMatrix<f64>> {
        self.check_theta(theta)?;
        if index >= self.nparams {
            return Err(Error::ParamIndex {
                index,
                nparams: self.nparams,
            });
        }
        let mut out = DMatrix::zeros(self.rows, self.cols);
        for (mono, coeff) in &self.terms {
            let d = mono.increment(index, theta, h);
            if d != 0.0 {
                out += coeff * d;
            }
        }
        Ok(out)
    }

    fn check_same_params(&self, other: &ParamMatrix) -> Result<()> {
        if self.nparams != other.nparams {
            return Err(Error::dims("parameter count", self.nparams, other.nparams));
        }
        Ok(())
    }

    pub fn add(&self, other: &ParamMatrix) -> Result<ParamMatrix> {
        self.check_same_params(other)?;
        if self.shape() != other.shape() {
            return Err(Error::dims(
                "add",
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        Self::from_terms(
            self.rows,
            self.cols,
            self.nparams,
            self.terms.iter().chain(other.terms.iter()).cloned(),
        )
    }

    pub fn sub(&self, other: &ParamMatrix) -> Result<ParamMatrix> {
        self.add(&other.negate())
    }

    pub fn scale(&self, factor: f64) -> ParamMatrix {
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), c * factor));
        Self::from_terms(self.rows, self.cols, self.nparams, terms)
            .expect("scaling preserves shape")
    }

    pub fn negate(&self) -> ParamMatrix {
        self.scale(-1.0)
    }

    /// `left · self · right` for constant matrices `left`, `right`.
    pub fn sandwich(&self, left: &DMatrix<f64>, right: &DMatrix<f64>) -> Result<ParamMatrix> {
        if left.ncols() != self.rows || right.nrows() != self.cols {
            return Err(Error::dims(
                "sandwich",
                format!("{}x{} core", self.rows, self.cols),
                format!("left {}x{}, right {}x{}", left.nrows(), left.ncols(), right.nrows(), right.ncols()),
            ));
        }
        let terms = self.terms.iter().map(|(m, c)| (m.clone(), left * c * right));
        Self::from_terms(left.nrows(), right.ncols(), self.nparams, terms)
    }

    /// Places `self` at block offset (r0, c0) of a larger zero matrix.
    fn embedded(&self, rows: usize, cols: usize, r0: usize, c0: usize) -> Vec<(Monomial, DMatrix<f64>)> {
        self.terms
            .iter()
            .map(|(m, c)| {
                let mut big = DMatrix::zeros(rows, cols);
                big.view_mut((r0, c0), (self.rows, self.cols)).copy_from(c);
                (m.clone(), big)
            })
            .collect()
    }

    pub fn block_diag(&self, other: &ParamMatrix) -> Result<ParamMatrix> {
        self.check_same_params(other)?;
        let rows = self.rows + other.rows;
        let cols = self.cols + other.cols;
        let mut terms = self.embedded(rows, cols, 0, 0);
        terms.extend(other.embedded(rows, cols, self.rows, self.cols));
        Self::from_terms(rows, cols, self.nparams, terms)
    }

    pub fn vstack(&self, other: &ParamMatrix) -> Result<ParamMatrix> {
        self.check_same_params(other)?;
        if self.cols != other.cols {
            return Err(Error::dims("vstack columns", self.cols, other.cols));
        }
        let rows = self.rows + other.rows;
        let mut terms = self.embedded(rows, self.cols, 0, 0);
        terms.extend(other.embedded(rows, self.cols, self.rows, 0));
        Self::from_terms(rows, self.cols, self.nparams, terms)
    }

    pub fn hstack(&self, other: &ParamMatrix) -> Result<ParamMatrix> {
        self.check_same_params(other)?;
        if self.rows != other.rows {
            return Err(Error::dims("hstack rows", self.rows, other.rows));
        }
        let cols = self.cols + other.cols;
        let mut terms = self.embedded(self.rows, cols, 0, 0);
        terms.extend(other.embedded(self.rows, cols, 0, self.cols));
        Self::from_terms(self.rows, cols, self.nparams, terms)
    }

    pub fn to_doc(&self, spec: &ParamVectorSpec) -> ParamMatrixDoc {
        let terms = self
            .terms
            .iter()
            .map(|(mono, coeff)| TermDoc {
                powers: mono
                    .powers()
                    .map(|(i, p)| (spec.names()[i].clone(), p))
                    .collect(),
                coeff: (0..self.rows)
                    .map(|r| (0..self.cols).map(|c| coeff[(r, c)]).collect())
                    .collect(),
            })
            .collect();
        ParamMatrixDoc {
            rows: self.rows,
            cols: self.cols,
            terms,
        }
    }

    pub fn from_doc(doc: &ParamMatrixDoc, spec: &ParamVectorSpec) -> Result<Self> {
        let mut terms = Vec::with_capacity(doc.terms.len());
        for term in &doc.terms {
            let mut powers = Vec::new();
            for (name, &p) in &term.powers {
                let i = spec
                    .index_of(name)
                    .ok_or_else(|| Error::Config(format!("unknown parameter `{name}`")))?;
                powers.push((i, p));
            }
            terms.push((Monomial::from_powers(powers), matrix_from_rows(&term.coeff, doc.rows, doc.cols)?));
        }
        Self::from_terms(doc.rows, doc.cols, spec.len(), terms)
    }
}

pub(crate) fn matrix_from_rows(rows: &[Vec<f64>], nrows: usize, ncols: usize) -> Result<DMatrix<f64>> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::dims(
            "coefficient matrix",
            format!("{nrows}x{ncols}"),
            format!("{} rows with lengths {:?}", rows.len(), rows.iter().map(Vec::len).collect::<Vec<_>>()),
        ));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |r, c| rows[r][c]))
}

/// Column vector polynomial in θ, e.g. a parameter-dependent initial state.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(ParamMatrix);

impl ParamVector {
    pub fn new(inner: ParamMatrix) -> Result<Self> {
        if inner.cols() != 1 {
            return Err(Error::dims("ParamVector columns", 1, inner.cols()));
        }
        Ok(Self(inner))
    }

    pub fn constant(value: DVector<f64>, nparams: usize) -> Self {
        let n = value.len();
        Self(ParamMatrix::constant(DMatrix::from_column_slice(n, 1, value.as_slice()), nparams))
    }

    pub fn zeros(len: usize, nparams: usize) -> Self {
        Self(ParamMatrix::zeros(len, 1, nparams))
    }

    pub fn len(&self) -> usize {
        self.0.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.0.rows() == 0
    }

    pub fn as_matrix(&self) -> &ParamMatrix {
        &self.0
    }

    pub fn eval(&self, theta: &[f64]) -> Result<DVector<f64>> {
        Ok(self.0.eval(theta)?.column(0).into_owned())
    }

    pub fn partial(&self, index: usize, theta: &[f64]) -> Result<DVector<f64>> {
        Ok(self.0.partial(index, theta)?.column(0).into_owned())
    }

    pub fn increment(&self, index: usize, theta: &[f64], h: f64) -> Result<DVector<f64>> {
        Ok(self.0.increment(index, theta, h)?.column(0).into_owned())
    }

    pub fn depends_on(&self, index: usize) -> bool {
        self.0.depends_on(index)
    }

    pub fn vstack(&self, other: &ParamVector) -> Result<ParamVector> {
        Ok(Self(self.0.vstack(&other.0)?))
    }
}

/// JSON form of a [`ParamMatrix`]; monomial powers are keyed by parameter name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamMatrixDoc {
    pub rows: usize,
    pub cols: usize,
    #[serde(default)]
    pub terms: Vec<TermDoc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TermDoc {
    #[serde(default)]
    pub powers: BTreeMap<String, u32>,
    pub coeff: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::dmatrix;
    use proptest::prelude::*;

    fn spring_a() -> ParamMatrix {
        ParamMatrix::affine(
            dmatrix![0.0, 1.0; -20.0, -2.0],
            &[(0, dmatrix![0.0, 0.0; -5.0, -0.5])],
            1,
        )
        .unwrap()
    }

    #[test]
    fn eval_mass_spring() {
        let a = spring_a();
        assert_eq!(a.eval(&[0.0]).unwrap(), dmatrix![0.0, 1.0; -20.0, -2.0]);
        assert_eq!(a.eval(&[1.0]).unwrap(), dmatrix![0.0, 1.0; -25.0, -2.5]);
    }

    #[test]
    fn eval_empty_is_zero() {
        let z = ParamMatrix::zeros(2, 3, 2);
        assert_eq!(z.eval(&[4.0, -1.0]).unwrap(), DMatrix::zeros(2, 3));
    }

    #[test]
    fn eval_rejects_wrong_theta_length() {
        let a = spring_a();
        assert!(matches!(a.eval(&[0.0, 1.0]), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn partial_affine_is_slope() {
        let a = spring_a();
        for th in [-3.0, 0.0, 0.7] {
            assert_eq!(a.partial(0, &[th]).unwrap(), dmatrix![0.0, 0.0; -5.0, -0.5]);
        }
    }

    #[test]
    fn partial_power_and_product_rules() {
        let a2 = dmatrix![1.0, 2.0; 3.0, 4.0];
        let q = ParamMatrix::from_terms(2, 2, 2, [(Monomial::pow(0, 2), a2.clone())]).unwrap();
        assert_eq!(q.partial(0, &[2.0, 0.0]).unwrap(), &a2 * 4.0);

        let cross = ParamMatrix::from_terms(
            2,
            2,
            2,
            [(Monomial::from_powers([(0, 1), (1, 1)]), a2.clone())],
        )
        .unwrap();
        assert_eq!(cross.partial(0, &[-1.0, 3.0]).unwrap(), &a2 * 3.0);
    }

    #[test]
    fn partial_index_out_of_range() {
        assert!(matches!(spring_a().partial(1, &[0.0]), Err(Error::ParamIndex { .. })));
    }

    #[test]
    fn constant_partial_is_zero() {
        let c = ParamMatrix::constant(dmatrix![1.0, 2.0], 3);
        for i in 0..3 {
            assert_eq!(c.partial(i, &[1.0, 2.0, 3.0]).unwrap(), DMatrix::zeros(1, 2));
        }
    }

    #[test]
    fn duplicates_merge_and_zero_terms_drop() {
        let m = ParamMatrix::from_terms(
            1,
            1,
            1,
            [
                (Monomial::var(0), dmatrix![1.0]),
                (Monomial::var(0), dmatrix![-1.0]),
                (Monomial::constant(), dmatrix![2.0]),
            ],
        )
        .unwrap();
        assert_eq!(m.terms().len(), 1);
        assert!(m.is_constant());
    }

    #[test]
    fn structural_compositions() {
        let a = spring_a();
        let bd = a.block_diag(&a.scale(2.0)).unwrap();
        let v = bd.eval(&[0.5]).unwrap();
        assert_eq!(v.shape(), (4, 4));
        assert_eq!(v.view((0, 0), (2, 2)), a.eval(&[0.5]).unwrap());
        assert_eq!(v.view((2, 2), (2, 2)), a.eval(&[0.5]).unwrap() * 2.0);
        assert_eq!(v.view((0, 2), (2, 2)), DMatrix::<f64>::zeros(2, 2));

        let c = ParamMatrix::constant(dmatrix![1.0, 0.0], 1);
        let ct = ParamMatrix::affine(dmatrix![0.9, 0.1], &[(0, dmatrix![0.1, 0.0])], 1).unwrap();
        let h = c.hstack(&ct.negate()).unwrap();
        assert_eq!(h.eval(&[1.0]).unwrap(), dmatrix![1.0, 0.0, -1.0, -0.1]);

        let z = a.add(&a.negate()).unwrap();
        assert_eq!(z.eval(&[3.3]).unwrap(), DMatrix::zeros(2, 2));
        assert!(z.terms().is_empty());

        assert!(a.hstack(&ParamMatrix::zeros(3, 1, 1)).is_err());
        assert!(a.add(&ParamMatrix::zeros(2, 2, 2)).is_err());
    }

    #[test]
    fn spec_rejects_duplicates_and_length_mismatch() {
        assert!(ParamVectorSpec::new(vec!["a".into(), "a".into()], vec![0.0, 1.0]).is_err());
        assert!(ParamVectorSpec::new(vec!["a".into()], vec![0.0, 1.0]).is_err());
        assert!(ParamVectorSpec::new(vec![], vec![]).unwrap().is_empty());
    }

    #[test]
    fn doc_roundtrip() {
        let spec = ParamVectorSpec::new(vec!["theta1".into()], vec![0.5]).unwrap();
        let a = spring_a();
        let json = serde_json::to_string(&a.to_doc(&spec)).unwrap();
        let doc: ParamMatrixDoc = serde_json::from_str(&json).unwrap();
        assert_eq!(ParamMatrix::from_doc(&doc, &spec).unwrap(), a);

        let raw = r#"{"rows":2,"cols":2,"terms":[{"powers":{"theta1":1},"coeff":[[0,0],[-5,-0.5]]}]}"#;
        let doc: ParamMatrixDoc = serde_json::from_str(raw).unwrap();
        let m = ParamMatrix::from_doc(&doc, &spec).unwrap();
        assert_eq!(m.partial(0, &[0.0]).unwrap(), dmatrix![0.0, 0.0; -5.0, -0.5]);

        let bad = r#"{"rows":1,"cols":1,"terms":[{"powers":{"phi":1},"coeff":[[1]]}]}"#;
        let doc: ParamMatrixDoc = serde_json::from_str(bad).unwrap();
        assert!(ParamMatrix::from_doc(&doc, &spec).is_err());
    }

    fn arb_poly() -> impl Strategy<Value = ParamMatrix> {
        let term = (0u32..=3, 0u32..=3, prop::collection::vec(-2.0f64..2.0, 4));
        prop::collection::vec(term, 0..5).prop_filter_map("degree <= 3", |terms| {
            let terms: Vec<_> = terms
                .into_iter()
                .filter(|(p0, p1, _)| p0 + p1 <= 3)
                .map(|(p0, p1, c)| {
                    (Monomial::from_powers([(0, p0), (1, p1)]), DMatrix::from_vec(2, 2, c))
                })
                .collect();
            ParamMatrix::from_terms(2, 2, 2, terms).ok()
        })
    }

    proptest! {
        #[test]
        fn partial_matches_central_difference(
            pm in arb_poly(),
            t0 in -1.5f64..1.5,
            t1 in -1.5f64..1.5,
            i in 0usize..2,
        ) {
            let theta = [t0, t1];
            let h = 1e-5;
            let mut tp = theta;
            let mut tm = theta;
            tp[i] += h;
            tm[i] -= h;
            let fd = (pm.eval(&tp).unwrap() - pm.eval(&tm).unwrap()) / (2.0 * h);
            let exact = pm.partial(i, &theta).unwrap();
            let scale = exact.amax().max(1.0);
            prop_assert!((fd - &exact).amax() <= 1e-6 * scale);
        }

        #[test]
        fn eval_is_additive(p in arb_poly(), q in arb_poly(), t0 in -2.0f64..2.0, t1 in -2.0f64..2.0) {
            let theta = [t0, t1];
            let sum = p.add(&q).unwrap().eval(&theta).unwrap();
            let direct = p.eval(&theta).unwrap() + q.eval(&theta).unwrap();
            prop_assert!((sum - direct).amax() <= 1e-12);
        }

        #[test]
        fn increment_matches_eval_difference(
            pm in arb_poly(),
            t0 in -1.5f64..1.5,
            t1 in -1.5f64..1.5,
            i in 0usize..2,
            h in -0.5f64..0.5,
        ) {
            let theta = [t0, t1];
            let mut tp = theta;
            tp[i] += h;
            let diff = pm.eval(&tp).unwrap() - pm.eval(&theta).unwrap();
            let inc = pm.increment(i, &theta, h).unwrap();
            let scale = pm.eval(&tp).unwrap().amax().max(pm.eval(&theta).unwrap().amax()).max(1.0);
            prop_assert!((inc - diff).amax() <= 1e-12 * scale);
        }
    }

    #[test]
    fn tiny_increment_keeps_relative_accuracy() {
        // θ² at θ = 0.5, h = 1e-9: exact increment is h(1 + h)
        let m = ParamMatrix::from_terms(1, 1, 1, [(Monomial::pow(0, 2), dmatrix![1.0])]).unwrap();
        let h = 1e-9;
        let inc = m.increment(0, &[0.5], h).unwrap()[(0, 0)];
        assert!((inc - h * (1.0 + h)).abs() <= 1e-15 * h);
        assert!(m.increment(3, &[0.5], h).is_err());
    }
}
