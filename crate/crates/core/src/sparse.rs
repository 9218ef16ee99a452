//! Row-sparse matrices of `R^{P x T}`.
//!
//! A point of the sampler's state space is stored as a [`ModelMask`] (which
//! rows are nonzero) together with the `|m| x T` block of active rows. The
//! strata `S_m` are the sets of matrices whose nonzero rows are exactly the
//! rows flagged by `m`; every [`SparseState`] lives in exactly one of them.

use std::fmt;
use std::io::{Read, Write};

use ndarray::{Array2, ArrayView1, Axis};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense `rows x cols` matrix.
pub type DenseMatrix = Array2<f64>;

#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ModelMask {
    bits: Vec<bool>,
}

impl ModelMask {
    pub fn new(bits: Vec<bool>) -> Self {
        Self { bits }
    }

    pub fn empty(p: usize) -> Self {
        Self {
            bits: vec![false; p],
        }
    }

    pub fn full(p: usize) -> Self {
        Self {
            bits: vec![true; p],
        }
    }

    /// Mask whose bit `i` is bit `i` of `code` (bit 0 is component 0).
    pub fn from_code(code: u64, p: usize) -> Self {
        Self {
            bits: (0..p).map(|i| (code >> i) & 1 == 1).collect(),
        }
    }

    pub fn code(&self) -> u64 {
        self.bits
            .iter()
            .enumerate()
            .fold(0u64, |acc, (i, &b)| if b { acc | (1 << i) } else { acc })
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    pub fn get(&self, i: usize) -> bool {
        self.bits[i]
    }

    pub fn set(&mut self, i: usize, value: bool) {
        self.bits[i] = value;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of active components `|m|`.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Active indices `I_m` in increasing order.
    pub fn active_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| b.then_some(i))
            .collect()
    }

    pub fn inactive_indices(&self) -> Vec<usize> {
        self.bits
            .iter()
            .enumerate()
            .filter_map(|(i, &b)| (!b).then_some(i))
            .collect()
    }

    /// Bitstring with component 0 first, e.g. `"1010"`.
    pub fn to_bitstring(&self) -> String {
        self.bits
            .iter()
            .map(|&b| if b { '1' } else { '0' })
            .collect()
    }

    pub fn parse_bitstring(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid mask character {other:?}"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self::new)
    }
}

impl fmt::Display for ModelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_bitstring())
    }
}

/// A matrix of `S_m`: the mask plus its active rows, stored contiguously in
/// increasing index order.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseState {
    t: usize,
    mask: ModelMask,
    active: DenseMatrix,
}

impl SparseState {
    /// The zero matrix of `R^{P x T}` (empty model).
    pub fn zeros(p: usize, t: usize) -> Self {
        Self {
            t,
            mask: ModelMask::empty(p),
            active: Array2::zeros((0, t)),
        }
    }

    pub fn from_dense(x: &DenseMatrix) -> Self {
        let mask = mask_of(x);
        let idx = mask.active_indices();
        let active = x.select(Axis(0), &idx);
        Self {
            t: x.ncols(),
            mask,
            active,
        }
    }

    pub fn p(&self) -> usize {
        self.mask.len()
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn mask(&self) -> &ModelMask {
        &self.mask
    }

    pub fn active(&self) -> &DenseMatrix {
        &self.active
    }

    pub fn n_active(&self) -> usize {
        self.active.nrows()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut x = Array2::zeros((self.p(), self.t));
        for (row, i) in self.mask.active_indices().into_iter().enumerate() {
            x.row_mut(i).assign(&self.active.row(row));
        }
        x
    }

    /// `||x||_{2,1}`, the sum of the active row norms.
    pub fn l21_norm(&self) -> f64 {
        self.active.rows().into_iter().map(|r| norm(r)).sum()
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.active.iter().map(|v| v * v).sum()
    }
}

/// Places `values` on the active rows of `mask` (the map `psi(m, .)`).
pub fn embed(mask: ModelMask, values: DenseMatrix) -> Result<SparseState> {
    let k = mask.count();
    if values.nrows() != k {
        return Err(Error::Shape(format!(
            "mask has {k} active rows but {} value rows were given",
            values.nrows()
        )));
    }
    if values.ncols() == 0 {
        return Err(Error::Shape("T must be at least 1".into()));
    }
    if mask.is_empty() {
        return Err(Error::Shape("P must be at least 1".into()));
    }
    if let Some(row) = values.rows().into_iter().position(|r| norm(r) == 0.0) {
        return Err(Error::ZeroActiveRow(row));
    }
    Ok(SparseState {
        t: values.ncols(),
        mask,
        active: values,
    })
}

/// Bit `i` is set iff row `i` is not identically zero.
pub fn mask_of(x: &DenseMatrix) -> ModelMask {
    ModelMask::new(
        x.rows()
            .into_iter()
            .map(|r| r.iter().any(|&v| v != 0.0))
            .collect(),
    )
}

pub fn row_norms(x: &DenseMatrix) -> Vec<f64> {
    x.rows().into_iter().map(norm).collect()
}

pub(crate) fn norm(r: ArrayView1<'_, f64>) -> f64 {
    r.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub(crate) fn norm_sq(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

/// Writes a matrix as headerless CSV, one matrix row per line.
pub fn write_matrix_csv<W: Write>(x: &DenseMatrix, w: W) -> Result<()> {
    let mut out = csv::WriterBuilder::new().has_headers(false).from_writer(w);
    for row in x.rows() {
        out.write_record(row.iter().map(|v| format!("{v}")))?;
    }
    out.flush()?;
    Ok(())
}

pub fn read_matrix_csv<R: Read>(r: R) -> Result<DenseMatrix> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(r);
    let mut data = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for rec in rdr.records() {
        let rec = rec?;
        if cols.is_some_and(|c| c != rec.len()) {
            return Err(Error::Parse(format!("ragged row {rows}")));
        }
        cols = Some(rec.len());
        for field in rec.iter() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("not a number: {field:?}")))?;
            if !v.is_finite() {
                return Err(Error::Parse(format!("non-finite entry in row {rows}")));
            }
            data.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| Error::Parse("empty matrix".into()))?;
    Array2::from_shape_vec((rows, cols), data).map_err(|e| Error::Shape(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn embed_empty_model_is_zero() {
        let s = embed(ModelMask::new(vec![false, false]), Array2::zeros((0, 1))).unwrap();
        assert_eq!(s.to_dense(), array![[0.0], [0.0]]);
    }

    #[test]
    fn embed_places_rows() {
        let s = embed(ModelMask::new(vec![true, false]), array![[3.0]]).unwrap();
        assert_eq!(s.to_dense(), array![[3.0], [0.0]]);

        let s = embed(
            ModelMask::new(vec![true, false, true]),
            array![[1.0, 2.0], [0.0, 5.0]],
        )
        .unwrap();
        assert_eq!(s.to_dense(), array![[1.0, 2.0], [0.0, 0.0], [0.0, 5.0]]);
    }

    #[test]
    fn embed_rejects_bad_input() {
        let err = embed(ModelMask::new(vec![true, true]), array![[1.0]]).unwrap_err();
        assert!(matches!(err, Error::Shape(_)));
        let err = embed(ModelMask::new(vec![true, true]), array![[1.0], [0.0]]).unwrap_err();
        assert!(matches!(err, Error::ZeroActiveRow(1)));
    }

    #[test]
    fn mask_of_examples() {
        assert_eq!(
            mask_of(&Array2::zeros((3, 1))).bits(),
            &[false, false, false]
        );
        assert_eq!(mask_of(&array![[0.0], [2.5]]).bits(), &[false, true]);
        assert_eq!(
            mask_of(&array![[0.0, 0.0], [1e-300, 0.0]]).bits(),
            &[false, true]
        );
    }

    #[test]
    fn row_norm_examples() {
        assert_eq!(row_norms(&array![[3.0, 4.0]]), vec![5.0]);
        assert_eq!(row_norms(&Array2::zeros((2, 3))), vec![0.0, 0.0]);
        assert_eq!(row_norms(&array![[1.0], [-2.0]]), vec![1.0, 2.0]);
    }

    #[test]
    fn mask_code_and_bitstring() {
        let m = ModelMask::from_code(0b101, 4);
        assert_eq!(m.to_bitstring(), "1010");
        assert_eq!(m.code(), 5);
        assert_eq!(ModelMask::parse_bitstring("1010").unwrap(), m);
        assert!(ModelMask::parse_bitstring("10x").is_err());
    }

    #[test]
    fn csv_roundtrip_is_exact() {
        let x = array![[0.1, -2.5e-300], [1.0 / 3.0, 0.0]];
        let mut buf = Vec::new();
        write_matrix_csv(&x, &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap().lines().count(), 2);
        let y = read_matrix_csv(buf.as_slice()).unwrap();
        assert_eq!(x, y);
    }

    proptest! {
        #[test]
        fn embed_roundtrips_mask_and_norms(
            code in 0u64..64,
            t in 1usize..4,
            raw in proptest::collection::vec(0.1f64..10.0, 24),
            signs in proptest::collection::vec(any::<bool>(), 24),
        ) {
            let mask = ModelMask::from_code(code, 6);
            let k = mask.count();
            let vals: Vec<f64> = raw.iter().zip(&signs).take(k * t)
                .map(|(v, &s)| if s { *v } else { -*v }).collect();
            let values = Array2::from_shape_vec((k, t), vals).unwrap();
            let s = embed(mask.clone(), values).unwrap();
            let dense = s.to_dense();
            prop_assert_eq!(mask_of(&dense), mask);
            let norms: f64 = row_norms(&dense).iter().sum();
            prop_assert_eq!(norms, s.l21_norm());
            prop_assert_eq!(SparseState::from_dense(&dense), s);
        }
    }
}
