use std::io::Write;

use ndarray::Array2;

use crate::error::{Error, Result};
use crate::sparse::{DenseMatrix, ModelMask, SparseState};

/// Post-burn-in chain history, stored compressed as packed masks plus the
/// values of the active rows.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainTrace {
    p: usize,
    t: usize,
    words: usize,
    iterations: usize,
    accept_count: usize,
    iters: Vec<usize>,
    accepted: Vec<bool>,
    cum_accepts: Vec<usize>,
    log_pi: Vec<f64>,
    mask_bits: Vec<u64>,
    values: Vec<f64>,
    offsets: Vec<usize>,
}

/// Borrowed view of one recorded iteration.
#[derive(Clone, Copy, Debug)]
pub struct TraceRecord<'a> {
    pub iter: usize,
    pub accepted: bool,
    pub log_pi: f64,
    trace: &'a ChainTrace,
    index: usize,
}

impl<'a> TraceRecord<'a> {
    pub fn is_active(&self, component: usize) -> bool {
        self.trace.is_active(self.index, component)
    }

    pub fn n_active(&self) -> usize {
        (self.trace.offsets[self.index + 1] - self.trace.offsets[self.index]) / self.trace.t
    }

    pub fn mask(&self) -> ModelMask {
        ModelMask::new((0..self.trace.p).map(|i| self.is_active(i)).collect())
    }

    /// Active values, row-major over active rows in increasing index order.
    pub fn values(&self) -> &'a [f64] {
        &self.trace.values[self.trace.offsets[self.index]..self.trace.offsets[self.index + 1]]
    }

    /// Accepted moves up to and including this iteration.
    pub fn cumulative_accepts(&self) -> usize {
        self.trace.cum_accepts[self.index]
    }
}

impl ChainTrace {
    pub fn new(p: usize, t: usize) -> Self {
        Self {
            p,
            t,
            words: p.div_ceil(64).max(1),
            iterations: 0,
            accept_count: 0,
            iters: Vec::new(),
            accepted: Vec::new(),
            cum_accepts: Vec::new(),
            log_pi: Vec::new(),
            mask_bits: Vec::new(),
            values: Vec::new(),
            offsets: vec![0],
        }
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Counts one iteration of the chain (recorded or not).
    pub fn count_iteration(&mut self, accepted: bool) {
        self.iterations += 1;
        if accepted {
            self.accept_count += 1;
        }
    }

    pub fn push(&mut self, iter: usize, accepted: bool, log_pi: f64, x: &DenseMatrix) {
        debug_assert_eq!(x.dim(), (self.p, self.t));
        let base = self.mask_bits.len();
        self.mask_bits.resize(base + self.words, 0);
        for (i, row) in x.rows().into_iter().enumerate() {
            if row.iter().any(|&v| v != 0.0) {
                self.mask_bits[base + i / 64] |= 1 << (i % 64);
                self.values.extend(row.iter());
            }
        }
        self.offsets.push(self.values.len());
        self.iters.push(iter);
        self.accepted.push(accepted);
        self.cum_accepts.push(self.accept_count);
        self.log_pi.push(log_pi);
    }

    pub fn len(&self) -> usize {
        self.iters.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iters.is_empty()
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn accept_count(&self) -> usize {
        self.accept_count
    }

    /// Accepted moves over all iterations, burn-in included.
    pub fn acceptance_rate(&self) -> f64 {
        if self.iterations == 0 {
            0.0
        } else {
            self.accept_count as f64 / self.iterations as f64
        }
    }

    pub fn record(&self, index: usize) -> TraceRecord<'_> {
        TraceRecord {
            iter: self.iters[index],
            accepted: self.accepted[index],
            log_pi: self.log_pi[index],
            trace: self,
            index,
        }
    }

    pub fn records(&self) -> impl Iterator<Item = TraceRecord<'_>> {
        (0..self.len()).map(move |i| self.record(i))
    }

    pub fn is_active(&self, index: usize, component: usize) -> bool {
        (self.mask_bits[index * self.words + component / 64] >> (component % 64)) & 1 == 1
    }

    pub fn state(&self, index: usize) -> SparseState {
        SparseState::from_dense(&self.dense(index))
    }

    pub fn dense(&self, index: usize) -> DenseMatrix {
        let mut x = Array2::zeros((self.p, self.t));
        let mut vals = self.record(index).values().iter();
        for i in 0..self.p {
            if self.is_active(index, i) {
                for j in 0..self.t {
                    x[[i, j]] = *vals.next().expect("value count matches mask");
                }
            }
        }
        x
    }

    fn selected(&self, after_iter: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.len()).filter(move |&k| self.iters[k] > after_iter)
    }

    /// Fraction of records with iteration `> after_iter` in which each component is active.
    pub fn activation_frequencies(&self, after_iter: usize) -> Result<Vec<f64>> {
        let mut counts = vec![0usize; self.p];
        let mut n = 0usize;
        for k in self.selected(after_iter) {
            n += 1;
            for (i, c) in counts.iter_mut().enumerate() {
                if self.is_active(k, i) {
                    *c += 1;
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptyTrace);
        }
        Ok(counts.into_iter().map(|c| c as f64 / n as f64).collect())
    }

    pub fn mean_active(&self, after_iter: usize) -> Result<f64> {
        let (sum, n) = self
            .selected(after_iter)
            .fold((0usize, 0usize), |(s, n), k| {
                (s + self.record(k).n_active(), n + 1)
            });
        if n == 0 {
            return Err(Error::EmptyTrace);
        }
        Ok(sum as f64 / n as f64)
    }

    pub fn posterior_mean(&self, after_iter: usize) -> Result<DenseMatrix> {
        let mut acc = Array2::<f64>::zeros((self.p, self.t));
        let mut n = 0usize;
        for k in self.selected(after_iter) {
            n += 1;
            let mut vals = self.record(k).values().iter();
            for i in 0..self.p {
                if self.is_active(k, i) {
                    for j in 0..self.t {
                        acc[[i, j]] += vals.next().expect("value count matches mask");
                    }
                }
            }
        }
        if n == 0 {
            return Err(Error::EmptyTrace);
        }
        Ok(acc / n as f64)
    }

    /// Values of entry `(component, column)` across records (zero when inactive).
    pub fn component_series(&self, component: usize, column: usize) -> Vec<f64> {
        self.records()
            .map(|r| {
                if !r.is_active(component) {
                    return 0.0;
                }
                let row = (0..component).filter(|&i| r.is_active(i)).count();
                r.values()[row * self.t + column]
            })
            .collect()
    }

    /// CSV with header `iter,accepted,n_active,log_pi,m0,...,m{P-1}`.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![
            "iter".to_string(),
            "accepted".into(),
            "n_active".into(),
            "log_pi".into(),
        ];
        header.extend((0..self.p).map(|i| format!("m{i}")));
        out.write_record(&header)?;
        for r in self.records() {
            let mut row = vec![
                r.iter.to_string(),
                u8::from(r.accepted).to_string(),
                r.n_active().to_string(),
                format!("{}", r.log_pi),
            ];
            row.extend((0..self.p).map(|i| if r.is_active(i) { "1" } else { "0" }.to_string()));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}
