//! Sparse Cholesky of the secant stiffness, sequential and with the symbolic
//! analysis shared between factorisations.

use std::sync::Arc;

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::sparse::linalg::cholesky::{factorize_symbolic_cholesky, LltRef, SymbolicCholesky, SymmetricOrdering};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};
use faer::{Conj, Par, Side};

use super::FemError;

#[derive(Clone, Debug)]
pub(crate) struct SymbolicFactor {
    inner: Arc<SymbolicCholesky<usize>>,
}

impl SymbolicFactor {
    /// Lower-triangle pattern, fill-reducing ordering by approximate minimum degree.
    pub fn new(pattern: SymbolicSparseColMatRef<'_, usize>) -> Result<Self, FemError> {
        let inner = factorize_symbolic_cholesky(pattern, Side::Lower, SymmetricOrdering::Amd, Default::default())
            .map_err(|e| FemError::InvalidModel(format!("symbolic factorisation failed: {e:?}")))?;
        Ok(Self { inner: Arc::new(inner) })
    }

    pub fn factor(&self, mat: SparseColMatRef<'_, usize, f64>) -> Result<Factor, FemError> {
        let mut values = vec![0.0; self.inner.len_val()];
        let mut buf = MemBuffer::new(
            self.inner
                .factorize_numeric_llt_scratch::<f64>(Par::Seq, Default::default()),
        );
        self.inner
            .factorize_numeric_llt(
                &mut values,
                mat,
                Side::Lower,
                Default::default(),
                Par::Seq,
                MemStack::new(&mut buf),
                Default::default(),
            )
            .map_err(|_| FemError::SingularSystem)?;
        Ok(Factor {
            symbolic: self.inner.clone(),
            values,
        })
    }
}

pub(crate) struct Factor {
    symbolic: Arc<SymbolicCholesky<usize>>,
    values: Vec<f64>,
}

impl Factor {
    pub fn solve_in_place(&self, rhs: &mut [f64]) {
        let n = rhs.len();
        let mut buf = MemBuffer::new(self.symbolic.solve_in_place_scratch::<f64>(1, Par::Seq));
        let mat = faer::MatMut::from_column_major_slice_mut(rhs, n, 1);
        LltRef::new(&self.symbolic, &self.values).solve_in_place_with_conj(
            Conj::No,
            mat,
            Par::Seq,
            MemStack::new(&mut buf),
        );
    }
}
