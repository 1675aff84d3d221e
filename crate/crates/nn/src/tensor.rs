use crate::real::Real;
use crate::NnError;

/// Dense `(batch, channels, height, width)` array, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct Tensor<T> {
    dims: [usize; 4],
    data: Vec<T>,
}

impl<T: Real> Tensor<T> {
    pub fn zeros(dims: [usize; 4]) -> Self {
        Self {
            dims,
            data: vec![T::ZERO; dims.iter().product()],
        }
    }

    pub fn filled(dims: [usize; 4], v: T) -> Self {
        Self {
            dims,
            data: vec![v; dims.iter().product()],
        }
    }

    pub fn from_vec(dims: [usize; 4], data: Vec<T>) -> Result<Self, NnError> {
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(NnError::DimMismatch(format!(
                "{dims:?} needs {n} values, got {}",
                data.len()
            )));
        }
        Ok(Self { dims, data })
    }

    pub fn from_fn(dims: [usize; 4], mut f: impl FnMut([usize; 4]) -> T) -> Self {
        let mut data = Vec::with_capacity(dims.iter().product());
        for n in 0..dims[0] {
            for c in 0..dims[1] {
                for y in 0..dims[2] {
                    for x in 0..dims[3] {
                        data.push(f([n, c, y, x]));
                    }
                }
            }
        }
        Self { dims, data }
    }

    pub fn dims(&self) -> [usize; 4] {
        self.dims
    }

    pub fn batch(&self) -> usize {
        self.dims[0]
    }

    pub fn channels(&self) -> usize {
        self.dims[1]
    }

    pub fn height(&self) -> usize {
        self.dims[2]
    }

    pub fn width(&self) -> usize {
        self.dims[3]
    }

    /// Values per batch item.
    pub fn item_len(&self) -> usize {
        self.dims[1] * self.dims[2] * self.dims[3]
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn offset(&self, i: [usize; 4]) -> usize {
        ((i[0] * self.dims[1] + i[1]) * self.dims[2] + i[2]) * self.dims[3] + i[3]
    }

    pub fn at(&self, i: [usize; 4]) -> T {
        self.data[self.offset(i)]
    }

    pub fn set(&mut self, i: [usize; 4], v: T) {
        let o = self.offset(i);
        self.data[o] = v;
    }

    pub fn item(&self, n: usize) -> &[T] {
        let l = self.item_len();
        &self.data[n * l..(n + 1) * l]
    }

    pub fn item_mut(&mut self, n: usize) -> &mut [T] {
        let l = self.item_len();
        &mut self.data[n * l..(n + 1) * l]
    }

    pub fn plane(&self, n: usize, c: usize) -> &[T] {
        let l = self.dims[2] * self.dims[3];
        let o = (n * self.dims[1] + c) * l;
        &self.data[o..o + l]
    }

    pub fn plane_mut(&mut self, n: usize, c: usize) -> &mut [T] {
        let l = self.dims[2] * self.dims[3];
        let o = (n * self.dims[1] + c) * l;
        &mut self.data[o..o + l]
    }

    /// Same values under new dimensions of equal volume.
    pub fn reshape(self, dims: [usize; 4]) -> Result<Self, NnError> {
        Self::from_vec(dims, self.data)
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            dims: self.dims,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn cast<U: Real>(&self) -> Tensor<U> {
        Tensor {
            dims: self.dims,
            data: self.data.iter().map(|v| U::from_f64(v.to_f64())).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Tensor<T>) {
        assert_eq!(self.dims, other.dims, "tensor dims differ");
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    /// Stacks single-item tensors along the batch axis.
    pub fn stack(items: &[Tensor<T>]) -> Result<Self, NnError> {
        let first = items
            .first()
            .ok_or_else(|| NnError::DimMismatch("empty stack".into()))?;
        let [_, c, h, w] = first.dims;
        let mut data = Vec::with_capacity(items.len() * first.item_len());
        for t in items {
            if t.dims[1..] != first.dims[1..] {
                return Err(NnError::DimMismatch(format!(
                    "stacking {:?} onto {:?}",
                    t.dims, first.dims
                )));
            }
            data.extend_from_slice(&t.data);
        }
        let n = data.len() / (c * h * w).max(1);
        Self::from_vec([n, c, h, w], data)
    }

    /// Batch item `n` as its own tensor.
    pub fn slice_item(&self, n: usize) -> Self {
        Self {
            dims: [1, self.dims[1], self.dims[2], self.dims[3]],
            data: self.item(n).to_vec(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}
