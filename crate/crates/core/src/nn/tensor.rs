use crate::error::{Error, Result};

/// Dense NCHW tensor. Feature matrices use `h = w = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    pub shape: [usize; 4],
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: [usize; 4]) -> Self {
        Self {
            shape,
            data: vec![0.0; shape.iter().product()],
        }
    }

    pub fn from_vec(shape: [usize; 4], data: Vec<f64>) -> Result<Self> {
        let want: usize = shape.iter().product();
        if data.len() != want {
            return Err(Error::Input(format!(
                "tensor data has {} elements, shape {:?} needs {want}",
                data.len(),
                shape
            )));
        }
        Ok(Self { shape, data })
    }

    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Self {
            shape: [rows, cols, 1, 1],
            data,
        }
    }

    pub fn n(&self) -> usize {
        self.shape[0]
    }

    pub fn c(&self) -> usize {
        self.shape[1]
    }

    pub fn h(&self) -> usize {
        self.shape[2]
    }

    pub fn w(&self) -> usize {
        self.shape[3]
    }

    /// Elements per batch item.
    pub fn item_len(&self) -> usize {
        self.shape[1] * self.shape[2] * self.shape[3]
    }

    pub fn item(&self, i: usize) -> &[f64] {
        let l = self.item_len();
        &self.data[i * l..(i + 1) * l]
    }

    /// View as a `[n, c·h·w]` matrix.
    pub fn flatten(self) -> Self {
        let l = self.item_len();
        Self {
            shape: [self.shape[0], l, 1, 1],
            data: self.data,
        }
    }

    pub fn reshape(self, shape: [usize; 4]) -> Self {
        assert_eq!(shape.iter().product::<usize>(), self.data.len());
        Self {
            shape,
            data: self.data,
        }
    }

    /// Rows of the batch in the given order.
    pub fn select(&self, rows: &[usize]) -> Self {
        let l = self.item_len();
        let mut data = Vec::with_capacity(rows.len() * l);
        for &r in rows {
            data.extend_from_slice(self.item(r));
        }
        Self {
            shape: [rows.len(), self.shape[1], self.shape[2], self.shape[3]],
            data,
        }
    }

    /// Concatenate feature matrices along the feature axis.
    pub fn concat_features(parts: &[&Tensor]) -> Self {
        let n = parts[0].n();
        let widths: Vec<usize> = parts.iter().map(|p| p.item_len()).collect();
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(n * total);
        for i in 0..n {
            for p in parts {
                debug_assert_eq!(p.n(), n);
                data.extend_from_slice(p.item(i));
            }
        }
        Self {
            shape: [n, total, 1, 1],
            data,
        }
    }

    /// Inverse of [`Tensor::concat_features`]: split a feature matrix into column blocks.
    pub fn split_features(&self, widths: &[usize]) -> Vec<Tensor> {
        let n = self.n();
        let total = self.item_len();
        assert_eq!(widths.iter().sum::<usize>(), total);
        let mut out: Vec<Vec<f64>> = widths.iter().map(|w| Vec::with_capacity(n * w)).collect();
        for i in 0..n {
            let row = self.item(i);
            let mut off = 0;
            for (o, &w) in out.iter_mut().zip(widths) {
                o.extend_from_slice(&row[off..off + w]);
                off += w;
            }
        }
        out.into_iter()
            .zip(widths)
            .map(|(d, &w)| Tensor::matrix(n, w, d))
            .collect()
    }

    pub fn add_assign(&mut self, other: &Tensor) {
        assert_eq!(self.shape, other.shape);
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn concat_then_split_recovers_parts() {
        let a = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let b = Tensor::matrix(2, 1, vec![5.0, 6.0]);
        let c = Tensor::concat_features(&[&a, &b]);
        assert_eq!(c.data, vec![1.0, 2.0, 5.0, 3.0, 4.0, 6.0]);
        let parts = c.split_features(&[2, 1]);
        assert_eq!(parts[0], a);
        assert_eq!(parts[1], b);
    }

    #[test]
    fn from_vec_checks_length() {
        assert!(Tensor::from_vec([1, 2, 2, 2], vec![0.0; 7]).is_err());
    }
}
