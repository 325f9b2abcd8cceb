//! Dense real tensors and the multilinear primitives used by every estimator.
//!
//! Data are stored with the first index varying fastest, so the linear
//! position of `(i_1, ..., i_r)` is `i_1 + p_1 * (i_2 + p_2 * (...))`. With
//! this layout `vec(X ⊙_1 A_1 ⋯ ⊙_r A_r) = (A_r ⊗ ⋯ ⊗ A_1) vec(X)`.
//!
//! The columns of the `m`-flattening enumerate the remaining indices with the
//! smallest-numbered remaining mode varying fastest. Modes are zero-based.

use nalgebra::{DMatrix, DVector};

use crate::error::{BssError, Result};

pub type Matrix = DMatrix<f64>;

/// A dense tensor of order `r >= 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    dims: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(dims: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        validate_dims(&dims)?;
        let n: usize = dims.iter().product();
        if data.len() != n {
            return Err(BssError::ShapeMismatch(format!(
                "data length {} does not match dims {:?} (expected {n})",
                data.len(),
                dims
            )));
        }
        Ok(Tensor { dims, data })
    }

    pub fn zeros(dims: Vec<usize>) -> Result<Self> {
        validate_dims(&dims)?;
        let n = dims.iter().product();
        Ok(Tensor {
            dims,
            data: vec![0.0; n],
        })
    }

    /// Builds a tensor by evaluating `f` at every multi-index.
    pub fn from_fn(dims: Vec<usize>, mut f: impl FnMut(&[usize]) -> f64) -> Result<Self> {
        validate_dims(&dims)?;
        let n: usize = dims.iter().product();
        let mut idx = vec![0; dims.len()];
        let mut data = Vec::with_capacity(n);
        for l in 0..n {
            unravel_into(l, &dims, &mut idx);
            data.push(f(&idx));
        }
        Ok(Tensor { dims, data })
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, idx: &[usize]) -> f64 {
        self.data[ravel(idx, &self.dims)]
    }

    /// Number of `m`-mode vectors, `ρ_m = ∏_{i≠m} p_i`.
    pub fn rho(&self, m: usize) -> usize {
        rho(&self.dims, m)
    }

    /// The `m`-flattening, a `p_m × ρ_m` matrix whose columns are the `m`-mode vectors.
    pub fn flatten(&self, m: usize) -> Result<Matrix> {
        check_mode(m, self.order())?;
        let (inner, pm, outer) = split_dims(&self.dims, m);
        let mut out = Matrix::zeros(pm, inner * outer);
        for b in 0..outer {
            for i in 0..pm {
                let base = inner * (i + pm * b);
                for a in 0..inner {
                    out[(i, a + inner * b)] = self.data[base + a];
                }
            }
        }
        Ok(out)
    }

    /// Inverse of [`Tensor::flatten`].
    pub fn unflatten(mat: &Matrix, m: usize, dims: &[usize]) -> Result<Tensor> {
        validate_dims(dims)?;
        check_mode(m, dims.len())?;
        let (inner, pm, outer) = split_dims(dims, m);
        if mat.nrows() != pm || mat.ncols() != inner * outer {
            return Err(BssError::ShapeMismatch(format!(
                "{}x{} matrix cannot be the mode-{m} flattening of dims {:?}",
                mat.nrows(),
                mat.ncols(),
                dims
            )));
        }
        let mut data = vec![0.0; pm * inner * outer];
        for b in 0..outer {
            for i in 0..pm {
                let base = inner * (i + pm * b);
                for a in 0..inner {
                    data[base + a] = mat[(i, a + inner * b)];
                }
            }
        }
        Ok(Tensor {
            dims: dims.to_vec(),
            data,
        })
    }

    /// `X ⊙_m A`: applies `A` (`q × p_m`) to every `m`-mode vector.
    pub fn mode_product(&self, a: &Matrix, m: usize) -> Result<Tensor> {
        check_mode(m, self.order())?;
        let pm = self.dims[m];
        if a.ncols() != pm {
            return Err(BssError::ShapeMismatch(format!(
                "mode-{m} product needs a matrix with {pm} columns, got {}x{}",
                a.nrows(),
                a.ncols()
            )));
        }
        let (inner, _, outer) = split_dims(&self.dims, m);
        let q = a.nrows();
        let mut data = vec![0.0; inner * q * outer];
        for b in 0..outer {
            for j in 0..pm {
                let src = inner * (j + pm * b);
                for i in 0..q {
                    let aij = a[(i, j)];
                    if aij == 0.0 {
                        continue;
                    }
                    let dst = inner * (i + q * b);
                    for k in 0..inner {
                        data[dst + k] += aij * self.data[src + k];
                    }
                }
            }
        }
        let mut dims = self.dims.clone();
        dims[m] = q;
        Ok(Tensor { dims, data })
    }

    /// Applies one matrix per mode, `X ⊙_1 A_1 ⋯ ⊙_r A_r`.
    pub fn multi_mode_product(&self, mats: &[Matrix]) -> Result<Tensor> {
        if mats.len() != self.order() {
            return Err(BssError::ShapeMismatch(format!(
                "expected {} mode matrices, got {}",
                self.order(),
                mats.len()
            )));
        }
        let mut out = self.clone();
        for (m, a) in mats.iter().enumerate() {
            out = out.mode_product(a, m)?;
        }
        Ok(out)
    }

    pub fn vectorize(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.data)
    }
}

/// `X ⊙_{-m} Y = X^{(m)} (Y^{(m)})ᵀ`.
pub fn mode_gram(x: &Tensor, y: &Tensor, m: usize) -> Result<Matrix> {
    if x.dims != y.dims {
        return Err(BssError::ShapeMismatch(format!(
            "mode gram of tensors with dims {:?} and {:?}",
            x.dims, y.dims
        )));
    }
    check_mode(m, x.order())?;
    let (inner, pm, outer) = split_dims(&x.dims, m);
    let mut out = Matrix::zeros(pm, pm);
    for b in 0..outer {
        for k in 0..pm {
            let xk = &x.data[inner * (k + pm * b)..][..inner];
            for l in 0..pm {
                let yl = &y.data[inner * (l + pm * b)..][..inner];
                out[(k, l)] += xk.iter().zip(yl).map(|(u, v)| u * v).sum::<f64>();
            }
        }
    }
    Ok(out)
}

/// An ordered sequence of equally-shaped tensors.
#[derive(Debug, Clone, PartialEq)]
pub struct TensorSeries {
    dims: Vec<usize>,
    frames: Vec<Tensor>,
}

impl TensorSeries {
    pub fn new(frames: Vec<Tensor>) -> Result<Self> {
        let first = frames
            .first()
            .ok_or_else(|| BssError::InvalidParameter("series needs at least one frame".into()))?;
        let dims = first.dims.clone();
        if let Some((t, f)) = frames.iter().enumerate().find(|(_, f)| f.dims != dims) {
            return Err(BssError::ShapeMismatch(format!(
                "frame {t} has dims {:?}, expected {:?}",
                f.dims, dims
            )));
        }
        Ok(TensorSeries { dims, frames })
    }

    /// Series of order-1 tensors from the columns of a `p × T` matrix.
    pub fn from_vector_series(x: &Matrix) -> Result<Self> {
        let frames = x
            .column_iter()
            .map(|c| Tensor::new(vec![x.nrows()], c.iter().copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        TensorSeries::new(frames)
    }

    /// Series whose frames are the columns of `x` reshaped to `dims`.
    pub fn from_columns(x: &Matrix, dims: &[usize]) -> Result<Self> {
        let frames = x
            .column_iter()
            .map(|c| Tensor::new(dims.to_vec(), c.iter().copied().collect()))
            .collect::<Result<Vec<_>>>()?;
        TensorSeries::new(frames)
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn order(&self) -> usize {
        self.dims.len()
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frames(&self) -> &[Tensor] {
        &self.frames
    }

    pub fn frame(&self, t: usize) -> &Tensor {
        &self.frames[t]
    }

    pub fn frame_size(&self) -> usize {
        self.dims.iter().product()
    }

    /// Vectorized frames as the columns of a `∏p_m × T` matrix.
    pub fn to_vector_series(&self) -> Matrix {
        let n = self.frame_size();
        let mut out = Matrix::zeros(n, self.len());
        for (t, f) in self.frames.iter().enumerate() {
            out.column_mut(t).copy_from_slice(&f.data);
        }
        out
    }

    /// Element-wise temporal mean.
    pub fn mean(&self) -> Tensor {
        let n = self.frame_size();
        let mut acc = vec![0.0; n];
        for f in &self.frames {
            for (a, v) in acc.iter_mut().zip(&f.data) {
                *a += v;
            }
        }
        let tf = self.len() as f64;
        acc.iter_mut().for_each(|a| *a /= tf);
        Tensor {
            dims: self.dims.clone(),
            data: acc,
        }
    }

    /// Subtracts `offset` from every frame.
    pub fn subtract(&self, offset: &Tensor) -> Result<TensorSeries> {
        if offset.dims != self.dims {
            return Err(BssError::ShapeMismatch(format!(
                "offset dims {:?} differ from series dims {:?}",
                offset.dims, self.dims
            )));
        }
        let frames = self
            .frames
            .iter()
            .map(|f| Tensor {
                dims: f.dims.clone(),
                data: f.data.iter().zip(&offset.data).map(|(a, b)| a - b).collect(),
            })
            .collect();
        Ok(TensorSeries {
            dims: self.dims.clone(),
            frames,
        })
    }

    /// Frame-wise `X_t ⊙_1 A_1 ⋯ ⊙_r A_r`.
    pub fn multi_mode_product(&self, mats: &[Matrix]) -> Result<TensorSeries> {
        let frames = self
            .frames
            .iter()
            .map(|f| f.multi_mode_product(mats))
            .collect::<Result<Vec<_>>>()?;
        TensorSeries::new(frames)
    }

    pub fn map_frames(&self, f: impl Fn(&Tensor) -> Result<Tensor>) -> Result<TensorSeries> {
        TensorSeries::new(self.frames.iter().map(f).collect::<Result<Vec<_>>>()?)
    }

    /// Series of component `l` (linear-layout position) over time.
    pub fn component(&self, l: usize) -> Vec<f64> {
        self.frames.iter().map(|f| f.data[l]).collect()
    }

    pub fn scaled(&self, c: f64) -> TensorSeries {
        let frames = self
            .frames
            .iter()
            .map(|f| Tensor {
                dims: f.dims.clone(),
                data: f.data.iter().map(|v| v * c).collect(),
            })
            .collect();
        TensorSeries {
            dims: self.dims.clone(),
            frames,
        }
    }
}

/// Removes the element-wise temporal mean.
pub fn center(s: &TensorSeries) -> TensorSeries {
    let mean = s.mean();
    s.subtract(&mean).expect("mean has the series dims")
}

pub fn rho(dims: &[usize], m: usize) -> usize {
    dims.iter()
        .enumerate()
        .filter(|&(k, _)| k != m)
        .map(|(_, &p)| p)
        .product()
}

/// Multi-index of linear position `l` under the first-index-fastest layout.
pub fn unravel(l: usize, dims: &[usize]) -> Vec<usize> {
    let mut idx = vec![0; dims.len()];
    unravel_into(l, dims, &mut idx);
    idx
}

pub fn ravel(idx: &[usize], dims: &[usize]) -> usize {
    idx.iter().zip(dims).rev().fold(0, |acc, (&i, &p)| acc * p + i)
}

fn unravel_into(mut l: usize, dims: &[usize], idx: &mut [usize]) {
    for (slot, &p) in idx.iter_mut().zip(dims) {
        *slot = l % p;
        l /= p;
    }
}

pub(crate) fn check_mode(m: usize, order: usize) -> Result<()> {
    if m >= order {
        Err(BssError::ModeOutOfRange { mode: m, order })
    } else {
        Ok(())
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.is_empty() {
        return Err(BssError::InvalidParameter("tensor order must be at least 1".into()));
    }
    if dims.contains(&0) {
        return Err(BssError::InvalidParameter(format!(
            "every dimension must be positive, got {dims:?}"
        )));
    }
    Ok(())
}

// (product of dims before m, p_m, product of dims after m)
fn split_dims(dims: &[usize], m: usize) -> (usize, usize, usize) {
    let inner = dims[..m].iter().product();
    let outer = dims[m + 1..].iter().product();
    (inner, dims[m], outer)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_tensor(dims: &[usize], rng: &mut impl Rng) -> Tensor {
        Tensor::from_fn(dims.to_vec(), |_| rng.random_range(-1.0..1.0)).unwrap()
    }

    fn random_matrix(r: usize, c: usize, rng: &mut impl Rng) -> Matrix {
        Matrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn matrix_flattenings_are_matrix_and_transpose() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let t = Tensor::new(vec![2, 3], m.as_slice().to_vec()).unwrap();
        assert_eq!(t.flatten(0).unwrap(), m);
        assert_eq!(t.flatten(1).unwrap(), m.transpose());
    }

    #[test]
    fn flatten_matches_fiber_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = random_tensor(&[3, 2, 2], &mut rng);
        let f = x.flatten(1).unwrap();
        assert_eq!(f.shape(), (2, 6));
        // brute force: columns over (i1, i3) with i1 fastest
        let mut col = 0;
        for i3 in 0..2 {
            for i1 in 0..3 {
                for i2 in 0..2 {
                    assert_eq!(f[(i2, col)], x.get(&[i1, i2, i3]));
                }
                col += 1;
            }
        }
    }

    #[test]
    fn unflatten_round_trip_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let x = random_tensor(&[3, 2, 2], &mut rng);
        for m in 0..3 {
            let f = x.flatten(m).unwrap();
            assert_eq!(Tensor::unflatten(&f, m, x.dims()).unwrap(), x);
        }
        let z = Tensor::unflatten(&Matrix::zeros(2, 6), 1, &[3, 2, 2]).unwrap();
        assert!(z.data().iter().all(|&v| v == 0.0));
        assert!(Tensor::unflatten(&Matrix::zeros(3, 6), 1, &[3, 2, 2]).is_err());
    }

    #[test]
    fn permuted_columns_do_not_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = random_tensor(&[3, 2, 2], &mut rng);
        let f = x.flatten(0).unwrap();
        let mut g = f.clone();
        g.swap_columns(0, 1);
        assert_ne!(Tensor::unflatten(&g, 0, x.dims()).unwrap(), x);
    }

    #[test]
    fn mode_product_identities() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let x = random_tensor(&[3, 2, 2], &mut rng);
        assert_eq!(x.mode_product(&Matrix::identity(2, 2), 1).unwrap(), x);
        let a = random_matrix(4, 3, &mut rng);
        let b = random_matrix(2, 2, &mut rng);
        let y = x.mode_product(&a, 0).unwrap();
        assert_eq!(y.dims(), &[4, 2, 2]);
        let lhs = y.flatten(0).unwrap();
        let rhs = &a * x.flatten(0).unwrap();
        assert!((lhs - rhs).amax() < 1e-14);
        let ab = x.mode_product(&a, 0).unwrap().mode_product(&b, 1).unwrap();
        let ba = x.mode_product(&b, 1).unwrap().mode_product(&a, 0).unwrap();
        let diff = ab
            .data()
            .iter()
            .zip(ba.data())
            .map(|(u, v)| (u - v).abs())
            .fold(0.0, f64::max);
        assert!(diff < 1e-14);
        assert!(x.mode_product(&a, 1).is_err());
        assert!(matches!(x.mode_product(&a, 3), Err(BssError::ModeOutOfRange { .. })));
    }

    #[test]
    fn mode_gram_of_basis_tensor() {
        let dims = vec![3, 2, 2];
        let e = Tensor::from_fn(dims.clone(), |idx| if idx == [2, 1, 0] { 1.0 } else { 0.0 }).unwrap();
        for (m, &im) in [2usize, 1, 0].iter().enumerate() {
            let g = mode_gram(&e, &e, m).unwrap();
            let mut expect = Matrix::zeros(dims[m], dims[m]);
            expect[(im, im)] = 1.0;
            assert_eq!(g, expect);
        }
    }

    #[test]
    fn mode_gram_is_sum_of_fiber_outer_products() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_tensor(&[3, 2, 2], &mut rng);
        let g = mode_gram(&x, &x, 0).unwrap();
        let mut brute = Matrix::zeros(3, 3);
        for i2 in 0..2 {
            for i3 in 0..2 {
                let v = nalgebra::DVector::from_fn(3, |i, _| x.get(&[i, i2, i3]));
                brute += &v * v.transpose();
            }
        }
        assert!((&g - brute).amax() < 1e-14);
        assert!((&g - g.transpose()).amax() == 0.0);
        assert!(g.symmetric_eigenvalues().iter().all(|&l| l > -1e-12));
    }

    #[test]
    fn vectorize_layout() {
        // element (2,1) in one-based indexing is position 2
        let t = Tensor::new(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        assert_eq!(t.get(&[1, 0]), t.vectorize()[1]);
        assert_eq!(t.vectorize()[1], 2.0);
        let z = Tensor::zeros(vec![3, 2]).unwrap();
        assert!(z.vectorize().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn center_properties() {
        let c = Tensor::new(vec![2], vec![1.5, -2.0]).unwrap();
        let s = TensorSeries::new(vec![c.clone(), c.clone(), c]).unwrap();
        let z = center(&s);
        assert!(z.frames().iter().all(|f| f.data().iter().all(|&v| v == 0.0)));

        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let frames = (0..20).map(|_| random_tensor(&[3, 2], &mut rng)).collect();
        let s = TensorSeries::new(frames).unwrap();
        let c1 = center(&s);
        assert!(c1.mean().data().iter().all(|v| v.abs() < 1e-12));
        let c2 = center(&c1);
        let d = c1
            .frames()
            .iter()
            .zip(c2.frames())
            .flat_map(|(a, b)| a.data().iter().zip(b.data()).map(|(u, v)| (u - v).abs()))
            .fold(0.0, f64::max);
        assert!(d < 1e-15);
    }

    #[test]
    fn invalid_shapes_rejected() {
        assert!(Tensor::new(vec![2, 2], vec![0.0; 3]).is_err());
        assert!(Tensor::new(vec![], vec![]).is_err());
        assert!(Tensor::new(vec![2, 0], vec![]).is_err());
        let a = Tensor::zeros(vec![2, 2]).unwrap();
        let b = Tensor::zeros(vec![2, 3]).unwrap();
        assert!(TensorSeries::new(vec![a.clone(), b.clone()]).is_err());
        assert!(mode_gram(&a, &b, 0).is_err());
        assert!(TensorSeries::new(vec![]).is_err());
    }

    #[test]
    fn ravel_unravel_inverse() {
        let dims = [3, 2, 4];
        for l in 0..24 {
            assert_eq!(ravel(&unravel(l, &dims), &dims), l);
        }
    }
}
