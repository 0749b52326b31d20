//! Dense third-order tensors and the t-product algebra: block unfoldings,
//! the mode-3 discrete Fourier transform, t-product, t-SVD, the tensor
//! nuclear norm, and its proximal operator.
//!
//! Frequency-domain work decomposes only the first `⌈(n3+1)/2⌉` slices; the
//! rest of the spectrum is mirrored by conjugation, which halves the SVD cost
//! and keeps inverse transforms real by construction.

use std::ops::{Add, Index, IndexMut, Mul, Sub};

use ndarray::prelude::*;
use ndarray_linalg::{JobSvd, SVD, SVDDC};
use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::FftPlanner;
use thiserror::Error;

/// Relative imaginary residue above which an inverse transform refuses to
/// discard the imaginary part. Spectra built from real tensors land below
/// 1e-10; anything past this bound means the spectrum was corrupted upstream.
const SYMMETRY_TOL: f64 = 1e-8;

/// Errors raised by tensor-algebra operations.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("{context}: expected {expected}, got {got}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        got: String,
    },
    #[error("shrinkage parameter tau must be positive, got {0}")]
    NonPositiveTau(f64),
    #[error(
        "inverse mode-3 transform input violates conjugate symmetry \
         (relative imaginary residue {0:.3e})"
    )]
    BrokenSymmetry(f64),
    #[error(transparent)]
    Backend(#[from] ndarray_linalg::error::LinalgError),
}

fn shape_err(
    context: &'static str,
    expected: impl Into<String>,
    got: impl Into<String>,
) -> TensorError {
    TensorError::ShapeMismatch {
        context,
        expected: expected.into(),
        got: got.into(),
    }
}

/// Dense real third-order tensor of shape `n1 × n2 × n3`, indexed `(i, j, k)`
/// with `k` selecting the frontal slice.
///
/// Storage is slice-major (`k` outermost) so every frontal slice is a
/// contiguous `n1 × n2` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor3 {
    /// Backing array of shape `[n3, n1, n2]`.
    data: Array3<f64>,
}

impl Tensor3 {
    /// All-zero tensor of shape `n1 × n2 × n3`. Panics if any dim is zero.
    pub fn zeros(dims: (usize, usize, usize)) -> Self {
        let (n1, n2, n3) = dims;
        assert!(
            n1 >= 1 && n2 >= 1 && n3 >= 1,
            "tensor dims must all be at least 1, got {dims:?}"
        );
        Self {
            data: Array3::zeros((n3, n1, n2)),
        }
    }

    /// Builds a tensor by evaluating `f(i, j, k)` at every index, iterating
    /// k-major (k, then i, then j).
    pub fn from_fn(
        dims: (usize, usize, usize),
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Self {
        let mut t = Self::zeros(dims);
        let (n1, n2, n3) = dims;
        for k in 0..n3 {
            for i in 0..n1 {
                for j in 0..n2 {
                    t.data[[k, i, j]] = f(i, j, k);
                }
            }
        }
        t
    }

    /// Stacks equally-shaped matrices as frontal slices.
    pub fn from_slices(slices: &[Array2<f64>]) -> Result<Self, TensorError> {
        if slices.is_empty() {
            return Err(shape_err(
                "from_slices",
                "at least one frontal slice",
                "empty list",
            ));
        }
        let (n1, n2) = slices[0].dim();
        let mut t = Self::zeros((n1, n2, slices.len()));
        for (k, s) in slices.iter().enumerate() {
            if s.dim() != (n1, n2) {
                return Err(shape_err(
                    "from_slices",
                    format!("{n1} × {n2} for every slice"),
                    format!("{} × {} at slice {k}", s.nrows(), s.ncols()),
                ));
            }
            t.data.index_axis_mut(Axis(0), k).assign(s);
        }
        Ok(t)
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        let sh = self.data.shape();
        (sh[1], sh[2], sh[0])
    }

    pub fn n1(&self) -> usize {
        self.data.shape()[1]
    }

    pub fn n2(&self) -> usize {
        self.data.shape()[2]
    }

    pub fn n3(&self) -> usize {
        self.data.shape()[0]
    }

    /// Frontal slice `A^(k)` as an `n1 × n2` view, `k` 0-based.
    pub fn slice(&self, k: usize) -> ArrayView2<'_, f64> {
        self.data.index_axis(Axis(0), k)
    }

    pub fn slice_mut(&mut self, k: usize) -> ArrayViewMut2<'_, f64> {
        self.data.index_axis_mut(Axis(0), k)
    }

    /// Frobenius norm over all entries.
    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum::<f64>().sqrt()
    }

    /// Largest absolute entry (the elementwise infinity norm).
    pub fn norm_inf(&self) -> f64 {
        self.data.iter().fold(0.0, |m, x| m.max(x.abs()))
    }
}

impl Index<(usize, usize, usize)> for Tensor3 {
    type Output = f64;

    fn index(&self, (i, j, k): (usize, usize, usize)) -> &f64 {
        &self.data[[k, i, j]]
    }
}

impl IndexMut<(usize, usize, usize)> for Tensor3 {
    fn index_mut(&mut self, (i, j, k): (usize, usize, usize)) -> &mut f64 {
        &mut self.data[[k, i, j]]
    }
}

impl Add for &Tensor3 {
    type Output = Tensor3;

    fn add(self, rhs: &Tensor3) -> Tensor3 {
        Tensor3 {
            data: &self.data + &rhs.data,
        }
    }
}

impl Sub for &Tensor3 {
    type Output = Tensor3;

    fn sub(self, rhs: &Tensor3) -> Tensor3 {
        Tensor3 {
            data: &self.data - &rhs.data,
        }
    }
}

impl Mul<f64> for &Tensor3 {
    type Output = Tensor3;

    fn mul(self, rhs: f64) -> Tensor3 {
        Tensor3 {
            data: &self.data * rhs,
        }
    }
}

/// Mode-3 Fourier transform of a real tensor; complex, conjugate-symmetric
/// along the slice index: `slice(k) = conj(slice(n3 − k))` for `k ≥ 1`.
#[derive(Debug, Clone)]
pub struct FreqTensor3 {
    /// Backing array of shape `[n3, n1, n2]`, same layout as [`Tensor3`].
    data: Array3<Complex64>,
}

impl FreqTensor3 {
    pub fn dims(&self) -> (usize, usize, usize) {
        let sh = self.data.shape();
        (sh[1], sh[2], sh[0])
    }

    /// Frequency slice `k` as an `n1 × n2` complex view, `k` 0-based.
    pub fn slice(&self, k: usize) -> ArrayView2<'_, Complex64> {
        self.data.index_axis(Axis(0), k)
    }
}

/// t-SVD factors: `A = U * S * Vᵀ` with orthogonal `U` (n1×n1×n3) and `V`
/// (n2×n2×n3) and f-diagonal `S` (n1×n2×n3).
#[derive(Debug, Clone)]
pub struct TSvdFactors {
    pub u: Tensor3,
    pub s: Tensor3,
    pub v: Tensor3,
}

/// Stacks the frontal slices top to bottom into an `(n1·n3) × n2` matrix.
pub fn unfold(a: &Tensor3) -> Array2<f64> {
    let (n1, n2, n3) = a.dims();
    let mut m = Array2::zeros((n1 * n3, n2));
    for k in 0..n3 {
        m.slice_mut(s![k * n1..(k + 1) * n1, ..])
            .assign(&a.slice(k));
    }
    m
}

/// Inverse of [`unfold`]: reinterprets row blocks as frontal slices.
pub fn fold(m: &Array2<f64>, dims: (usize, usize, usize)) -> Result<Tensor3, TensorError> {
    let (n1, n2, n3) = dims;
    if m.dim() != (n1 * n3, n2) {
        return Err(shape_err(
            "fold",
            format!("{} × {n2} for dims {dims:?}", n1 * n3),
            format!("{} × {}", m.nrows(), m.ncols()),
        ));
    }
    let mut t = Tensor3::zeros(dims);
    for k in 0..n3 {
        t.slice_mut(k)
            .assign(&m.slice(s![k * n1..(k + 1) * n1, ..]));
    }
    Ok(t)
}

/// Block-diagonal matrix with the frontal slices on the diagonal.
pub fn bdiag(a: &Tensor3) -> Array2<f64> {
    let (n1, n2, n3) = a.dims();
    let mut m = Array2::zeros((n1 * n3, n2 * n3));
    for k in 0..n3 {
        m.slice_mut(s![k * n1..(k + 1) * n1, k * n2..(k + 1) * n2])
            .assign(&a.slice(k));
    }
    m
}

/// Block-circulant matrix: block `(bi, bj)` holds slice `(bi − bj) mod n3`,
/// so the first block column reads `A^(0), A^(1), …, A^(n3−1)` downward.
pub fn bcirc(a: &Tensor3) -> Array2<f64> {
    let (n1, n2, n3) = a.dims();
    let mut m = Array2::zeros((n1 * n3, n2 * n3));
    for bi in 0..n3 {
        for bj in 0..n3 {
            let k = (bi + n3 - bj) % n3;
            m.slice_mut(s![bi * n1..(bi + 1) * n1, bj * n2..(bj + 1) * n2])
                .assign(&a.slice(k));
        }
    }
    m
}

/// Unnormalized length-`n3` DFT applied to every mode-3 tube `A(i, j, :)`.
pub fn fft_mode3(a: &Tensor3) -> FreqTensor3 {
    let (n1, n2, n3) = a.dims();
    let mut tubes: Vec<Complex64> = Vec::with_capacity(n1 * n2 * n3);
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                tubes.push(Complex64::new(a.data[[k, i, j]], 0.0));
            }
        }
    }
    FftPlanner::new().plan_fft_forward(n3).process(&mut tubes);
    let mut data = Array3::zeros((n3, n1, n2));
    let mut idx = 0;
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                data[[k, i, j]] = tubes[idx];
                idx += 1;
            }
        }
    }
    FreqTensor3 { data }
}

/// Inverse mode-3 DFT. The imaginary residue left after the transform is
/// discarded once verified to be roundoff-sized; a larger residue means the
/// spectrum lost its conjugate symmetry and the input is rejected.
pub fn ifft_mode3(af: &FreqTensor3) -> Result<Tensor3, TensorError> {
    let (n1, n2, n3) = af.dims();
    let mut tubes: Vec<Complex64> = Vec::with_capacity(n1 * n2 * n3);
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                tubes.push(af.data[[k, i, j]]);
            }
        }
    }
    FftPlanner::new().plan_fft_inverse(n3).process(&mut tubes);
    let scale = 1.0 / n3 as f64;
    let mut re_max = 0.0f64;
    let mut im_max = 0.0f64;
    for z in &mut tubes {
        *z *= scale;
        re_max = re_max.max(z.re.abs());
        im_max = im_max.max(z.im.abs());
    }
    let residue = im_max / (1.0 + re_max);
    if residue > SYMMETRY_TOL {
        return Err(TensorError::BrokenSymmetry(residue));
    }
    let mut t = Tensor3::zeros((n1, n2, n3));
    let mut idx = 0;
    for i in 0..n1 {
        for j in 0..n2 {
            for k in 0..n3 {
                t.data[[k, i, j]] = tubes[idx].re;
                idx += 1;
            }
        }
    }
    Ok(t)
}

/// Fills slices past the half spectrum with conjugates of their mirrors,
/// restoring exact conjugate symmetry.
fn mirror_conjugate(f: &mut Array3<Complex64>) {
    let n3 = f.shape()[0];
    for k in (n3 / 2 + 1)..n3 {
        let src = f.index_axis(Axis(0), n3 - k).mapv(|z| z.conj());
        f.index_axis_mut(Axis(0), k).assign(&src);
    }
}

fn freq_from_half_slices(
    slices: Vec<Array2<Complex64>>,
    dims: (usize, usize, usize),
) -> FreqTensor3 {
    let (n1, n2, n3) = dims;
    let mut data = Array3::zeros((n3, n1, n2));
    for (k, s) in slices.into_iter().enumerate() {
        data.index_axis_mut(Axis(0), k).assign(&s);
    }
    mirror_conjugate(&mut data);
    FreqTensor3 { data }
}

/// t-product `A * B`: per-frequency matrix products after the mode-3 DFT,
/// equal to `fold(bcirc(A) · unfold(B))`.
pub fn t_product(a: &Tensor3, b: &Tensor3) -> Result<Tensor3, TensorError> {
    let (n1, n2, n3) = a.dims();
    let (n2b, n4, n3b) = b.dims();
    if n2 != n2b || n3 != n3b {
        return Err(shape_err(
            "t_product",
            format!("right operand ? × ? × {n3} with {n2} rows per slice"),
            format!("{n2b} × {n4} × {n3b}"),
        ));
    }
    let af = fft_mode3(a);
    let bf = fft_mode3(b);
    let products: Vec<Array2<Complex64>> = (0..=n3 / 2)
        .into_par_iter()
        .map(|k| af.slice(k).dot(&bf.slice(k)))
        .collect();
    let cf = freq_from_half_slices(products, (n1, n4, n3));
    // The mirrored spectrum is conjugate-symmetric by construction.
    Ok(ifft_mode3(&cf).expect("mirrored spectrum is conjugate-symmetric"))
}

/// Transposes every frontal slice and reverses the order of slices 1..n3.
pub fn tensor_transpose(a: &Tensor3) -> Tensor3 {
    let (n1, n2, n3) = a.dims();
    let mut t = Tensor3::zeros((n2, n1, n3));
    t.slice_mut(0).assign(&a.slice(0).t());
    for k in 1..n3 {
        t.slice_mut(k).assign(&a.slice(n3 - k).t());
    }
    t
}

/// Identity tensor `I ∈ n × n × n3`: first frontal slice is the identity
/// matrix, all others zero, so `A * I = I * A = A`.
pub fn identity_tensor(n: usize, n3: usize) -> Tensor3 {
    let mut t = Tensor3::zeros((n, n, n3));
    t.slice_mut(0).assign(&Array2::<f64>::eye(n));
    t
}

/// t-SVD `A = U * S * Vᵀ` via a full matrix SVD per frequency slice.
///
/// Panics only if the backend SVD rejects the input (non-finite entries).
pub fn t_svd(a: &Tensor3) -> TSvdFactors {
    let (n1, n2, n3) = a.dims();
    let af = fft_mode3(a);
    let parts: Vec<(Array2<Complex64>, Array1<f64>, Array2<Complex64>)> = (0..=n3 / 2)
        .into_par_iter()
        .map(|k| {
            let (u, s, vh) = af
                .slice(k)
                .to_owned()
                .svd(true, true)
                .expect("backend SVD failed; input must be finite");
            (u.expect("U requested"), s, vh.expect("Vᴴ requested"))
        })
        .collect();
    let mut uf = Vec::with_capacity(parts.len());
    let mut sf = Vec::with_capacity(parts.len());
    let mut vf = Vec::with_capacity(parts.len());
    for (u, s, vh) in parts {
        let mut s_slice = Array2::zeros((n1, n2));
        for (i, &sv) in s.iter().enumerate() {
            s_slice[[i, i]] = Complex64::new(sv, 0.0);
        }
        uf.push(u);
        sf.push(s_slice);
        vf.push(vh.t().mapv(|z| z.conj()));
    }
    let expect = "mirrored spectrum is conjugate-symmetric";
    TSvdFactors {
        u: ifft_mode3(&freq_from_half_slices(uf, (n1, n1, n3))).expect(expect),
        s: ifft_mode3(&freq_from_half_slices(sf, (n1, n2, n3))).expect(expect),
        v: ifft_mode3(&freq_from_half_slices(vf, (n2, n2, n3))).expect(expect),
    }
}

/// Tensor nuclear norm: occurrence of every Fourier-domain singular value,
/// summed across all `n3` frequency slices; equals `‖bcirc(A)‖_*`.
pub fn tnn(a: &Tensor3) -> f64 {
    let n3 = a.n3();
    let af = fft_mode3(a);
    let half = n3 / 2;
    let sums: Vec<f64> = (0..=half)
        .into_par_iter()
        .map(|k| {
            let (_, s, _) = af
                .slice(k)
                .to_owned()
                .svddc(JobSvd::None)
                .expect("backend SVD failed; input must be finite");
            s.sum()
        })
        .collect();
    let mut total = 0.0;
    for (k, sum) in sums.into_iter().enumerate() {
        // Slice k shares its singular values with its conjugate mirror
        // n3 − k, except at k = 0 and (for even n3) the Nyquist slice.
        let paired = k > 0 && !(n3.is_multiple_of(2) && k == half);
        total += if paired { 2.0 * sum } else { sum };
    }
    total
}

/// Proximal operator of the tensor nuclear norm: the minimizer of
/// `‖Q‖_⊛ + (1/(2·tau))·‖Q − M‖²_F`.
///
/// Parseval for the unnormalized length-`n3` DFT rescales the data term to
/// `1/(2·tau·n3)` per frequency slice, so each slice undergoes singular value
/// soft thresholding at `θ = n3·tau`.
pub fn tnn_prox(m: &Tensor3, tau: f64) -> Result<Tensor3, TensorError> {
    if tau.is_nan() || tau <= 0.0 {
        return Err(TensorError::NonPositiveTau(tau));
    }
    let (n1, n2, n3) = m.dims();
    let mf = fft_mode3(m);
    let theta = n3 as f64 * tau;
    let shrunk: Vec<Array2<Complex64>> = (0..=n3 / 2)
        .into_par_iter()
        .map(|k| -> Result<Array2<Complex64>, TensorError> {
            let (u, s, vh) = mf.slice(k).to_owned().svddc(JobSvd::Some)?;
            let mut u = u.expect("JobSvd::Some returns U");
            let vh = vh.expect("JobSvd::Some returns Vᴴ");
            for (j, &sv) in s.iter().enumerate() {
                let scale = (sv - theta).max(0.0);
                u.column_mut(j).mapv_inplace(|z| z * scale);
            }
            Ok(u.dot(&vh))
        })
        .collect::<Result<_, _>>()?;
    let qf = freq_from_half_slices(shrunk, (n1, n2, n3));
    Ok(ifft_mode3(&qf).expect("mirrored spectrum is conjugate-symmetric"))
}

/// Rotates `v` square `n × n` matrices into the `n × v × n` tensor `R` with
/// `R(a, i, b) = C^(i)(a, b)`: frontal slice `b` collects column `b` of every
/// matrix side by side.
pub fn construct_phi(c_list: &[Array2<f64>]) -> Result<Tensor3, TensorError> {
    if c_list.is_empty() {
        return Err(shape_err(
            "construct_phi",
            "at least one matrix",
            "empty list",
        ));
    }
    let n = c_list[0].nrows();
    for (i, c) in c_list.iter().enumerate() {
        if c.dim() != (n, n) {
            return Err(shape_err(
                "construct_phi",
                format!("{n} × {n} (square, matching the first matrix)"),
                format!("{} × {} at index {i}", c.nrows(), c.ncols()),
            ));
        }
    }
    let v = c_list.len();
    let mut r = Tensor3::zeros((n, v, n));
    for b in 0..n {
        let mut slice = r.slice_mut(b);
        for (i, c) in c_list.iter().enumerate() {
            slice.column_mut(i).assign(&c.column(b));
        }
    }
    Ok(r)
}

/// Inverse of [`construct_phi`]: recovers the matrix list from the rotated
/// tensor. Panics if the tensor is not `n × v × n`.
pub fn phi_inverse(r: &Tensor3) -> Vec<Array2<f64>> {
    let (n, v, n3) = r.dims();
    assert_eq!(n, n3, "phi tensor must be n × v × n, got {:?}", r.dims());
    (0..v)
        .map(|i| Array2::from_shape_fn((n, n), |(a, b)| r[(a, i, b)]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use ndarray_linalg::Norm;
    use rand::prelude::*;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_tensor(dims: (usize, usize, usize), rng: &mut impl Rng) -> Tensor3 {
        Tensor3::from_fn(dims, |_, _, _| rng.sample(StandardNormal))
    }

    fn matrix_nuclear_norm(m: &Array2<f64>) -> f64 {
        let (_, s, _) = m.svddc(JobSvd::None).unwrap();
        s.sum()
    }

    fn assert_close(a: &Tensor3, b: &Tensor3, tol: f64) {
        assert_eq!(a.dims(), b.dims());
        assert!(
            (a - b).norm_inf() <= tol,
            "tensors differ by {} > {tol}",
            (a - b).norm_inf()
        );
    }

    #[test]
    fn unfold_stacks_frontal_slices() {
        let a = Tensor3::from_slices(&[array![[1.0]], array![[2.0]]]).unwrap();
        assert_eq!(unfold(&a), array![[1.0], [2.0]]);
    }

    #[test]
    fn fold_inverts_unfold() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_tensor((3, 2, 4), &mut rng);
        assert_eq!(fold(&unfold(&a), a.dims()).unwrap(), a);
    }

    #[test]
    fn unfold_single_slice_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_tensor((3, 4, 1), &mut rng);
        assert_eq!(unfold(&a), a.slice(0).to_owned());
    }

    #[test]
    fn fold_rejects_wrong_row_count() {
        let m = Array2::<f64>::zeros((5, 2));
        assert!(matches!(
            fold(&m, (2, 2, 2)),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn bdiag_places_slices_on_diagonal() {
        let a = Tensor3::from_slices(&[array![[1.0]], array![[2.0]]]).unwrap();
        assert_eq!(bdiag(&a), array![[1.0, 0.0], [0.0, 2.0]]);
    }

    #[test]
    fn bdiag_single_slice_and_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let a = random_tensor((2, 3, 1), &mut rng);
        assert_eq!(bdiag(&a), a.slice(0).to_owned());
        let z = Tensor3::zeros((2, 2, 3));
        assert_eq!(bdiag(&z), Array2::<f64>::zeros((6, 6)));
    }

    #[test]
    fn bcirc_two_slices() {
        let a = Tensor3::from_slices(&[array![[1.0]], array![[2.0]]]).unwrap();
        assert_eq!(bcirc(&a), array![[1.0, 2.0], [2.0, 1.0]]);
    }

    #[test]
    fn bcirc_three_slices_circulant_pattern() {
        let (a, b, c) = (1.0, 2.0, 3.0);
        let t = Tensor3::from_slices(&[array![[a]], array![[b]], array![[c]]]).unwrap();
        assert_eq!(bcirc(&t), array![[a, c, b], [b, a, c], [c, b, a]]);
    }

    #[test]
    fn bcirc_single_slice_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_tensor((2, 2, 1), &mut rng);
        assert_eq!(bcirc(&a), a.slice(0).to_owned());
    }

    #[test]
    fn fft_four_point_tube() {
        let a = Tensor3::from_fn((1, 1, 4), |_, _, k| if k < 2 { 1.0 } else { 0.0 });
        let af = fft_mode3(&a);
        let expected = [
            Complex64::new(2.0, 0.0),
            Complex64::new(1.0, -1.0),
            Complex64::new(0.0, 0.0),
            Complex64::new(1.0, 1.0),
        ];
        for (k, want) in expected.iter().enumerate() {
            let got = af.slice(k)[[0, 0]];
            assert!((got - want).norm() < 1e-12, "slice {k}: {got} vs {want}");
        }
    }

    #[test]
    fn fft_constant_tube_is_dc_only() {
        let c = 2.5;
        let a = Tensor3::from_fn((1, 1, 5), |_, _, _| c);
        let af = fft_mode3(&a);
        assert!((af.slice(0)[[0, 0]] - Complex64::new(5.0 * c, 0.0)).norm() < 1e-12);
        for k in 1..5 {
            assert!(af.slice(k)[[0, 0]].norm() < 1e-12);
        }
    }

    #[test]
    fn fft_ifft_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a = random_tensor((3, 3, 5), &mut rng);
        let back = ifft_mode3(&fft_mode3(&a)).unwrap();
        assert!((&a - &back).norm_inf() <= 1e-12 * (1.0 + a.norm_inf()));
    }

    #[test]
    fn fft_conjugate_symmetry() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let a = random_tensor((2, 3, 6), &mut rng);
        let af = fft_mode3(&a);
        for k in 1..6 {
            let diff = &af.slice(k).to_owned() - &af.slice(6 - k).mapv(|z| z.conj());
            let max = diff.iter().fold(0.0f64, |m, z| m.max(z.norm()));
            assert!(max <= 1e-12 * (1.0 + a.norm_inf()));
        }
    }

    #[test]
    fn ifft_rejects_asymmetric_spectrum() {
        let mut data = Array3::from_elem((3, 1, 1), Complex64::new(0.0, 0.0));
        data[[1, 0, 0]] = Complex64::new(0.0, 1.0); // no conjugate partner
        let err = ifft_mode3(&FreqTensor3 { data }).unwrap_err();
        assert!(matches!(err, TensorError::BrokenSymmetry(_)));
    }

    #[test]
    fn t_product_matches_bcirc_unfold_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let a = random_tensor((2, 3, 2), &mut rng);
        let b = random_tensor((3, 2, 2), &mut rng);
        let got = t_product(&a, &b).unwrap();
        let oracle = fold(&bcirc(&a).dot(&unfold(&b)), (2, 2, 2)).unwrap();
        assert_close(&got, &oracle, 1e-10);
    }

    #[test]
    fn t_product_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let a = random_tensor((3, 3, 4), &mut rng);
        let id = identity_tensor(3, 4);
        assert_close(&t_product(&a, &id).unwrap(), &a, 1e-12);
        assert_close(&t_product(&id, &a).unwrap(), &a, 1e-12);
    }

    #[test]
    fn t_product_single_slice_is_matmul() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_tensor((2, 3, 1), &mut rng);
        let b = random_tensor((3, 4, 1), &mut rng);
        let got = t_product(&a, &b).unwrap();
        let want = a.slice(0).dot(&b.slice(0));
        assert!((&got.slice(0).to_owned() - &want).norm_max() < 1e-12);
    }

    #[test]
    fn t_product_rejects_mismatched_shapes() {
        let a = Tensor3::zeros((2, 3, 2));
        let b = Tensor3::zeros((2, 2, 2));
        assert!(matches!(
            t_product(&a, &b),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn transpose_is_involution() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let a = random_tensor((2, 3, 4), &mut rng);
        assert_eq!(tensor_transpose(&tensor_transpose(&a)), a);
    }

    #[test]
    fn transpose_single_slice_is_matrix_transpose() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let a = random_tensor((2, 3, 1), &mut rng);
        assert_eq!(
            tensor_transpose(&a).slice(0).to_owned(),
            a.slice(0).t().to_owned()
        );
    }

    #[test]
    fn gram_tensor_first_slice_symmetric() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let a = random_tensor((3, 2, 3), &mut rng);
        let g = t_product(&a, &tensor_transpose(&a)).unwrap();
        // First frontal slice of A * Aᵀ equals bcirc-oracle row block 0,
        // which is Σ_k A^(k) A^(k)ᵀ and hence symmetric.
        let s0 = g.slice(0).to_owned();
        assert!((&s0 - &s0.t()).norm_max() < 1e-10);
    }

    #[test]
    fn t_svd_reconstructs_random_tensor() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let a = random_tensor((4, 3, 3), &mut rng);
        let f = t_svd(&a);
        let recon = t_product(&t_product(&f.u, &f.s).unwrap(), &tensor_transpose(&f.v)).unwrap();
        assert!((&a - &recon).norm_fro() <= 1e-8 * a.norm_fro());
    }

    #[test]
    fn t_svd_factors_are_orthogonal() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let a = random_tensor((4, 3, 3), &mut rng);
        let f = t_svd(&a);
        let uut = t_product(&f.u, &tensor_transpose(&f.u)).unwrap();
        let vvt = t_product(&f.v, &tensor_transpose(&f.v)).unwrap();
        assert!((&uut - &identity_tensor(4, 3)).norm_inf() <= 1e-8);
        assert!((&vvt - &identity_tensor(3, 3)).norm_inf() <= 1e-8);
    }

    #[test]
    fn t_svd_s_is_f_diagonal_nonincreasing_in_frequency_domain() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let a = random_tensor((4, 3, 4), &mut rng);
        let f = t_svd(&a);
        let sf = fft_mode3(&f.s);
        for k in 0..4 {
            let s = sf.slice(k);
            let mut prev = f64::INFINITY;
            for i in 0..4 {
                for j in 0..3 {
                    if i != j {
                        assert!(s[[i, j]].norm() <= 1e-8, "off-diagonal at ({i},{j},{k})");
                    }
                }
            }
            for d in 0..3 {
                let sv = s[[d, d]];
                assert!(sv.im.abs() <= 1e-8);
                assert!(sv.re >= -1e-12, "negative singular value {sv}");
                assert!(sv.re <= prev + 1e-10, "singular values not sorted");
                prev = sv.re;
            }
        }
    }

    #[test]
    fn t_svd_zero_tensor() {
        let f = t_svd(&Tensor3::zeros((3, 2, 2)));
        assert_eq!(f.s.norm_inf(), 0.0);
        let uut = t_product(&f.u, &tensor_transpose(&f.u)).unwrap();
        assert!((&uut - &identity_tensor(3, 2)).norm_inf() <= 1e-8);
    }

    #[test]
    fn t_svd_single_slice_matches_matrix_svd() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        let a = random_tensor((4, 3, 1), &mut rng);
        let f = t_svd(&a);
        let (_, s, _) = a.slice(0).to_owned().svddc(JobSvd::None).unwrap();
        for (i, &sv) in s.iter().enumerate() {
            assert!((f.s.slice(0)[[i, i]] - sv).abs() < 1e-10);
        }
    }

    #[test]
    fn tnn_two_slice_example() {
        let a = Tensor3::from_slices(&[array![[3.0]], array![[1.0]]]).unwrap();
        // bcirc(A) = [[3, 1], [1, 3]] has singular values 4 and 2.
        assert!((tnn(&a) - 6.0).abs() < 1e-12);
        assert!((tnn(&a) - matrix_nuclear_norm(&bcirc(&a))).abs() < 1e-12);
    }

    #[test]
    fn tnn_zero_and_single_slice() {
        assert_eq!(tnn(&Tensor3::zeros((3, 2, 4))), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let a = random_tensor((3, 4, 1), &mut rng);
        let want = matrix_nuclear_norm(&a.slice(0).to_owned());
        assert!((tnn(&a) - want).abs() < 1e-10 * (1.0 + want));
    }

    #[test]
    fn tnn_equals_bcirc_nuclear_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for &dims in &[(2, 2, 3), (4, 3, 5), (1, 6, 2), (5, 2, 4)] {
            let a = random_tensor(dims, &mut rng);
            let t = tnn(&a);
            let b = matrix_nuclear_norm(&bcirc(&a));
            assert!(
                (t - b).abs() <= 1e-8 * (1.0 + t),
                "dims {dims:?}: {t} vs {b}"
            );
        }
    }

    #[test]
    fn tnn_prox_single_slice_thresholds_singular_values() {
        let m = Tensor3::from_slices(&[array![[3.0, 0.0], [0.0, 1.0]]]).unwrap();
        // n3 = 1 and tau = 1 give threshold 1: diag(3, 1) → diag(2, 0).
        let q = tnn_prox(&m, 1.0).unwrap();
        let want = Tensor3::from_slices(&[array![[2.0, 0.0], [0.0, 0.0]]]).unwrap();
        assert_close(&q, &want, 1e-12);
    }

    #[test]
    fn tnn_prox_full_shrinkage_gives_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(19);
        let m = random_tensor((3, 3, 2), &mut rng);
        let q = tnn_prox(&m, 1e3).unwrap();
        assert_eq!(q.norm_inf(), 0.0);
    }

    #[test]
    fn tnn_prox_rejects_nonpositive_tau() {
        let m = Tensor3::zeros((2, 2, 2));
        assert!(matches!(
            tnn_prox(&m, 0.0),
            Err(TensorError::NonPositiveTau(_))
        ));
        assert!(matches!(
            tnn_prox(&m, -1.0),
            Err(TensorError::NonPositiveTau(_))
        ));
    }

    #[test]
    fn tnn_prox_beats_random_perturbations() {
        let mut rng = ChaCha8Rng::seed_from_u64(20);
        let m = random_tensor((4, 4, 3), &mut rng);
        let tau = 0.3;
        let q = tnn_prox(&m, tau).unwrap();
        let objective = |q: &Tensor3| {
            let diff = q - &m;
            tnn(q) + diff.norm_fro().powi(2) / (2.0 * tau)
        };
        let base = objective(&q);
        for _ in 0..200 {
            let mut d = random_tensor(m.dims(), &mut rng);
            d = &d * (1e-2 / d.norm_fro());
            assert!(objective(&(&q + &d)) >= base - 1e-9);
        }
    }

    #[test]
    fn construct_phi_collects_columns() {
        let c1 = array![[1.0, 2.0], [3.0, 4.0]];
        let c2 = array![[5.0, 6.0], [7.0, 8.0]];
        let r = construct_phi(&[c1, c2]).unwrap();
        assert_eq!(r.dims(), (2, 2, 2));
        assert_eq!(r.slice(0).to_owned(), array![[1.0, 5.0], [3.0, 7.0]]);
        assert_eq!(r.slice(1).to_owned(), array![[2.0, 6.0], [4.0, 8.0]]);
    }

    #[test]
    fn construct_phi_single_view_indexing() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let c = Array2::from_shape_fn((3, 3), |_| rng.gen::<f64>());
        let r = construct_phi(std::slice::from_ref(&c)).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(r[(a, 0, b)], c[[a, b]]);
            }
        }
    }

    #[test]
    fn phi_inverse_recovers_list() {
        let mut rng = ChaCha8Rng::seed_from_u64(22);
        let list: Vec<Array2<f64>> = (0..3)
            .map(|_| Array2::from_shape_fn((4, 4), |_| rng.gen::<f64>()))
            .collect();
        let r = construct_phi(&list).unwrap();
        assert_eq!(phi_inverse(&r), list);
    }

    #[test]
    fn construct_phi_rejects_ragged_input() {
        let c1 = Array2::<f64>::zeros((2, 2));
        let c2 = Array2::<f64>::zeros((3, 3));
        assert!(matches!(
            construct_phi(&[c1, c2]),
            Err(TensorError::ShapeMismatch { .. })
        ));
    }
}
