//! Execution backends for the data-parallel inner loops.
//!
//! Every per-lane and per-point kernel runs either sequentially or on the
//! rayon pool (feature `parallel`, on by default). The `Mode::Auto` dispatch
//! is what the library uses internally; the explicit variants exist so the
//! bench suite can compare both backends on the same kernels.

use ndarray::{Array2, ArrayView1, ArrayViewMut1, Axis, Zip};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Seq,
    #[cfg(feature = "parallel")]
    Par,
    Auto,
}

impl Default for Mode {
    fn default() -> Self {
        Mode::Auto
    }
}

impl Mode {
    fn parallel(self) -> bool {
        match self {
            Mode::Seq => false,
            #[cfg(feature = "parallel")]
            Mode::Par => true,
            Mode::Auto => cfg!(feature = "parallel"),
        }
    }
}

/// Applies `f` to every 1-D lane of `src` running along `lane_axis`,
/// writing the corresponding lane of the output.
pub fn map_lanes<T, F>(src: &Array2<T>, lane_axis: Axis, mode: Mode, f: F) -> Array2<T>
where
    T: Clone + Default + Send + Sync,
    F: Fn(ArrayView1<T>, ArrayViewMut1<T>) + Sync,
{
    let mut out = Array2::<T>::default(src.raw_dim());
    let zip = Zip::from(src.lanes(lane_axis)).and(out.lanes_mut(lane_axis));
    #[cfg(feature = "parallel")]
    if mode.parallel() {
        zip.par_for_each(|s, d| f(s, d));
        return out;
    }
    let _ = mode;
    zip.for_each(|s, d| f(s, d));
    out
}

/// Builds an n1 x n2 array from a per-index function.
pub fn build<T, F>(n1: usize, n2: usize, mode: Mode, f: F) -> Array2<T>
where
    T: Clone + Default + Send + Sync,
    F: Fn(usize, usize) -> T + Sync,
{
    let mut out = Array2::<T>::default((n1, n2));
    let zip = Zip::indexed(out.view_mut());
    #[cfg(feature = "parallel")]
    if mode.parallel() {
        zip.par_for_each(|(i, j), v| *v = f(i, j));
        return out;
    }
    let _ = mode;
    zip.for_each(|(i, j), v| *v = f(i, j));
    out
}

/// Rows of `out` computed pointwise from two inputs of the same shape.
pub fn zip_map<T, U, V, F>(a: &Array2<T>, b: &Array2<U>, mode: Mode, f: F) -> Array2<V>
where
    T: Clone + Send + Sync,
    U: Clone + Send + Sync,
    V: Clone + Default + Send + Sync,
    F: Fn(&T, &U) -> V + Sync,
{
    let mut out = Array2::<V>::default(a.raw_dim());
    let zip = Zip::from(&mut out).and(a).and(b);
    #[cfg(feature = "parallel")]
    if mode.parallel() {
        zip.par_for_each(|o, x, y| *o = f(x, y));
        return out;
    }
    let _ = mode;
    zip.for_each(|o, x, y| *o = f(x, y));
    out
}

/// Caps the global rayon pool; used by the CLI to honor WEAKCORR_THREADS.
#[cfg(feature = "parallel")]
pub fn limit_threads(n: usize) {
    // Ignore the error if a pool already exists (e.g. repeated calls in tests).
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
}

#[cfg(not(feature = "parallel"))]
pub fn limit_threads(_n: usize) {}
