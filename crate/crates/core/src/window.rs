//! Mixed-radix indexing of consecutive coordinate blocks.
//!
//! A [`Window`] is a block of consecutive time indices `start..start + len`
//! together with the sizes of the state spaces at those indices. Configurations
//! are encoded with the first coordinate most significant, so that dropping the
//! last coordinate is an integer division and prepending a coordinate is a
//! multiply-add.

use serde::{Deserialize, Serialize};

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: usize,
    pub sizes: Vec<usize>,
}

impl Window {
    pub fn new(start: usize, sizes: Vec<usize>) -> Self {
        Window { start, sizes }
    }

    pub fn len(&self) -> usize {
        self.sizes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sizes.is_empty()
    }

    /// One past the last absolute index covered.
    pub fn end(&self) -> usize {
        self.start + self.sizes.len()
    }

    /// Number of configurations.
    pub fn count(&self) -> usize {
        self.sizes.iter().product()
    }

    /// Stride of relative coordinate `k`.
    pub fn stride(&self, k: usize) -> usize {
        self.sizes[k + 1..].iter().product()
    }

    pub fn encode(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.sizes.len());
        coords
            .iter()
            .zip(&self.sizes)
            .fold(0, |acc, (&c, &s)| acc * s + c)
    }

    pub fn decode(&self, mut idx: usize) -> Vec<usize> {
        let mut out = vec![0; self.sizes.len()];
        for k in (0..self.sizes.len()).rev() {
            out[k] = idx % self.sizes[k];
            idx /= self.sizes[k];
        }
        out
    }

    pub fn decode_into(&self, mut idx: usize, out: &mut [usize]) {
        for k in (0..self.sizes.len()).rev() {
            out[k] = idx % self.sizes[k];
            idx /= self.sizes[k];
        }
    }

    /// Encode the part of a full path that this window covers.
    pub fn encode_path(&self, path: &[usize]) -> usize {
        self.encode(&path[self.start..self.end()])
    }

    pub fn contains(&self, index: usize) -> bool {
        index >= self.start && index < self.end()
    }

    /// Iterator over all configurations in index order.
    pub fn configs(&self) -> impl Iterator<Item = Vec<usize>> + '_ {
        (0..self.count()).map(move |i| self.decode(i))
    }
}

/// A function of the coordinates of a window, stored as a dense table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowFn<T> {
    pub window: Window,
    pub values: Vec<T>,
}

impl<T: Copy> WindowFn<T> {
    pub fn from_fn(window: Window, mut f: impl FnMut(&[usize]) -> T) -> Self {
        let mut buf = vec![0; window.len()];
        let values = (0..window.count())
            .map(|i| {
                window.decode_into(i, &mut buf);
                f(&buf)
            })
            .collect();
        WindowFn { window, values }
    }

    pub fn constant(window: Window, value: T) -> Self {
        let n = window.count();
        WindowFn { window, values: vec![value; n] }
    }

    /// Evaluate on a full path (indexed by absolute time).
    pub fn eval_path(&self, path: &[usize]) -> T {
        self.values[self.window.encode_path(path)]
    }

    /// Evaluate on a block of coordinates starting at absolute index `start`.
    /// The block must cover this function's window.
    pub fn eval_block(&self, start: usize, block: &[usize]) -> T {
        let off = self.window.start - start;
        self.values[self.window.encode(&block[off..off + self.window.len()])]
    }

    /// Cylindrical extension to a wider window that covers this one.
    pub fn lift(&self, target: &Window) -> WindowFn<T> {
        assert!(target.start <= self.window.start && target.end() >= self.window.end());
        let off = self.window.start - target.start;
        let len = self.window.len();
        WindowFn::from_fn(target.clone(), |c| self.values[self.window.encode(&c[off..off + len])])
    }

    pub fn map<U: Copy>(&self, f: impl Fn(T) -> U) -> WindowFn<U> {
        WindowFn {
            window: self.window.clone(),
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}
