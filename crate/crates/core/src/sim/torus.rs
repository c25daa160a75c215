use serde::{Deserialize, Serialize};

/// The discrete torus `T^d_N` with a flat site indexing and periodic wrap.
///
/// Site `x = (x_1, .., x_d)` maps to `x_1 + N x_2 + N^2 x_3 + ..`; every site
/// has exactly `2d` neighbors counted with multiplicity (`N = 2` doubles the
/// edge).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatticeTorus {
    d: usize,
    n: usize,
}

impl LatticeTorus {
    pub fn new(d: usize, n: usize) -> Self {
        assert!((1..=3).contains(&d), "dimension must be 1, 2, or 3");
        assert!(n >= 2, "side length must be >= 2");
        Self { d, n }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn side(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn sites(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn coords(&self, mut idx: usize) -> [usize; 3] {
        let mut c = [0usize; 3];
        for slot in c.iter_mut().take(self.d) {
            *slot = idx % self.n;
            idx /= self.n;
        }
        c
    }

    pub fn index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.d);
        let mut idx = 0;
        for (axis, &c) in coords.iter().enumerate().rev() {
            debug_assert!(c < self.n);
            idx = idx * self.n + c;
            let _ = axis;
        }
        idx
    }

    /// Neighbor of `idx` one step along `axis` in direction `dir` (+1/-1).
    #[inline]
    pub fn neighbor(&self, idx: usize, axis: usize, dir: i32) -> usize {
        let stride = self.n.pow(axis as u32);
        let line = (idx / stride) % self.n;
        let shifted = if dir > 0 {
            if line + 1 == self.n {
                0
            } else {
                line + 1
            }
        } else if line == 0 {
            self.n - 1
        } else {
            line - 1
        };
        (idx as isize + (shifted as isize - line as isize) * stride as isize) as usize
    }

    /// Site displaced from `idx` by an integer offset vector, with wrap.
    pub fn offset(&self, idx: usize, offset: &[i64]) -> usize {
        debug_assert_eq!(offset.len(), self.d);
        let c = self.coords(idx);
        let n = self.n as i64;
        let mut out = 0usize;
        for axis in (0..self.d).rev() {
            let shifted = (c[axis] as i64 + offset[axis]).rem_euclid(n) as usize;
            out = out * self.n + shifted;
        }
        out
    }

    /// Macroscopic position `x / N` of a site, in `[0,1)^d`.
    pub fn position(&self, idx: usize) -> [f64; 3] {
        let c = self.coords(idx);
        let mut p = [0.0; 3];
        for axis in 0..self.d {
            p[axis] = c[axis] as f64 / self.n as f64;
        }
        p
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let t = LatticeTorus::new(3, 5);
        for idx in 0..t.sites() {
            let c = t.coords(idx);
            assert_eq!(t.index(&c[..3]), idx);
        }
    }

    #[test]
    fn neighbors_wrap() {
        let t = LatticeTorus::new(2, 4);
        let idx = t.index(&[3, 0]);
        assert_eq!(t.neighbor(idx, 0, 1), t.index(&[0, 0]));
        assert_eq!(t.neighbor(idx, 1, -1), t.index(&[3, 3]));
    }

    #[test]
    fn two_site_torus_has_doubled_edge() {
        let t = LatticeTorus::new(1, 2);
        assert_eq!(t.neighbor(0, 0, 1), 1);
        assert_eq!(t.neighbor(0, 0, -1), 1);
    }

    #[test]
    fn offsets_wrap_both_ways() {
        let t = LatticeTorus::new(2, 4);
        let idx = t.index(&[0, 1]);
        assert_eq!(t.offset(idx, &[-1, 0]), t.index(&[3, 1]));
        assert_eq!(t.offset(idx, &[5, -2]), t.index(&[1, 3]));
    }
}
