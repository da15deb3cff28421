use crate::error::{Error, Result};

pub const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

/// Uniform sample grid on the periodic square [0, 2pi)^2.
///
/// `n1` counts samples along x1, `n2` along x2; sample (j1, j2) sits at
/// (j1 * h1, j2 * h2) with h_i = 2pi / n_i.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Grid {
    n1: usize,
    n2: usize,
}

impl Grid {
    pub fn new(n1: usize, n2: usize) -> Result<Self> {
        if n1 < 8 || n2 < 8 || !n1.is_multiple_of(2) || !n2.is_multiple_of(2) {
            return Err(Error::BadGrid { n1, n2 });
        }
        Ok(Self { n1, n2 })
    }

    /// Square grid, the common case.
    pub fn square(n: usize) -> Result<Self> {
        Self::new(n, n)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn h1(&self) -> f64 {
        TWO_PI / self.n1 as f64
    }

    pub fn h2(&self) -> f64 {
        TWO_PI / self.n2 as f64
    }

    pub fn h_min(&self) -> f64 {
        self.h1().min(self.h2())
    }

    /// Area of one grid cell.
    pub fn cell_area(&self) -> f64 {
        self.h1() * self.h2()
    }

    pub fn x1(&self, j1: usize) -> f64 {
        j1 as f64 * self.h1()
    }

    pub fn x2(&self, j2: usize) -> f64 {
        j2 as f64 * self.h2()
    }

    pub fn len(&self) -> usize {
        self.n1 * self.n2
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Integer wavenumber for FFT bin `i` of an axis with `n` samples:
    /// 0, 1, ..., n/2-1, -n/2, ..., -1.
    pub fn wavenumber(i: usize, n: usize) -> i64 {
        if i < n / 2 {
            i as i64
        } else {
            i as i64 - n as i64
        }
    }

    pub fn k1(&self, i1: usize) -> i64 {
        Self::wavenumber(i1, self.n1)
    }

    pub fn k2(&self, i2: usize) -> i64 {
        Self::wavenumber(i2, self.n2)
    }

    /// FFT bin holding wavenumber `k` on an axis with `n` samples.
    pub fn bin(k: i64, n: usize) -> usize {
        let n = n as i64;
        (((k % n) + n) % n) as usize
    }

    /// Shortest displacement from `b` to `a` on the periodic axis.
    pub fn min_image(delta: f64) -> f64 {
        let mut d = delta.rem_euclid(TWO_PI);
        if d > TWO_PI / 2.0 {
            d -= TWO_PI;
        }
        d
    }

    /// Torus distance between two points (minimum-image convention).
    pub fn distance(a: (f64, f64), b: (f64, f64)) -> f64 {
        let d1 = Self::min_image(a.0 - b.0);
        let d2 = Self::min_image(a.1 - b.1);
        d1.hypot(d2)
    }
}

/// Wrap a coordinate into [0, 2pi).
pub fn wrap(x: f64) -> f64 {
    x.rem_euclid(TWO_PI)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_odd_and_tiny_grids() {
        assert!(Grid::new(7, 8).is_err());
        assert!(Grid::new(8, 9).is_err());
        assert!(Grid::new(4, 4).is_err());
        assert!(Grid::new(8, 8).is_ok());
    }

    #[test]
    fn wavenumber_layout_covers_half_open_range() {
        let n = 8;
        let ks: Vec<i64> = (0..n).map(|i| Grid::wavenumber(i, n)).collect();
        assert_eq!(ks, vec![0, 1, 2, 3, -4, -3, -2, -1]);
        for k in -4..4 {
            assert_eq!(Grid::wavenumber(Grid::bin(k, n), n), k);
        }
    }

    #[test]
    fn torus_distance_uses_minimum_image() {
        let d = Grid::distance((0.1, 0.0), (TWO_PI - 0.1, 0.0));
        assert!((d - 0.2).abs() < 1e-14);
        assert!((Grid::distance((1.0, 1.0), (1.0, 1.0))).abs() == 0.0);
    }
}
