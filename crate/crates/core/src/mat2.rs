//! 2x2 complex matrices and their scaled representation.
//!
//! Transfer-matrix products grow like exp(gamma * N), which overflows f64
//! after a few hundred sites. [`ScaledMat2`] stores a normalized matrix whose
//! largest entry magnitude sits in [1/2, 2] together with a power-of-two
//! exponent, so products over 1e6 sites stay in the well-conditioned
//! floating range. Rescaling by powers of two is exact in IEEE arithmetic.

use num_complex::Complex;

pub type C64 = Complex<f64>;

pub const LN_2: f64 = std::f64::consts::LN_2;

/// Plain 2x2 complex matrix `[[a, b], [c, d]]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mat2 {
    pub a: C64,
    pub b: C64,
    pub c: C64,
    pub d: C64,
}

impl Mat2 {
    pub fn new(a: C64, b: C64, c: C64, d: C64) -> Self {
        Mat2 { a, b, c, d }
    }

    pub fn identity() -> Self {
        Mat2::new(C64::new(1.0, 0.0), C64::ZERO, C64::ZERO, C64::new(1.0, 0.0))
    }

    #[inline]
    pub fn mul(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a * o.a + self.b * o.c,
            b: self.a * o.b + self.b * o.d,
            c: self.c * o.a + self.d * o.c,
            d: self.c * o.b + self.d * o.d,
        }
    }

    pub fn sub(&self, o: &Mat2) -> Mat2 {
        Mat2 {
            a: self.a - o.a,
            b: self.b - o.b,
            c: self.c - o.c,
            d: self.d - o.d,
        }
    }

    pub fn scale(&self, s: f64) -> Mat2 {
        Mat2 {
            a: self.a * s,
            b: self.b * s,
            c: self.c * s,
            d: self.d * s,
        }
    }

    pub fn trace(&self) -> C64 {
        self.a + self.d
    }

    pub fn det(&self) -> C64 {
        self.a * self.d - self.b * self.c
    }

    /// Adjugate; equals the inverse when det = 1.
    pub fn adjugate(&self) -> Mat2 {
        Mat2 {
            a: self.d,
            b: -self.b,
            c: -self.c,
            d: self.a,
        }
    }

    pub fn frobenius_sq(&self) -> f64 {
        self.a.norm_sqr() + self.b.norm_sqr() + self.c.norm_sqr() + self.d.norm_sqr()
    }

    pub fn frobenius(&self) -> f64 {
        self.frobenius_sq().sqrt()
    }

    pub fn commutator(&self, o: &Mat2) -> Mat2 {
        self.mul(o).sub(&o.mul(self))
    }

    fn max_entry_mag(&self) -> f64 {
        self.a
            .norm()
            .max(self.b.norm())
            .max(self.c.norm())
            .max(self.d.norm())
    }

    /// Eigenvalues, ordered by descending magnitude.
    pub fn eigenvalues(&self) -> (C64, C64) {
        let half_tr = self.trace() * 0.5;
        let disc = (half_tr * half_tr - self.det()).sqrt();
        let (l1, l2) = (half_tr + disc, half_tr - disc);
        if l1.norm() >= l2.norm() {
            (l1, l2)
        } else {
            (l2, l1)
        }
    }
}

/// `m * 2^exp2` with the largest entry magnitude of `m` normalized into [1, 2).
#[derive(Clone, Copy, Debug)]
pub struct ScaledMat2 {
    m: Mat2,
    exp2: i64,
}

impl ScaledMat2 {
    pub fn identity() -> Self {
        ScaledMat2 {
            m: Mat2::identity(),
            exp2: 0,
        }
    }

    pub fn from_mat(m: Mat2) -> Self {
        let mut s = ScaledMat2 { m, exp2: 0 };
        s.renormalize();
        s
    }

    fn renormalize(&mut self) {
        let mag = self.m.max_entry_mag();
        assert!(mag > 0.0 && mag.is_finite(), "degenerate matrix in scaled product");
        // Rescale only when the magnitude leaves [1/2, 2]; products of
        // normalized factors drift slowly, so most steps skip the log.
        if (0.5..=2.0).contains(&mag) {
            return;
        }
        let k = mag.log2().floor() as i32;
        if k != 0 {
            self.m = self.m.scale((2.0f64).powi(-k));
            self.exp2 += k as i64;
        }
    }

    /// Normalized part (max entry magnitude in [1, 2)).
    pub fn normalized(&self) -> &Mat2 {
        &self.m
    }

    /// Natural log of the stripped scale factor.
    pub fn log_scale(&self) -> f64 {
        self.exp2 as f64 * LN_2
    }

    #[inline]
    pub fn mul(&self, o: &ScaledMat2) -> ScaledMat2 {
        let mut r = ScaledMat2 {
            m: self.m.mul(&o.m),
            exp2: self.exp2 + o.exp2,
        };
        r.renormalize();
        r
    }

    /// Left-multiply by an unscaled factor (one transfer step).
    #[inline]
    pub fn premul(&self, factor: &Mat2) -> ScaledMat2 {
        let mut r = ScaledMat2 {
            m: factor.mul(&self.m),
            exp2: self.exp2,
        };
        r.renormalize();
        r
    }

    /// Right-multiply by an unscaled factor.
    #[inline]
    pub fn postmul(&self, factor: &Mat2) -> ScaledMat2 {
        let mut r = ScaledMat2 {
            m: self.m.mul(factor),
            exp2: self.exp2,
        };
        r.renormalize();
        r
    }

    /// Raw power-of-two exponent of the stripped scale.
    pub fn exp2_raw(&self) -> i64 {
        self.exp2
    }

    /// Inverse assuming the represented matrix is unimodular (det = 1).
    /// All transfer cocycles satisfy this up to roundoff drift.
    pub fn inverse_unimodular(&self) -> ScaledMat2 {
        let mut r = ScaledMat2 {
            m: self.m.adjugate(),
            exp2: self.exp2,
        };
        r.renormalize();
        r
    }

    pub fn log_frobenius(&self) -> f64 {
        0.5 * self.m.frobenius_sq().ln() + self.log_scale()
    }

    /// Represented matrix as a plain `Mat2`; only meaningful while the scale
    /// exponent is small enough to avoid overflow.
    pub fn to_mat2(&self) -> Mat2 {
        assert!(self.exp2.abs() < 1000, "scale exponent too large to unfold");
        self.m.scale((2.0f64).powi(self.exp2 as i32))
    }

    /// Relative determinant drift |det - 1| of the represented matrix,
    /// meaningful while 2*exp2 stays within the f64 mantissa.
    pub fn det_drift(&self) -> f64 {
        let det = self.m.det() * (2.0f64).powi((2 * self.exp2) as i32);
        (det - C64::new(1.0, 0.0)).norm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn mul_matches_hand_product() {
        let x = Mat2::new(c(1.0, 0.0), c(2.0, 0.0), c(3.0, 0.0), c(4.0, 0.0));
        let y = Mat2::new(c(0.0, 1.0), c(1.0, 0.0), c(0.0, 0.0), c(-1.0, 0.0));
        let z = x.mul(&y);
        assert_eq!(z.a, c(0.0, 1.0));
        assert_eq!(z.b, c(-1.0, 0.0));
        assert_eq!(z.c, c(0.0, 3.0));
        assert_eq!(z.d, c(-1.0, 0.0));
    }

    #[test]
    fn scaled_product_tracks_growth() {
        // A = [[2, 0], [0, 1/2]]: norm of A^n grows like 2^n.
        let a = Mat2::new(c(2.0, 0.0), C64::ZERO, C64::ZERO, c(0.5, 0.0));
        let mut p = ScaledMat2::identity();
        for _ in 0..2000 {
            p = p.premul(&a);
        }
        let expect = 2000.0 * LN_2;
        assert!((p.log_frobenius() - expect).abs() < 1e-9 * expect.abs() + 1e-9);
        let m = p.normalized();
        let mag = m.a.norm().max(m.b.norm()).max(m.c.norm()).max(m.d.norm());
        assert!((1.0..2.0).contains(&mag));
    }

    #[test]
    fn unimodular_inverse_roundtrip() {
        let a = Mat2::new(c(1.3, 0.2), c(-0.7, 0.0), c(1.0, 0.0), c(0.0, 0.0));
        // make it unimodular: det = 0.7 + 0i... normalize by sqrt(det)
        let det = a.det();
        let s = det.sqrt();
        let a = Mat2::new(a.a / s, a.b / s, a.c / s, a.d / s);
        assert!((a.det() - c(1.0, 0.0)).norm() < 1e-14);
        let sa = ScaledMat2::from_mat(a);
        let id = sa.mul(&sa.inverse_unimodular());
        let m = id.to_mat2();
        assert!((m.a - c(1.0, 0.0)).norm() < 1e-12);
        assert!(m.b.norm() < 1e-12);
        assert!(m.c.norm() < 1e-12);
        assert!((m.d - c(1.0, 0.0)).norm() < 1e-12);
    }
}
