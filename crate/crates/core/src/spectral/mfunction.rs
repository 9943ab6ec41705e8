use num_complex::Complex64;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::measure::{WindowMeasure, POSITION_TOL};
use crate::propagator::transfer_matrix;

/// Boundary values `m` at 0 compatible with a real boundary condition at the
/// truncation point form a circle; the disk it bounds shrinks to `m_+`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct WeylDisk {
    pub center_re: f64,
    pub center_im: f64,
    pub radius: f64,
}

impl WeylDisk {
    pub fn center(&self) -> Complex64 {
        Complex64::new(self.center_re, self.center_im)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MFunctionValue {
    pub z_re: f64,
    pub z_im: f64,
    pub m_plus_re: f64,
    pub m_plus_im: f64,
    pub m_minus_re: f64,
    pub m_minus_im: f64,
    pub radius_plus: f64,
    pub radius_minus: f64,
    pub truncation: f64,
}

impl MFunctionValue {
    pub fn m_plus(&self) -> Complex64 {
        Complex64::new(self.m_plus_re, self.m_plus_im)
    }

    pub fn m_minus(&self) -> Complex64 {
        Complex64::new(self.m_minus_re, self.m_minus_im)
    }

    pub fn is_herglotz(&self) -> bool {
        self.m_plus_im > 0.0 && self.m_minus_im > 0.0
    }
}

fn check_z(z: Complex64, truncation: f64) -> Result<()> {
    if !z.is_finite() || !truncation.is_finite() {
        return Err(Error::NonFinite(format!("z = {z}, truncation = {truncation}")));
    }
    if !(z.im > 0.0) || !(truncation > 0.0) {
        return Err(Error::Precondition(format!("need Im z > 0 and truncation > 0, got z = {z}, T = {truncation}")));
    }
    Ok(())
}

/// Weyl disk for the right half-line truncated at `truncation`.
pub fn weyl_disk(omega: &WindowMeasure, z: Complex64, truncation: f64) -> Result<WeylDisk> {
    check_z(z, truncation)?;
    let t = transfer_matrix(omega, z, 0.0, truncation)?;
    let [a, b, c, d] = t.entries();
    // m(β) = (aβ − c) / (d − bβ) maps the real line onto the circle.
    let im_bd = (b * d.conj()).im;
    if im_bd == 0.0 {
        return Err(Error::NonFinite("degenerate Weyl circle".into()));
    }
    let center = (a * d.conj() - c * b.conj()) / Complex64::new(0.0, -2.0 * im_bd);
    let radius = (-2.0 * t.log_scale()).exp() / (2.0 * im_bd.abs());
    if !center.is_finite() || !radius.is_finite() {
        return Err(Error::NonFinite(format!("Weyl disk at z = {z}")));
    }
    Ok(WeylDisk { center_re: center.re, center_im: center.im, radius })
}

/// `m_±(z)` from Weyl disks at `±truncation`. Fails when either radius
/// exceeds `tolerance`.
pub fn m_function(omega: &WindowMeasure, z: Complex64, truncation: f64, tolerance: f64) -> Result<MFunctionValue> {
    let plus = weyl_disk(omega, z, truncation)?;
    let minus = weyl_disk(&omega.reflect(), z, truncation)?;
    for r in [plus.radius, minus.radius] {
        if r > tolerance {
            return Err(Error::TruncationTooShort { radius: r, tolerance, truncation });
        }
    }
    // The reflected problem sees u'(0−); an atom at 0 separates it from u'(0+).
    let at_zero: f64 = omega.atoms_in(-POSITION_TOL, POSITION_TOL).iter().map(|a| a.1).sum();
    let m_minus = minus.center() - at_zero;
    Ok(MFunctionValue {
        z_re: z.re,
        z_im: z.im,
        m_plus_re: plus.center_re,
        m_plus_im: plus.center_im,
        m_minus_re: m_minus.re,
        m_minus_im: m_minus.im,
        radius_plus: plus.radius,
        radius_minus: minus.radius,
        truncation,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measure::PieceMeasure;
    use crate::propagator::upper_sqrt;

    #[test]
    fn free_m_function() {
        let w = WindowMeasure::zero(-60.0, 60.0).unwrap();
        for z in [Complex64::new(0.0, 1.0), Complex64::new(-1.0, 0.3), Complex64::new(-0.2, 2.0)] {
            let m = m_function(&w, z, 50.0, 1e-6).unwrap();
            let oracle = Complex64::new(0.0, 1.0) * upper_sqrt(z);
            assert!((m.m_plus() - oracle).norm() < 1e-4, "z = {z}");
            assert!((m.m_minus() - oracle).norm() < 1e-4);
            assert!(m.is_herglotz());
        }
    }

    #[test]
    fn constant_potential_shifts_energy() {
        let p = PieceMeasure::constant(1.0, 2.5).unwrap();
        let w = WindowMeasure::tiled(-60.0, &vec![p; 120]).unwrap();
        let z = Complex64::new(1.5, 0.5);
        let m = m_function(&w, z, 50.0, 1e-6).unwrap();
        let oracle = Complex64::new(0.0, 1.0) * upper_sqrt(z - 2.5);
        assert!((m.m_plus() - oracle).norm() < 1e-4);
    }

    #[test]
    fn radius_shrinks_and_short_truncation_fails() {
        let p = PieceMeasure::atom(1.0, 0.5, 1.0).unwrap();
        let q = PieceMeasure::constant(0.6, 2.0).unwrap();
        let w = WindowMeasure::tiled(-40.0, &[p.clone(), q, p].iter().cycle().take(150).cloned().collect::<Vec<_>>()).unwrap();
        let z = Complex64::new(1.0, 0.2);
        let radii: Vec<f64> = [2.0, 5.0, 10.0, 20.0, 40.0].iter().map(|&t| weyl_disk(&w, z, t).unwrap().radius).collect();
        assert!(radii.windows(2).all(|r| r[1] < r[0]), "{radii:?}");
        assert!(matches!(m_function(&w, z, 1.0, 1e-8), Err(Error::TruncationTooShort { .. })));
        assert!(m_function(&w, Complex64::new(1.0, 0.0), 10.0, 1.0).is_err());
    }

    #[test]
    fn atom_at_origin_enters_m_minus() {
        // Free half-lines glued by an atom of mass g at 0.
        let g = 0.8;
        let w = WindowMeasure::tiled(
            -60.0,
            &[PieceMeasure::zero(60.0).unwrap(), PieceMeasure::atom(60.0, 0.0, g).unwrap()],
        )
        .unwrap();
        let z = Complex64::new(-0.5, 0.7);
        let m = m_function(&w, z, 50.0, 1e-6).unwrap();
        let free = Complex64::new(0.0, 1.0) * upper_sqrt(z);
        // u_+ sees the atom at 0 only through u'(0+), which is already to its right.
        assert!((m.m_plus() - free).norm() < 1e-4);
        assert!((m.m_minus() - (free - g)).norm() < 1e-4);
    }
}
