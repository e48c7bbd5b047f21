use super::path::{HamiltonianField, MoserField, PotentialPath, TrigPoly, VelocityField};
use crate::error::{KflowError, Result};
use crate::grid_core::{partial_derivative_tensor, GridSpec, TensorField, TrigInterpolant, Variance};
use crate::kahler_geometry::kernels::{invert, pointwise, Frame};
use nalgebra::{DMatrix, DVector};

/// Newton iterations for the inverse map.
pub const NEWTON_ITERS: usize = 4;
/// Newton stopping tolerance for the inverse map.
pub const NEWTON_TOL: f64 = 1e-12;
/// Smallest admissible step count for flow integration.
pub const MIN_STEPS: usize = 32;

/// A diffeomorphism isotopic to the identity, sampled at grid points.
///
/// `f(x_p) = x_p + disp(x_p)` with periodic displacement; the Jacobian is
/// stored as its deviation from the identity to keep roundoff small under
/// repeated spectral differentiation.
#[derive(Clone, Debug)]
pub struct DiscreteDiffeo {
    pub spec: GridSpec,
    /// `disp[a][p]`.
    pub disp: Vec<Vec<f64>>,
    /// `jac_dev[a·d + b][p] = ∂_bf^a − δ^a_b`.
    pub jac_dev: Vec<Vec<f64>>,
    /// Displacement of the inverse map at grid points.
    pub inv_disp: Vec<Vec<f64>>,
    /// `sup_p |f(f⁻¹(x_p)) − x_p|`.
    pub inverse_residual: f64,
    /// Grid shift when the map is an exact grid translation.
    pub shift: Option<Vec<i64>>,
}

impl DiscreteDiffeo {
    pub fn identity(spec: GridSpec) -> Self {
        let d = spec.dim();
        let z = vec![0.0; spec.total()];
        DiscreteDiffeo {
            spec,
            disp: vec![z.clone(); d],
            jac_dev: vec![z.clone(); d * d],
            inv_disp: vec![z; d],
            inverse_residual: 0.0,
            shift: Some(vec![0; d]),
        }
    }

    /// `x ↦ x + shift·h`, an exact symplectomorphism of the grid.
    pub fn translation(spec: GridSpec, shift: &[i64]) -> Result<Self> {
        let d = spec.dim();
        if shift.len() != d {
            return Err(KflowError::AxisOutOfRange { axis: shift.len(), dim: d });
        }
        let h = 1.0 / spec.points_per_axis as f64;
        let total = spec.total();
        let mut out = Self::identity(spec);
        for a in 0..d {
            out.disp[a] = vec![shift[a] as f64 * h; total];
            out.inv_disp[a] = vec![-(shift[a] as f64) * h; total];
        }
        out.shift = Some(shift.to_vec());
        Ok(out)
    }

    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Image of grid point `p`.
    pub fn image(&self, p: usize) -> Vec<f64> {
        let x = self.spec.coords(p);
        x.iter().enumerate().map(|(a, xa)| xa + self.disp[a][p]).collect()
    }

    /// `Df` at grid point `p` as a row-major matrix.
    pub fn jacobian(&self, p: usize) -> Vec<f64> {
        let d = self.dim();
        (0..d * d).map(|c| self.jac_dev[c][p] + if c / d == c % d { 1.0 } else { 0.0 }).collect()
    }

    /// `min_p det Df`.
    pub fn min_jacobian_det(&self) -> f64 {
        let d = self.dim();
        (0..self.spec.total())
            .map(|p| DMatrix::from_row_slice(d, d, &self.jacobian(p)).determinant())
            .fold(f64::INFINITY, f64::min)
    }

    /// `sup_p |Df − ∂(x + disp)|` with the derivative of the displacement taken
    /// spectrally, a consistency check between the two Jacobian routes.
    pub fn jacobian_consistency(&self) -> f64 {
        let d = self.dim();
        let t = TensorField::from_components(self.spec, vec![Variance::Contra], self.disp.clone()).expect("grid");
        let mut worst = 0.0_f64;
        for b in 0..d {
            let db = partial_derivative_tensor(&t, b, 1).expect("axis");
            for a in 0..d {
                for p in 0..self.spec.total() {
                    worst = worst.max((db.comp(a)[p] - self.jac_dev[a * d + b][p]).abs());
                }
            }
        }
        worst
    }

    /// Interpolant of the displacement and Jacobian deviation.
    fn interpolant(&self) -> TrigInterpolant {
        let mut fields: Vec<&[f64]> = self.disp.iter().map(|v| v.as_slice()).collect();
        fields.extend(self.jac_dev.iter().map(|v| v.as_slice()));
        TrigInterpolant::new(&self.spec, &fields, 0.0)
    }

    fn with_inverse(mut self) -> Result<Self> {
        let d = self.dim();
        let spec = self.spec;
        let it = TrigInterpolant::new(&spec, &self.disp.iter().map(|v| v.as_slice()).collect::<Vec<_>>(), 0.0);
        let res = pointwise(spec.total(), d + 1, |p, out| {
            let y = spec.coords(p);
            let mut x: Vec<f64> = (0..d).map(|a| y[a] - self.disp[a][p]).collect();
            let mut vals = vec![0.0; d];
            let mut grads = vec![0.0; d * d];
            let mut r = f64::INFINITY;
            for _ in 0..NEWTON_ITERS + 2 {
                it.eval_with_grad(&x, &mut vals, &mut grads);
                let f: Vec<f64> = (0..d).map(|a| x[a] + vals[a] - y[a]).collect();
                r = f.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
                if r < NEWTON_TOL {
                    break;
                }
                let jm = DMatrix::from_fn(d, d, |a, b| grads[a * d + b] + if a == b { 1.0 } else { 0.0 });
                if let Some(dx) = jm.lu().solve(&DVector::from_vec(f)) {
                    for a in 0..d {
                        x[a] -= dx[a];
                    }
                }
            }
            for a in 0..d {
                out[a] = x[a] - y[a];
            }
            out[d] = r;
        });
        self.inverse_residual = res[d].iter().fold(0.0_f64, |m, v| m.max(*v));
        self.inv_disp = res[..d].to_vec();
        Ok(self)
    }

    /// `f ∘ g`: `(f∘g)(x) = f(g(x))`.
    pub fn compose(&self, g: &DiscreteDiffeo) -> Result<DiscreteDiffeo> {
        if self.spec != g.spec {
            return Err(KflowError::GridMismatch);
        }
        if let (Some(a), Some(b)) = (&self.shift, &g.shift) {
            let s: Vec<i64> = a.iter().zip(b).map(|(x, y)| x + y).collect();
            return Self::translation(self.spec, &s);
        }
        let d = self.dim();
        let it = self.interpolant();
        let out = pointwise(self.spec.total(), d + d * d, |p, out| {
            let y = g.image(p);
            let mut vals = vec![0.0; d + d * d];
            it.eval(&y, &mut vals);
            let jf: Vec<f64> = (0..d * d).map(|c| vals[d + c] + if c / d == c % d { 1.0 } else { 0.0 }).collect();
            let jg = g.jacobian(p);
            for a in 0..d {
                out[a] = g.disp[a][p] + vals[a];
                for b in 0..d {
                    let mut s = 0.0;
                    for c in 0..d {
                        s += jf[a * d + c] * jg[c * d + b];
                    }
                    out[d + a * d + b] = s - if a == b { 1.0 } else { 0.0 };
                }
            }
        });
        let mut it = out.into_iter();
        let disp: Vec<Vec<f64>> = (0..d).map(|_| it.next().unwrap()).collect();
        let jac_dev: Vec<Vec<f64>> = it.collect();
        DiscreteDiffeo { spec: self.spec, disp, jac_dev, inv_disp: Vec::new(), inverse_residual: 0.0, shift: None }
            .with_inverse()
    }
}

/// RK4 integration of `ẋ = X(t, x)` and `J̇ = DX·J` from every grid point over `[0, t_end]`.
pub(crate) fn integrate_flow<V: VelocityField>(
    spec: GridSpec,
    field: &V,
    t_end: f64,
    steps: usize,
) -> Result<DiscreteDiffeo> {
    if steps < MIN_STEPS {
        return Err(KflowError::InvalidGrid(format!("flow integration needs at least {MIN_STEPS} steps, got {steps}")));
    }
    let d = spec.dim();
    if field.dim() != d {
        return Err(KflowError::GridMismatch);
    }
    let dt = t_end / steps as f64;
    let cell = 1.0 / spec.points_per_axis as f64;
    // state: displacement u (d), Jacobian deviation E = J − I (d²)
    let rhs = |t: f64, x0: &[f64], s: &[f64]| -> Vec<f64> {
        let x: Vec<f64> = (0..d).map(|a| x0[a] + s[a]).collect();
        let (v, dv) = field.eval(t, &x);
        let mut out = vec![0.0; d + d * d];
        out[..d].copy_from_slice(&v);
        for a in 0..d {
            for b in 0..d {
                // DX·(I + E)
                let mut acc = dv[a * d + b];
                for c in 0..d {
                    acc += dv[a * d + c] * s[d + c * d + b];
                }
                out[d + a * d + b] = acc;
            }
        }
        out
    };
    let res = pointwise(spec.total(), d + d * d + 1, |p, out| {
        let x0 = spec.coords(p);
        let mut s = vec![0.0; d + d * d];
        let mut max_step = 0.0_f64;
        for k in 0..steps {
            let t = k as f64 * dt;
            let k1 = rhs(t, &x0, &s);
            let s2: Vec<f64> = s.iter().zip(&k1).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k2 = rhs(t + 0.5 * dt, &x0, &s2);
            let s3: Vec<f64> = s.iter().zip(&k2).map(|(a, b)| a + 0.5 * dt * b).collect();
            let k3 = rhs(t + 0.5 * dt, &x0, &s3);
            let s4: Vec<f64> = s.iter().zip(&k3).map(|(a, b)| a + dt * b).collect();
            let k4 = rhs(t + dt, &x0, &s4);
            for i in 0..s.len() {
                s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
            max_step = max_step.max(k1[..d].iter().fold(0.0_f64, |m, v| m.max((v * dt).abs())));
        }
        out[..d + d * d].copy_from_slice(&s);
        out[d + d * d] = max_step;
    });
    let worst_step = res[d + d * d].iter().fold(0.0_f64, |m, v| m.max(*v));
    if worst_step > cell {
        return Err(KflowError::StepRejected(format!(
            "trajectory moved {worst_step:.3e} in one step, more than a grid cell"
        )));
    }
    let mut it = res.into_iter();
    let disp: Vec<Vec<f64>> = (0..d).map(|_| it.next().unwrap()).collect();
    let jac_dev: Vec<Vec<f64>> = (0..d * d).map(|_| it.next().unwrap()).collect();
    let f = DiscreteDiffeo { spec, disp, jac_dev, inv_disp: Vec::new(), inverse_residual: 0.0, shift: None }
        .with_inverse()?;
    if !(f.min_jacobian_det() > 0.0) {
        return Err(KflowError::InvariantViolation {
            what: "Jacobian determinant".into(),
            residual: f.min_jacobian_det(),
        });
    }
    Ok(f)
}

/// Moser flow `f_t` with `ḟ_t = X_t∘f_t`, `X_t = −grad^{φ(t)}φ̇`, so that
/// `f_t^*ω_{φ(t)} = ω_{φ(0)}`.
pub fn moser_flow(path: &PotentialPath, spec: GridSpec, t: f64, steps: usize) -> Result<DiscreteDiffeo> {
    if spec.n != path.n {
        return Err(KflowError::GridMismatch);
    }
    if t < path.t_min || t > path.t_max {
        return Err(KflowError::InvalidGrid(format!("t = {t} outside the path domain")));
    }
    if t == 0.0 {
        return Ok(DiscreteDiffeo::identity(spec));
    }
    let lo = t.min(0.0);
    let hi = t.max(0.0);
    let sub = PotentialPath { t_min: lo, t_max: hi, ..path.clone() };
    sub.check_positivity(spec, 8)?;
    integrate_flow(spec, &MoserField { frame: Frame::standard(spec.n), path }, t, steps)
}

/// Time-`t` flow of the `ω_φ`-Hamiltonian field of `F`.
pub fn hamiltonian_flow(phi: &TrigPoly, f: &TrigPoly, spec: GridSpec, t: f64, steps: usize) -> Result<DiscreteDiffeo> {
    if t == 0.0 || f.is_zero() {
        return Ok(DiscreteDiffeo::identity(spec));
    }
    integrate_flow(spec, &HamiltonianField { frame: Frame::standard(spec.n), phi, f }, t, steps)
}

/// `sup |f_t^*ω_{φ(t)} − ω_{φ(0)}|`.
pub fn moser_residual(path: &PotentialPath, f: &DiscreteDiffeo, t: f64) -> Result<f64> {
    use crate::kahler_geometry::build_geometry;
    let spec = f.spec;
    let target = build_geometry(&path.potential(spec, t))?;
    let base = build_geometry(&path.potential(spec, 0.0))?;
    let pulled = super::pullback::pullback_covariant(&target.omega, f)?;
    Ok(pulled.sub(&base.omega).sup_norm())
}

pub(crate) fn inverse_matrix(m: &[f64], d: usize) -> Vec<f64> {
    invert(m, d)
}
