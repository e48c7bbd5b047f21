use super::kernels::{metric_jet, point_geometry, pointwise, Frame, JetLayout};
use crate::error::{KflowError, Result};
use crate::grid_core::{derivatives_multi, GridSpec, ScalarField, Symmetry, TensorField, Variance};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// One Fourier term `amplitude · cos(2π k·x + phase)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PotentialMode {
    pub mode: Vec<i64>,
    pub amplitude: f64,
    #[serde(default)]
    pub phase: f64,
}

impl PotentialMode {
    pub fn new(mode: Vec<i64>, amplitude: f64, phase: f64) -> Self {
        PotentialMode { mode, amplitude, phase }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        let arg: f64 = self.mode.iter().zip(x).map(|(&k, &xa)| k as f64 * xa).sum();
        self.amplitude * (2.0 * PI * arg + self.phase).cos()
    }

    /// `|k|²`, the squared length of the mode vector.
    pub fn k2(&self) -> f64 {
        self.mode.iter().map(|&k| (k * k) as f64).sum()
    }
}

/// Mean-zero potential `φ` defining `ω_φ = ω + dd^cφ`.
#[derive(Clone, Debug, PartialEq)]
pub struct KahlerPotential {
    phi: ScalarField,
}

impl KahlerPotential {
    /// Wraps `phi`, subtracting its mean.
    pub fn new(phi: ScalarField) -> Self {
        KahlerPotential { phi: phi.remove_mean() }
    }

    pub fn flat(spec: GridSpec) -> Self {
        KahlerPotential { phi: ScalarField::zeros(spec) }
    }

    pub fn from_modes(spec: GridSpec, modes: &[PotentialMode]) -> Self {
        Self::new(ScalarField::from_fn(spec, |x| modes.iter().map(|m| m.eval(x)).sum()))
    }

    pub fn phi(&self) -> &ScalarField {
        &self.phi
    }

    pub fn spec(&self) -> GridSpec {
        self.phi.spec
    }

    pub fn perturbed(&self, t: f64, psi: &ScalarField) -> Self {
        Self::new(self.phi.axpy(t, psi))
    }
}

/// Immutable geometry of `(ω_φ, J)` at every grid point.
#[derive(Clone, Debug)]
pub struct GeometryCache {
    pub spec: GridSpec,
    pub potential: KahlerPotential,
    pub frame: Frame,
    pub jet_layout: JetLayout,
    /// Partial derivatives of `φ` of orders 2..4, one array per jet slot.
    pub jets: Vec<Vec<f64>>,
    pub omega: TensorField,
    pub lambda: TensorField,
    pub metric: TensorField,
    pub metric_inv: TensorField,
    /// `Γ^d_{ab}` stored as `[d][a][b]`.
    pub christoffel: TensorField,
    /// `∂_cΓ^d_{ab}` stored as `[c][d][a][b]`, exact via the product rule.
    pub dchristoffel: TensorField,
    /// `R(∂_a,∂_b)∂_c` stored as `[a][b][c][d]`.
    pub riemann: TensorField,
    pub ricci: TensorField,
    pub ricci_form: TensorField,
    pub scal: ScalarField,
    pub volume: ScalarField,
    /// Smallest eigenvalue of `g` over the grid.
    pub positivity_margin: f64,
}

fn concat(
    spec: GridSpec,
    variance: Vec<Variance>,
    comps: &mut std::vec::IntoIter<Vec<f64>>,
    count: usize,
) -> TensorField {
    let mut components = Vec::with_capacity(count * spec.total());
    for _ in 0..count {
        components.extend(comps.next().expect("component count"));
    }
    TensorField { spec, variance, components, symmetries: Vec::new() }
}

/// Smallest eigenvalue of a dense symmetric matrix.
pub(crate) fn min_eigenvalue(m: &[f64], d: usize) -> f64 {
    let mat = DMatrix::from_row_slice(d, d, m);
    mat.symmetric_eigenvalues().iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Potential jets (orders 2..4) by spectral differentiation.
pub(crate) fn potential_jets(phi: &ScalarField, jl: &JetLayout) -> Vec<Vec<f64>> {
    derivatives_multi(&phi.spec, &phi.values, &jl.alphas)
}

/// Check that `ω_φ(·,J·)` is positive definite; returns the smallest eigenvalue.
pub(crate) fn check_positivity(spec: &GridSpec, frame: &Frame, jl: &JetLayout, jets: &[Vec<f64>]) -> Result<f64> {
    let d = spec.dim();
    let mins = pointwise(spec.total(), 1, |p, out| {
        let pd: Vec<f64> = jets.iter().map(|j| j[p]).collect();
        let (g, _, _) = metric_jet(frame, jl, &pd);
        out[0] = min_eigenvalue(&g, d);
    });
    let (mut worst, mut at) = (f64::INFINITY, 0);
    for (p, &v) in mins[0].iter().enumerate() {
        if v < worst {
            worst = v;
            at = p;
        }
    }
    if !(worst > 0.0) {
        return Err(KflowError::PositivityViolation { point: at, eigenvalue: worst });
    }
    Ok(worst)
}

/// Build the full geometry stack of `ω_φ` and its Levi-Civita connection.
pub fn build_geometry(phi: &KahlerPotential) -> Result<GeometryCache> {
    let spec = phi.spec();
    let d = spec.dim();
    let frame = Frame::standard(spec.n);
    let jl = JetLayout::new(d);
    let jets = potential_jets(phi.phi(), &jl);
    let margin = check_positivity(&spec, &frame, &jl, &jets)?;

    let (d2, d3, d4) = (d * d, d * d * d, d * d * d * d);
    let nout = 4 * d2 + 1 + d3 + d4 + d4 + d2 + 1;
    let cm = pointwise(spec.total(), nout, |p, out| {
        let pd: Vec<f64> = jets.iter().map(|j| j[p]).collect();
        let pg = point_geometry(&frame, &jl, &pd);
        let mut k = 0;
        for part in [&pg.g, &pg.ginv, &pg.omega, &pg.lambda] {
            out[k..k + d2].copy_from_slice(part);
            k += d2;
        }
        out[k] = pg.vol;
        k += 1;
        out[k..k + d3].copy_from_slice(&pg.gamma);
        k += d3;
        out[k..k + d4].copy_from_slice(&pg.dgamma);
        k += d4;
        out[k..k + d4].copy_from_slice(&pg.rm);
        k += d4;
        out[k..k + d2].copy_from_slice(&pg.ric);
        k += d2;
        out[k] = pg.scal;
    });
    use Variance::{Co, Contra};
    let mut it = cm.into_iter();
    let metric = concat(spec, vec![Co, Co], &mut it, d2).with_symmetries(vec![Symmetry::symmetric(0, 1, 2)]);
    let metric_inv =
        concat(spec, vec![Contra, Contra], &mut it, d2).with_symmetries(vec![Symmetry::symmetric(0, 1, 2)]);
    let omega = concat(spec, vec![Co, Co], &mut it, d2).with_symmetries(vec![Symmetry::antisymmetric(0, 1, 2)]);
    let lambda =
        concat(spec, vec![Contra, Contra], &mut it, d2).with_symmetries(vec![Symmetry::antisymmetric(0, 1, 2)]);
    let volume = ScalarField { spec, values: it.next().unwrap() };
    let christoffel =
        concat(spec, vec![Contra, Co, Co], &mut it, d3).with_symmetries(vec![Symmetry::symmetric(1, 2, 3)]);
    let dchristoffel =
        concat(spec, vec![Co, Contra, Co, Co], &mut it, d4).with_symmetries(vec![Symmetry::symmetric(2, 3, 4)]);
    let riemann =
        concat(spec, vec![Co, Co, Co, Contra], &mut it, d4).with_symmetries(vec![Symmetry::antisymmetric(0, 1, 4)]);
    let ricci = concat(spec, vec![Co, Co], &mut it, d2).with_symmetries(vec![Symmetry::symmetric(0, 1, 2)]);
    let scal = ScalarField { spec, values: it.next().unwrap() };

    // ρ_ab = Ric(J∂_a, ∂_b) = s_a Ric_{π(a) b}
    let mut ricci_form = TensorField::covariant(spec, 2).with_symmetries(vec![Symmetry::antisymmetric(0, 1, 2)]);
    for a in 0..d {
        for b in 0..d {
            let src = ricci.at(&[frame.perm[a], b]).to_vec();
            let s = frame.sign[a];
            ricci_form.comp_mut(a * d + b).iter_mut().zip(src).for_each(|(o, v)| *o = s * v);
        }
    }

    Ok(GeometryCache {
        spec,
        potential: phi.clone(),
        frame,
        jet_layout: jl,
        jets,
        omega,
        lambda,
        metric,
        metric_inv,
        christoffel,
        dchristoffel,
        riemann,
        ricci,
        ricci_form,
        scal,
        volume,
        positivity_margin: margin,
    })
}

impl GeometryCache {
    pub fn dim(&self) -> usize {
        self.spec.dim()
    }

    /// Lowered curvature `R_{pqrs} = ω(R(∂_p,∂_q)∂_r, ∂_s)` (materialized on demand).
    pub fn riemann_lower(&self) -> TensorField {
        lower_last(&self.riemann, &self.omega)
    }

    /// `∫ f ω_φ^n/n!`.
    pub fn integrate(&self, f: &ScalarField) -> Result<f64> {
        crate::grid_core::integrate(f, &self.volume)
    }

    /// Weighted inner product `∫ f h ω_φ^n/n!`.
    pub fn inner(&self, f: &ScalarField, h: &ScalarField) -> Result<f64> {
        self.integrate(&f.mul(h))
    }

    /// `J^a_b` (constant).
    pub fn j_matrix(&self) -> Vec<f64> {
        self.frame.j_matrix()
    }
}

/// Lower the last (contravariant) slot of a tensor with `ω`: `T_{..s} = T^d ω_{ds}`.
pub fn lower_last(t: &TensorField, omega: &TensorField) -> TensorField {
    let d = t.spec.dim();
    let total = t.spec.total();
    let mut out = t.clone();
    if let Some(v) = out.variance.last_mut() {
        *v = Variance::Co;
    }
    out.symmetries.clear();
    let outer = t.ncomp() / d;
    for o in 0..outer {
        for s in 0..d {
            let dst = &mut out.components[(o * d + s) * total..(o * d + s + 1) * total];
            dst.iter_mut().for_each(|v| *v = 0.0);
            for dd in 0..d {
                let src = t.comp(o * d + dd);
                let w = omega.comp(dd * d + s);
                for p in 0..total {
                    dst[p] += src[p] * w[p];
                }
            }
        }
    }
    out
}
