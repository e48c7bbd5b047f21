use super::contract::{check, gradient_hessian, is_constant};
use super::series::NuSeries;
use crate::acs_space::{lie_derivative_j, omega_j, CompatibleACS, HERMITIAN_SCAL_RATIO};
use crate::error::Result;
use crate::grid_core::{ComplexField, ScalarField};
use crate::kahler_geometry::{differential_ops, GeometryCache};
use num_complex::Complex64;

/// Truncation order of the Wick-type product.
pub const WICK_ORDER: usize = 2;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// Measured `c` in `C₁(F,H) − C₁(H,F) = c{F,H}` for the Wick-type product.
pub const WICK_BRACKET_CONSTANT: Complex64 = I;

/// Measured `κ` in `∫[F,H]_{ω,J} ω^n/n!|_{ν²} = κ·(i/4)Ω^𝓙(L_{X_F}J, L_{X_H}J)`;
/// the sign reflects the orientation convention of `Ω^𝓙`.
pub const WICK_COMMUTATOR_CONSTANT: f64 = -1.0;

/// Complex frames of the standard `J` in real components: holomorphic vectors
/// `∂_α = ½(e_α − iJe_α)` and covectors `dz^α = e^α − i e^α∘J`, `α < n`.
struct ComplexFrame {
    n: usize,
    d: usize,
    /// `hol[α][a]`, components of `∂_α`.
    hol: Vec<Vec<Complex64>>,
    /// `dz[α][a]`.
    dz: Vec<Vec<Complex64>>,
}

impl ComplexFrame {
    fn new(geom: &GeometryCache) -> Self {
        let d = geom.dim();
        let n = d / 2;
        let j = geom.j_matrix();
        let hol = (0..n)
            .map(|al| (0..d).map(|a| 0.5 * (if a == al { 1.0 } else { 0.0 } - I * j[a * d + al])).collect())
            .collect();
        let dz =
            (0..n).map(|al| (0..d).map(|b| if b == al { 1.0 } else { 0.0 } - I * j[al * d + b]).collect()).collect();
        ComplexFrame { n, d, hol, dz }
    }

    /// Holomorphic (`conj = false`) or antiholomorphic first derivatives.
    fn first(&self, grad: &[Vec<f64>], conj: bool, total: usize) -> Vec<Vec<Complex64>> {
        (0..self.n)
            .map(|al| {
                let mut v = vec![Complex64::new(0.0, 0.0); total];
                for a in 0..self.d {
                    let c = if conj { self.hol[al][a].conj() } else { self.hol[al][a] };
                    for p in 0..total {
                        v[p] += c * grad[a][p];
                    }
                }
                v
            })
            .collect()
    }

    /// Pure-type Hessian components `(∇²F)_{α₁α₂}` or `(∇²F)_{β̄₁β̄₂}`.
    fn hessian(&self, hess: &[Vec<f64>], conj: bool, total: usize) -> Vec<Vec<Complex64>> {
        let (n, d) = (self.n, self.d);
        let mut out = vec![vec![Complex64::new(0.0, 0.0); total]; n * n];
        for a1 in 0..n {
            for a2 in 0..n {
                let o = &mut out[a1 * n + a2];
                for a in 0..d {
                    for b in 0..d {
                        let mut c = self.hol[a1][a] * self.hol[a2][b];
                        if conj {
                            c = c.conj();
                        }
                        if c == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let h = &hess[a * d + b];
                        for p in 0..total {
                            o[p] += c * h[p];
                        }
                    }
                }
            }
        }
        out
    }

    /// `Λ^{αβ̄} = Λ(dz^α, dz̄^β)` as `n×n` complex fields.
    fn lambda(&self, geom: &GeometryCache) -> Vec<Vec<Complex64>> {
        let (n, d) = (self.n, self.d);
        let total = geom.spec.total();
        let mut out = vec![vec![Complex64::new(0.0, 0.0); total]; n * n];
        for al in 0..n {
            for be in 0..n {
                let o = &mut out[al * n + be];
                for a in 0..d {
                    for b in 0..d {
                        let c = self.dz[al][a] * self.dz[be][b].conj();
                        if c == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let l = geom.lambda.at(&[a, b]);
                        for p in 0..total {
                            o[p] += c * l[p];
                        }
                    }
                }
            }
        }
        out
    }
}

fn wick_cochains(
    fr: &ComplexFrame,
    lam: &[Vec<Complex64>],
    f: &(Vec<Vec<f64>>, Vec<Vec<f64>>),
    h: &(Vec<Vec<f64>>, Vec<Vec<f64>>),
    total: usize,
) -> (Vec<Complex64>, Vec<Complex64>) {
    let n = fr.n;
    let df = fr.first(&f.0, false, total);
    let dh = fr.first(&h.0, true, total);
    let hf = fr.hessian(&f.1, false, total);
    let hh = fr.hessian(&h.1, true, total);
    let mut c1 = vec![Complex64::new(0.0, 0.0); total];
    let mut c2 = vec![Complex64::new(0.0, 0.0); total];
    for al in 0..n {
        for be in 0..n {
            let l = &lam[al * n + be];
            for p in 0..total {
                c1[p] += I * l[p] * df[al][p] * dh[be][p];
            }
        }
    }
    for a1 in 0..n {
        for b1 in 0..n {
            for a2 in 0..n {
                for b2 in 0..n {
                    let (l1, l2) = (&lam[a1 * n + b1], &lam[a2 * n + b2]);
                    let (x, y) = (&hf[a1 * n + a2], &hh[b1 * n + b2]);
                    for p in 0..total {
                        c2[p] += l1[p] * l2[p] * x[p] * y[p];
                    }
                }
            }
        }
    }
    (c1, c2)
}

pub(crate) fn wick_pair(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<(NuSeries, NuSeries)> {
    check(f, geom)?;
    check(h, geom)?;
    let spec = geom.spec;
    let total = spec.total();
    let fh = ComplexField::from_real(&f.mul(h));
    if is_constant(f) || is_constant(h) {
        let s = NuSeries::from_complex(vec![fh, ComplexField::zeros(spec), ComplexField::zeros(spec)])?;
        return Ok((s.clone(), s));
    }
    let fr = ComplexFrame::new(geom);
    let lam = fr.lambda(geom);
    let jf = gradient_hessian(f, geom);
    let jh = gradient_hessian(h, geom);
    let (a1, a2) = wick_cochains(&fr, &lam, &jf, &jh, total);
    let (b1, b2) = wick_cochains(&fr, &lam, &jh, &jf, total);
    let cf = |v: Vec<Complex64>| ComplexField { spec, values: v };
    Ok((NuSeries::from_complex(vec![fh.clone(), cf(a1), cf(a2)])?, NuSeries::from_complex(vec![fh, cf(b1), cf(b2)])?))
}

/// `F*H = FH + iνΛ^{αβ̄}∂_αF∂_{β̄}H + ν²Λ^{α₁β̄₁}Λ^{α₂β̄₂}(∇²F)_{α₁α₂}(∇²H)_{β̄₁β̄₂}`
/// in the complex coordinates of the standard `J`.
pub fn wick_product(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<NuSeries> {
    Ok(wick_pair(f, h, geom)?.0)
}

/// Hermitian scalar curvature `Scal(J)` of the Kähler structure, i.e.
/// [`HERMITIAN_SCAL_RATIO`] times the Riemannian scalar curvature.
pub fn hermitian_scal(geom: &GeometryCache) -> ScalarField {
    geom.scal.scale(HERMITIAN_SCAL_RATIO)
}

/// Trace density `1 + (ν/4)Scal(J)`.
pub fn wick_trace_density(geom: &GeometryCache) -> Result<NuSeries> {
    let spec = geom.spec;
    NuSeries::from_real(&[ScalarField::constant(spec, 1.0), hermitian_scal(geom).scale(0.25), ScalarField::zeros(spec)])
}

/// Coefficients of `∫[F,H]_{ω,J}(1 + (ν/4)Scal(J)) ω^n/n!` through `ν²`.
pub fn wick_trace_defect(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<super::trace::TraceDefect> {
    super::trace::trace_defect(f, h, &wick_trace_density(geom)?, super::trace::StarProduct::Wick, geom)
}

/// Least-squares constant `c` with `C₁(F,H) − C₁(H,F) ≈ c{F,H}`, and the
/// relative residual of that fit.
pub fn wick_poisson_constant(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<(Complex64, f64)> {
    let (a, b) = wick_pair(f, h, geom)?;
    let c1: Vec<Complex64> = a.coeffs[1].values.iter().zip(&b.coeffs[1].values).map(|(x, y)| x - y).collect();
    let pb = differential_ops(geom).poisson(f, h)?;
    let nn: f64 = pb.values.iter().map(|v| v * v).sum();
    if nn == 0.0 {
        return Ok((Complex64::new(0.0, 0.0), 0.0));
    }
    let c: Complex64 = c1.iter().zip(&pb.values).map(|(x, v)| x * v).sum::<Complex64>() / nn;
    let res = c1.iter().zip(&pb.values).map(|(x, v)| (x - c * v).norm()).fold(0.0, f64::max);
    Ok((c, res / pb.sup_norm()))
}

/// `(∫[F,H]_{ω,J} ω^n/n!` at order `ν²`, `(i/4)Ω^𝓙(L_{X_F}J, L_{X_H}J))`.
pub fn wick_commutator_sides(f: &ScalarField, h: &ScalarField, geom: &GeometryCache) -> Result<(Complex64, Complex64)> {
    let (a, b) = wick_pair(f, h, geom)?;
    let comm = a.sub(&b)?;
    let lhs = comm.integrate(&geom.volume)?[2];
    let j = CompatibleACS::standard(geom);
    let lf = lie_derivative_j(f, &j, geom)?;
    let lh = lie_derivative_j(h, &j, geom)?;
    let rhs = 0.25 * I * omega_j(&lf, &lh, &j, geom)?;
    Ok((lhs, rhs))
}
