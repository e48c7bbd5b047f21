use crate::error::{KflowError, Result};
use crate::numerics::{pairwise_mean, sup_norm};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Uniform periodic grid on `[0,1)^{2n}` with axes ordered `(x¹..xⁿ, y¹..yⁿ)`.
///
/// Grid points are stored with axis 0 outermost (row-major).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct GridSpec {
    pub n: usize,
    pub points_per_axis: usize,
}

impl GridSpec {
    pub fn new(n: usize, points_per_axis: usize) -> Result<Self> {
        if n != 1 && n != 2 {
            return Err(KflowError::InvalidGrid(format!("complex dimension must be 1 or 2, got {n}")));
        }
        if points_per_axis < 8 || points_per_axis % 2 != 0 {
            return Err(KflowError::InvalidGrid(format!(
                "points per axis must be even and at least 8, got {points_per_axis}"
            )));
        }
        Ok(GridSpec { n, points_per_axis })
    }

    /// Real dimension `2n`.
    #[inline]
    pub fn dim(&self) -> usize {
        2 * self.n
    }

    #[inline]
    pub fn total(&self) -> usize {
        self.points_per_axis.pow(self.dim() as u32)
    }

    /// Stride of `axis` in the flattened point index.
    #[inline]
    pub fn stride(&self, axis: usize) -> usize {
        self.points_per_axis.pow((self.dim() - 1 - axis) as u32)
    }

    /// Integer coordinate of point `idx` along `axis`.
    #[inline]
    pub fn axis_index(&self, idx: usize, axis: usize) -> usize {
        (idx / self.stride(axis)) % self.points_per_axis
    }

    pub fn coords(&self, idx: usize) -> Vec<f64> {
        let h = 1.0 / self.points_per_axis as f64;
        (0..self.dim()).map(|a| self.axis_index(idx, a) as f64 * h).collect()
    }

    /// Index of the grid point shifted by `shift[a]` nodes along each axis.
    pub fn shifted_index(&self, idx: usize, shift: &[i64]) -> usize {
        let np = self.points_per_axis as i64;
        let mut out = 0;
        for a in 0..self.dim() {
            let i = self.axis_index(idx, a) as i64 + shift[a];
            out += (i.rem_euclid(np)) as usize * self.stride(a);
        }
        out
    }
}

/// Real scalar field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub spec: GridSpec,
    pub values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: GridSpec, values: Vec<f64>) -> Result<Self> {
        if values.len() != spec.total() {
            return Err(KflowError::InvalidGrid(format!("expected {} values, got {}", spec.total(), values.len())));
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(KflowError::InvariantViolation {
                what: format!("non-finite value at point {i}"),
                residual: f64::NAN,
            });
        }
        Ok(ScalarField { spec, values })
    }

    pub fn zeros(spec: GridSpec) -> Self {
        ScalarField { spec, values: vec![0.0; spec.total()] }
    }

    pub fn constant(spec: GridSpec, c: f64) -> Self {
        ScalarField { spec, values: vec![c; spec.total()] }
    }

    pub fn from_fn<F: Fn(&[f64]) -> f64>(spec: GridSpec, f: F) -> Self {
        let values = (0..spec.total()).map(|i| f(&spec.coords(i))).collect();
        ScalarField { spec, values }
    }

    pub fn mean(&self) -> f64 {
        pairwise_mean(&self.values)
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.values)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Self {
        ScalarField { spec: self.spec, values: self.values.iter().map(|&v| f(v)).collect() }
    }

    pub fn zip<F: Fn(f64, f64) -> f64>(&self, o: &ScalarField, f: F) -> Self {
        assert_eq!(self.spec, o.spec, "grid mismatch");
        ScalarField { spec: self.spec, values: self.values.iter().zip(&o.values).map(|(&a, &b)| f(a, b)).collect() }
    }

    pub fn add(&self, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn mul(&self, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a * b)
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map(|v| c * v)
    }

    /// `self + c * o`.
    pub fn axpy(&self, c: f64, o: &ScalarField) -> Self {
        self.zip(o, |a, b| a + c * b)
    }

    pub fn remove_mean(&self) -> Self {
        let m = self.mean();
        self.map(|v| v - m)
    }

    /// Field translated by whole grid cells: `out(x) = self(x + shift·h)`.
    pub fn translate(&self, shift: &[i64]) -> Self {
        let values = (0..self.spec.total()).map(|i| self.values[self.spec.shifted_index(i, shift)]).collect();
        ScalarField { spec: self.spec, values }
    }

    pub fn check_grid(&self, spec: &GridSpec) -> Result<()> {
        if &self.spec != spec {
            Err(KflowError::GridMismatch)
        } else {
            Ok(())
        }
    }
}

/// Complex scalar field sampled on a grid.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexField {
    pub spec: GridSpec,
    pub values: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(spec: GridSpec) -> Self {
        ComplexField { spec, values: vec![Complex64::new(0.0, 0.0); spec.total()] }
    }

    pub fn from_real(f: &ScalarField) -> Self {
        ComplexField { spec: f.spec, values: f.values.iter().map(|&v| Complex64::new(v, 0.0)).collect() }
    }

    pub fn from_parts(re: &ScalarField, im: &ScalarField) -> Self {
        ComplexField {
            spec: re.spec,
            values: re.values.iter().zip(&im.values).map(|(&a, &b)| Complex64::new(a, b)).collect(),
        }
    }

    pub fn re(&self) -> ScalarField {
        ScalarField { spec: self.spec, values: self.values.iter().map(|c| c.re).collect() }
    }

    pub fn im(&self) -> ScalarField {
        ScalarField { spec: self.spec, values: self.values.iter().map(|c| c.im).collect() }
    }

    pub fn sup_norm(&self) -> f64 {
        self.values.iter().fold(0.0_f64, |m, c| m.max(c.norm()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variance {
    Co,
    Contra,
}

/// Index-permutation symmetry `T[perm(i)] = sign · T[i]`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Symmetry {
    pub perm: Vec<usize>,
    pub sign: i8,
}

impl Symmetry {
    pub fn symmetric(i: usize, j: usize, rank: usize) -> Self {
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(i, j);
        Symmetry { perm, sign: 1 }
    }

    pub fn antisymmetric(i: usize, j: usize, rank: usize) -> Self {
        let mut perm: Vec<usize> = (0..rank).collect();
        perm.swap(i, j);
        Symmetry { perm, sign: -1 }
    }
}

/// Tensor field with components stored component-major:
/// the multi-index (row-major over `2n` values per slot) is the outer index
/// and the grid point the inner one.
#[derive(Clone, Debug, PartialEq)]
pub struct TensorField {
    pub spec: GridSpec,
    pub variance: Vec<Variance>,
    pub components: Vec<f64>,
    pub symmetries: Vec<Symmetry>,
}

impl TensorField {
    pub fn zeros(spec: GridSpec, variance: Vec<Variance>) -> Self {
        let ncomp = spec.dim().pow(variance.len() as u32);
        TensorField { spec, variance, components: vec![0.0; ncomp * spec.total()], symmetries: Vec::new() }
    }

    pub fn covariant(spec: GridSpec, rank: usize) -> Self {
        Self::zeros(spec, vec![Variance::Co; rank])
    }

    pub fn from_components(spec: GridSpec, variance: Vec<Variance>, comps: Vec<Vec<f64>>) -> Result<Self> {
        let ncomp = spec.dim().pow(variance.len() as u32);
        if comps.len() != ncomp || comps.iter().any(|c| c.len() != spec.total()) {
            return Err(KflowError::InvalidGrid("component layout does not match grid and rank".into()));
        }
        Ok(TensorField { spec, variance, components: comps.concat(), symmetries: Vec::new() })
    }

    pub fn with_symmetries(mut self, s: Vec<Symmetry>) -> Self {
        self.symmetries = s;
        self
    }

    #[inline]
    pub fn rank(&self) -> usize {
        self.variance.len()
    }

    #[inline]
    pub fn ncomp(&self) -> usize {
        self.spec.dim().pow(self.rank() as u32)
    }

    /// Flat component index of a multi-index.
    #[inline]
    pub fn cidx(&self, idx: &[usize]) -> usize {
        let d = self.spec.dim();
        idx.iter().fold(0, |acc, &i| acc * d + i)
    }

    pub fn multi_index(&self, mut c: usize) -> Vec<usize> {
        let d = self.spec.dim();
        let mut out = vec![0; self.rank()];
        for s in (0..self.rank()).rev() {
            out[s] = c % d;
            c /= d;
        }
        out
    }

    #[inline]
    pub fn comp(&self, c: usize) -> &[f64] {
        let t = self.spec.total();
        &self.components[c * t..(c + 1) * t]
    }

    #[inline]
    pub fn comp_mut(&mut self, c: usize) -> &mut [f64] {
        let t = self.spec.total();
        &mut self.components[c * t..(c + 1) * t]
    }

    pub fn at(&self, idx: &[usize]) -> &[f64] {
        self.comp(self.cidx(idx))
    }

    pub fn component_field(&self, idx: &[usize]) -> ScalarField {
        ScalarField { spec: self.spec, values: self.at(idx).to_vec() }
    }

    /// All components at one grid point, in multi-index order.
    pub fn point(&self, p: usize) -> Vec<f64> {
        let t = self.spec.total();
        (0..self.ncomp()).map(|c| self.components[c * t + p]).collect()
    }

    pub fn sup_norm(&self) -> f64 {
        sup_norm(&self.components)
    }

    pub fn sub(&self, o: &TensorField) -> TensorField {
        let mut out = self.clone();
        for (a, b) in out.components.iter_mut().zip(&o.components) {
            *a -= b;
        }
        out.symmetries.clear();
        out
    }

    pub fn scale(&self, c: f64) -> TensorField {
        let mut out = self.clone();
        out.components.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn add(&self, o: &TensorField) -> TensorField {
        let mut out = self.clone();
        for (a, b) in out.components.iter_mut().zip(&o.components) {
            *a += b;
        }
        out.symmetries.clear();
        out
    }

    /// Largest violation of the declared symmetries, relative to the sup-norm.
    pub fn symmetry_residual(&self) -> f64 {
        let scale = self.sup_norm().max(1e-300);
        let mut worst = 0.0_f64;
        for s in &self.symmetries {
            for c in 0..self.ncomp() {
                let idx = self.multi_index(c);
                let pidx: Vec<usize> = s.perm.iter().map(|&k| idx[k]).collect();
                let a = self.comp(c);
                let b = self.at(&pidx);
                for (x, y) in a.iter().zip(b) {
                    worst = worst.max((y - s.sign as f64 * x).abs());
                }
            }
        }
        worst / scale
    }

    /// Tensor translated by whole grid cells.
    pub fn translate(&self, shift: &[i64]) -> TensorField {
        let mut out = self.clone();
        let t = self.spec.total();
        for c in 0..self.ncomp() {
            let src = self.comp(c);
            let dst = &mut out.components[c * t..(c + 1) * t];
            for (i, v) in dst.iter_mut().enumerate() {
                *v = src[self.spec.shifted_index(i, shift)];
            }
        }
        out
    }
}
