use crate::error::{KflowError, Result};
use crate::grid_core::{kfld, ComplexField, GridSpec, ScalarField};
use crate::numerics::pairwise_sum;
use num_complex::Complex64;

/// Truncated formal power series `c₀ + νc₁ + … + ν^Kc_K` with complex field
/// coefficients. Real series simply carry zero imaginary parts.
#[derive(Clone, Debug, PartialEq)]
pub struct NuSeries {
    pub spec: GridSpec,
    pub coeffs: Vec<ComplexField>,
}

impl NuSeries {
    pub fn zeros(spec: GridSpec, order: usize) -> Self {
        NuSeries { spec, coeffs: vec![ComplexField::zeros(spec); order + 1] }
    }

    /// `1 + 0ν + … + 0ν^K`.
    pub fn one(spec: GridSpec, order: usize) -> Self {
        let mut s = Self::zeros(spec, order);
        s.coeffs[0] = ComplexField::from_real(&ScalarField::constant(spec, 1.0));
        s
    }

    pub fn from_real(coeffs: &[ScalarField]) -> Result<Self> {
        Self::from_complex(coeffs.iter().map(ComplexField::from_real).collect())
    }

    pub fn from_complex(coeffs: Vec<ComplexField>) -> Result<Self> {
        let spec = coeffs.first().ok_or_else(|| KflowError::NotApplicable("empty series".into()))?.spec;
        if coeffs.iter().any(|c| c.spec != spec) {
            return Err(KflowError::GridMismatch);
        }
        Ok(NuSeries { spec, coeffs })
    }

    /// Truncation order `K`.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn coefficient(&self, k: usize) -> &ComplexField {
        &self.coeffs[k]
    }

    /// Real parts of all coefficients.
    pub fn real_parts(&self) -> Vec<ScalarField> {
        self.coeffs.iter().map(|c| c.re()).collect()
    }

    /// Largest imaginary part over all coefficients.
    pub fn imaginary_sup(&self) -> f64 {
        self.coeffs.iter().map(|c| c.im().sup_norm()).fold(0.0, f64::max)
    }

    /// Keep orders `0..=order` (no-op if already shorter).
    pub fn truncate(&self, order: usize) -> Self {
        NuSeries { spec: self.spec, coeffs: self.coeffs.iter().take(order + 1).cloned().collect() }
    }

    fn check(&self, o: &NuSeries) -> Result<()> {
        if self.spec != o.spec {
            Err(KflowError::GridMismatch)
        } else {
            Ok(())
        }
    }

    fn zip_with(&self, o: &NuSeries, f: impl Fn(Complex64, Complex64) -> Complex64) -> Result<Self> {
        self.check(o)?;
        let k = self.order().min(o.order());
        let coeffs = (0..=k)
            .map(|i| ComplexField {
                spec: self.spec,
                values: self.coeffs[i].values.iter().zip(&o.coeffs[i].values).map(|(&a, &b)| f(a, b)).collect(),
            })
            .collect();
        Ok(NuSeries { spec: self.spec, coeffs })
    }

    /// Sum, truncated at the smaller of the two orders.
    pub fn add(&self, o: &NuSeries) -> Result<Self> {
        self.zip_with(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &NuSeries) -> Result<Self> {
        self.zip_with(o, |a, b| a - b)
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .map(|f| ComplexField { spec: self.spec, values: f.values.iter().map(|v| v * c).collect() })
            .collect();
        NuSeries { spec: self.spec, coeffs }
    }

    /// Pointwise (Cauchy) product, truncated at the smaller of the two orders.
    pub fn mul(&self, o: &NuSeries) -> Result<Self> {
        self.check(o)?;
        let k = self.order().min(o.order());
        let total = self.spec.total();
        let coeffs = (0..=k)
            .map(|m| {
                let mut v = vec![Complex64::new(0.0, 0.0); total];
                for i in 0..=m {
                    let (a, b) = (&self.coeffs[i].values, &o.coeffs[m - i].values);
                    for p in 0..total {
                        v[p] += a[p] * b[p];
                    }
                }
                ComplexField { spec: self.spec, values: v }
            })
            .collect();
        Ok(NuSeries { spec: self.spec, coeffs })
    }

    /// Per-order integrals `∫ c_k · density` (density already includes the
    /// quadrature weight normalization, e.g. the volume form of the metric).
    pub fn integrate(&self, density: &ScalarField) -> Result<Vec<Complex64>> {
        density.check_grid(&self.spec)?;
        let n = self.spec.total() as f64;
        Ok(self
            .coeffs
            .iter()
            .map(|c| {
                let re: Vec<f64> = c.values.iter().zip(&density.values).map(|(v, w)| v.re * w).collect();
                let im: Vec<f64> = c.values.iter().zip(&density.values).map(|(v, w)| v.im * w).collect();
                Complex64::new(pairwise_sum(&re) / n, pairwise_sum(&im) / n)
            })
            .collect())
    }

    /// Sup norm of each coefficient.
    pub fn sup_norms(&self) -> Vec<f64> {
        self.coeffs.iter().map(|c| c.sup_norm()).collect()
    }

    /// One complex KFLD document per order.
    pub fn to_kfld_stack(&self) -> Vec<Vec<u8>> {
        self.coeffs.iter().map(kfld::encode_complex).collect()
    }

    /// Inverse of [`NuSeries::to_kfld_stack`].
    pub fn from_kfld_stack(docs: &[Vec<u8>]) -> Result<Self> {
        let coeffs = docs.iter().map(|b| kfld::decode(b).and_then(|f| f.to_complex())).collect::<Result<Vec<_>>>()?;
        Self::from_complex(coeffs)
    }
}
