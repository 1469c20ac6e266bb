//! Phase-space symbols of configured observables.

use magpack_core::fields::{QuadraticSymbol, Symbol, TrigSymbol};
use magpack_core::linalg::{RMat, RVec};

/// A quadratic polynomial plus cosines of x; covers every observable the
/// configuration schema can express.
#[derive(Debug, Clone)]
pub struct ObservableSymbol {
    pub quad: QuadraticSymbol,
    /// (amplitude, wave vector over x)
    pub cos: Vec<(f64, Vec<f64>)>,
}

impl ObservableSymbol {
    pub fn quadratic(quad: QuadraticSymbol) -> Self {
        Self { quad, cos: vec![] }
    }

    fn trig(&self) -> Option<TrigSymbol> {
        if self.cos.is_empty() {
            return None;
        }
        let d = self.quad.dim();
        let terms = self
            .cos
            .iter()
            .map(|(amp, w)| {
                let mut wave = w.clone();
                wave.resize(2 * d, 0.0);
                (*amp, wave, 0.0)
            })
            .collect();
        TrigSymbol::new(d, terms).ok()
    }
}

impl Symbol for ObservableSymbol {
    fn dim(&self) -> usize {
        self.quad.dim()
    }

    fn value(&self, t: f64, z: &[f64]) -> f64 {
        self.quad.value(t, z) + self.trig().map_or(0.0, |s| s.value(t, z))
    }

    fn grad(&self, t: f64, z: &[f64]) -> RVec {
        let g = self.quad.grad(t, z);
        match self.trig() {
            Some(s) => g + s.grad(t, z),
            None => g,
        }
    }

    fn hess(&self, t: f64, z: &[f64]) -> RMat {
        let h = self.quad.hess(t, z);
        match self.trig() {
            Some(s) => h + s.hess(t, z),
            None => h,
        }
    }

    fn partial(&self, t: f64, z: &[f64], alpha: &[usize]) -> Option<f64> {
        let a = self.quad.partial(t, z, alpha)?;
        let b = match self.trig() {
            Some(s) => s.partial(t, z, alpha)?,
            None => 0.0,
        };
        Some(a + b)
    }
}
