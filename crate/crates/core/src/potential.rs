use serde::{Deserialize, Serialize};

/// Environment potential `U_i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Potential {
    /// `U(x) = -|x|^2 / 2`, giving the outward drift `-∇U(x) = x`.
    #[default]
    InvertedQuadratic,
    /// `U ≡ 0`.
    None,
}

impl Potential {
    /// Writes `-∇U(x)` into `out`.
    #[inline]
    pub fn neg_gradient(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Potential::InvertedQuadratic => out.copy_from_slice(x),
            Potential::None => out.iter_mut().for_each(|o| *o = 0.0),
        }
    }

    #[inline]
    pub fn neg_gradient_component(&self, x: f64) -> f64 {
        match self {
            Potential::InvertedQuadratic => x,
            Potential::None => 0.0,
        }
    }
}
