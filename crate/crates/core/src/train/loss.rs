use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    /// Binary cross-entropy on a logit.
    #[default]
    Logistic,
    /// `0.5 * (output - target)^2`.
    Squared,
}

impl LossKind {
    pub fn eval(self, output: f64, target: f64) -> (f64, f64) {
        match self {
            LossKind::Logistic => logistic_loss(output, target),
            LossKind::Squared => squared_loss(output, target),
        }
    }
}

/// `softplus(z) - y z` and its derivative `sigmoid(z) - y`.
pub fn logistic_loss(logit: f64, label: f64) -> (f64, f64) {
    let softplus = logit.max(0.0) + (-logit.abs()).exp().ln_1p();
    let sigmoid = if logit >= 0.0 {
        1.0 / (1.0 + (-logit).exp())
    } else {
        let e = logit.exp();
        e / (1.0 + e)
    };
    (softplus - label * logit, sigmoid - label)
}

pub fn squared_loss(output: f64, target: f64) -> (f64, f64) {
    let d = output - target;
    (0.5 * d * d, d)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetry_point() {
        let ln2 = std::f64::consts::LN_2;
        assert_eq!(logistic_loss(0.0, 1.0), (ln2, -0.5));
        assert_eq!(logistic_loss(0.0, 0.0), (ln2, 0.5));
    }

    #[test]
    fn matches_direct_formula() {
        let (l, g) = logistic_loss(3.0, 1.0);
        let want_l = -(1.0 / (1.0 + (-3.0f64).exp())).ln();
        let want_g = 1.0 / (1.0 + (-3.0f64).exp()) - 1.0;
        assert!((l - want_l).abs() < 1e-9);
        assert!((g - want_g).abs() < 1e-9);
    }

    #[test]
    fn stable_for_large_logits() {
        let (l, g) = logistic_loss(800.0, 0.0);
        assert!((l - 800.0).abs() < 1e-9 && (g - 1.0).abs() < 1e-12);
        let (l, g) = logistic_loss(-800.0, 0.0);
        assert!(l.abs() < 1e-12 && g.abs() < 1e-12);
    }

    #[test]
    fn squared() {
        assert_eq!(squared_loss(1.5, 0.5), (0.5, 1.0));
    }
}
