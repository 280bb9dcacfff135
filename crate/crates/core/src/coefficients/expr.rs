//! Closed-form scalar expressions `(t, x, y) ↦ value` selectable from a
//! configuration file.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TrigFunction {
    Sin,
    Cos,
}

/// One monomial `coef · t^t · x^x · y^y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Monomial {
    pub coef: f64,
    #[serde(default)]
    pub t: u32,
    #[serde(default)]
    pub x: u32,
    #[serde(default)]
    pub y: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Expr {
    Constant {
        value: f64,
    },
    Polynomial {
        terms: Vec<Monomial>,
    },
    /// `offset + amplitude · f(Σ_d wave_d x_d + rate·t + phase)`.
    Trig {
        #[serde(default)]
        offset: f64,
        amplitude: f64,
        function: TrigFunction,
        #[serde(default)]
        wave: Vec<f64>,
        #[serde(default)]
        rate: f64,
        #[serde(default)]
        phase: f64,
    },
    /// Pointwise product of the factors.
    Product {
        factors: Vec<Expr>,
    },
    Sum {
        terms: Vec<Expr>,
    },
    /// `exp(rate · t)`.
    Exp {
        rate: f64,
    },
}

impl Expr {
    pub fn constant(value: f64) -> Self {
        Expr::Constant { value }
    }

    pub fn eval(&self, t: f64, x: &[f64]) -> f64 {
        match self {
            Expr::Constant { value } => *value,
            Expr::Polynomial { terms } => terms
                .iter()
                .map(|m| {
                    let xv = x.first().copied().unwrap_or(0.0);
                    let yv = x.get(1).copied().unwrap_or(0.0);
                    m.coef * t.powi(m.t as i32) * xv.powi(m.x as i32) * yv.powi(m.y as i32)
                })
                .sum(),
            Expr::Trig { offset, amplitude, function, wave, rate, phase } => {
                let arg: f64 = wave.iter().zip(x).map(|(k, xi)| k * xi).sum::<f64>() + rate * t + phase;
                let f = match function {
                    TrigFunction::Sin => arg.sin(),
                    TrigFunction::Cos => arg.cos(),
                };
                offset + amplitude * f
            }
            Expr::Product { factors } => factors.iter().map(|f| f.eval(t, x)).product(),
            Expr::Sum { terms } => terms.iter().map(|f| f.eval(t, x)).sum(),
            Expr::Exp { rate } => (rate * t).exp(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_evaluates() {
        let src = r#"
            kind = "sum"
            [[terms]]
            kind = "polynomial"
            terms = [{ coef = 2.0, t = 1 }, { coef = 1.0, x = 2 }]
            [[terms]]
            kind = "trig"
            amplitude = 0.5
            function = "sin"
            wave = [3.141592653589793]
        "#;
        let e: Expr = toml::from_str(src).unwrap();
        let v = e.eval(0.25, &[0.5]);
        assert!((v - (0.5 + 0.25 + 0.5)).abs() < 1e-14);
        let p = Expr::Product { factors: vec![Expr::constant(3.0), Expr::Exp { rate: -1.0 }] };
        assert!((p.eval(1.0, &[0.0]) - 3.0 / std::f64::consts::E).abs() < 1e-15);
    }
}
