/// Adagrad: each parameter's step is scaled by the inverse root of its
/// accumulated squared gradient.
#[derive(Debug, Clone)]
pub struct Adagrad {
    learning_rate: f64,
    accum: Vec<f64>,
}

const EPS: f64 = 1e-8;

impl Adagrad {
    pub fn new(learning_rate: f64, num_params: usize) -> Adagrad {
        Adagrad { learning_rate, accum: vec![0.0; num_params] }
    }

    /// Moves `params` along `direction` (an ascent direction).
    pub fn ascend(&mut self, params: &mut [f64], direction: &[f64]) {
        debug_assert_eq!(params.len(), direction.len());
        for ((p, &g), acc) in params.iter_mut().zip(direction).zip(self.accum.iter_mut()) {
            if g == 0.0 {
                continue;
            }
            *acc += g * g;
            *p += self.learning_rate * g / (acc.sqrt() + EPS);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_has_learning_rate_magnitude() {
        let mut opt = Adagrad::new(0.1, 2);
        let mut p = [0.0, 0.0];
        opt.ascend(&mut p, &[5.0, -0.01]);
        assert!((p[0] - 0.1).abs() < 1e-6);
        assert!((p[1] + 0.1).abs() < 1e-5);
    }

    #[test]
    fn climbs_a_concave_bowl() {
        // maximize -(x-3)^2
        let mut opt = Adagrad::new(0.5, 1);
        let mut x = [0.0];
        for _ in 0..2000 {
            let g = -2.0 * (x[0] - 3.0);
            opt.ascend(&mut x, &[g]);
        }
        assert!((x[0] - 3.0).abs() < 1e-3);
    }
}
