use crate::error::{Error, Result};
use crate::numgrad::{self, GradPair, Matrix};
use crate::rng::{SeededRng, Stream};

pub const TOY_HIDDEN: usize = 100;

/// Two-layer `2 → 100 → 2` ReLU classifier used for the two-moons demo.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyBackbone {
    pub layer1_weights: Matrix,
    pub layer1_bias: Matrix,
    pub layer2_weights: Matrix,
    pub layer2_bias: Matrix,
}

#[derive(Debug, Clone)]
pub struct ToyGrads {
    pub layer1_weights: Matrix,
    pub layer1_bias: Matrix,
    pub layer2_weights: Matrix,
    pub layer2_bias: Matrix,
}

impl ToyBackbone {
    pub fn zeros() -> Self {
        Self {
            layer1_weights: Matrix::zeros(2, TOY_HIDDEN),
            layer1_bias: Matrix::zeros(1, TOY_HIDDEN),
            layer2_weights: Matrix::zeros(TOY_HIDDEN, 2),
            layer2_bias: Matrix::zeros(1, 2),
        }
    }

    /// Weights and biases uniform in `±1/sqrt(fan_in)`.
    pub fn init(seed: u64) -> Self {
        let mut rng = SeededRng::for_stream(seed, Stream::Init);
        let mut uniform = |rows, cols, fan_in: usize| {
            let bound = 1.0 / (fan_in as f64).sqrt();
            Matrix::from_fn(rows, cols, |_, _| bound * (2.0 * rng.uniform() - 1.0))
        };
        Self {
            layer1_weights: uniform(2, TOY_HIDDEN, 2),
            layer1_bias: uniform(1, TOY_HIDDEN, 2),
            layer2_weights: uniform(TOY_HIDDEN, 2, TOY_HIDDEN),
            layer2_bias: uniform(1, 2, TOY_HIDDEN),
        }
    }

    pub fn blocks_mut(&mut self) -> [&mut Matrix; 4] {
        [
            &mut self.layer1_weights,
            &mut self.layer1_bias,
            &mut self.layer2_weights,
            &mut self.layer2_bias,
        ]
    }
}

impl ToyGrads {
    pub fn blocks(&self) -> [&Matrix; 4] {
        [
            &self.layer1_weights,
            &self.layer1_bias,
            &self.layer2_weights,
            &self.layer2_bias,
        ]
    }
}

/// `relu(points·W₁ + b₁)·W₂ + b₂`
pub fn toy_forward(points: &Matrix, net: &ToyBackbone) -> Result<GradPair<ToyGrads>> {
    if points.cols() != 2 {
        return Err(Error::Shape {
            op: "toy_forward",
            left: points.shape(),
            right: net.layer1_weights.shape(),
        });
    }
    let (h1, mm1) = numgrad::matmul(points, &net.layer1_weights)?.into_parts();
    let (h1b, add1) = numgrad::add_row_bias(&h1, &net.layer1_bias)?.into_parts();
    let (act, relu_pb) = numgrad::relu(&h1b).into_parts();
    let (h2, mm2) = numgrad::matmul(&act, &net.layer2_weights)?.into_parts();
    let (logits, add2) = numgrad::add_row_bias(&h2, &net.layer2_bias)?.into_parts();
    Ok(GradPair::new(logits, move |g| {
        let (g, layer2_bias) = add2(g);
        let (g_act, layer2_weights) = mm2(&g);
        let g = relu_pb(&g_act);
        let (g, layer1_bias) = add1(&g);
        let (_, layer1_weights) = mm1(&g);
        ToyGrads {
            layer1_weights,
            layer1_bias,
            layer2_weights,
            layer2_bias,
        }
    }))
}
