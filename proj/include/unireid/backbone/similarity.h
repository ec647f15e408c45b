#pragma once

#include <torch/torch.h>

namespace unireid {

// Row-wise L2 normalization along the last dimension. A zero-norm row raises
// NumericError; no epsilon is added.
torch::Tensor l2_normalize(const torch::Tensor& x);

// Cosine similarity. Two vectors give a scalar; two [n, d] / [m, d] batches
// give the [n, m] pairwise matrix.
torch::Tensor cosine_sim(const torch::Tensor& a, const torch::Tensor& b);

}  // namespace unireid
