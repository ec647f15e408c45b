#include "unireid/backbone/similarity.h"

#include <string>

#include "unireid/errors.h"

namespace unireid {

torch::Tensor l2_normalize(const torch::Tensor& x) {
  auto norms = x.norm(2, {-1}, /*keepdim=*/true);
  if ((norms == 0).any().item<bool>()) {
    throw NumericError("cannot normalize a zero-norm embedding");
  }
  return x / norms;
}

torch::Tensor cosine_sim(const torch::Tensor& a, const torch::Tensor& b) {
  if (a.size(-1) != b.size(-1)) {
    throw ConfigError("cosine_sim: embedding sizes differ (" +
                      std::to_string(a.size(-1)) + " vs " +
                      std::to_string(b.size(-1)) + ")");
  }
  torch::Tensor sim;
  if (a.dim() == 1 && b.dim() == 1) {
    sim = (l2_normalize(a) * l2_normalize(b)).sum();
  } else if (a.dim() == 2 && b.dim() == 2) {
    sim = torch::matmul(l2_normalize(a), l2_normalize(b).t());
  } else {
    throw ConfigError("cosine_sim expects two vectors or two [n, d] batches");
  }
  return sim.clamp(-1.0, 1.0);
}

}  // namespace unireid
