#pragma once

#include <torch/torch.h>

#include <unistd.h>

#include <atomic>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "unireid/backbone/model_config.h"
#include "unireid/config/run_config.h"
#include "unireid/random.h"

namespace testing {

// Double-precision normal tensor filled from a seeded std RNG, so test inputs
// do not depend on torch's generator.
inline torch::Tensor randn(std::vector<int64_t> shape, std::mt19937_64& rng) {
  auto t = torch::empty(shape, torch::kFloat64);
  auto* p = t.data_ptr<double>();
  for (int64_t i = 0; i < t.numel(); ++i) p[i] = unireid::standard_normal(rng);
  return t;
}

inline std::vector<double> to_vector(const torch::Tensor& t) {
  auto c = t.detach().to(torch::kFloat64).contiguous();
  return {c.data_ptr<double>(), c.data_ptr<double>() + c.numel()};
}

using ScalarFn = std::function<torch::Tensor(const std::vector<torch::Tensor>&)>;

// Largest norm-wise relative error between autograd and central differences
// over all inputs.
inline double gradient_error(const ScalarFn& f, std::vector<torch::Tensor> inputs,
                             double h = 1e-3) {
  for (auto& x : inputs) x = x.detach().clone().set_requires_grad(true);
  auto y = f(inputs);
  auto grads = torch::autograd::grad({y}, inputs, {}, false, false, true);
  double worst = 0.0;
  for (size_t k = 0; k < inputs.size(); ++k) {
    auto base = inputs[k].detach().clone();
    auto numeric = torch::zeros_like(base);
    auto* pn = numeric.data_ptr<double>();
    for (int64_t i = 0; i < base.numel(); ++i) {
      auto eval_at = [&](double delta) {
        auto shifted = inputs;
        auto x = base.clone();
        x.data_ptr<double>()[i] += delta;
        shifted[k] = x;
        torch::NoGradGuard no_grad;
        return f(shifted).item<double>();
      };
      pn[i] = (eval_at(h) - eval_at(-h)) / (2 * h);
    }
    auto analytic = grads[k].defined() ? grads[k] : torch::zeros_like(base);
    const double diff = (analytic - numeric).norm().item<double>();
    const double scale = std::max({analytic.norm().item<double>(),
                                   numeric.norm().item<double>(), 1e-8});
    worst = std::max(worst, diff / scale);
  }
  return worst;
}

inline unireid::ModelConfig tiny_model(int64_t vocab = 40, int64_t identities = 5) {
  unireid::ModelConfig c;
  c.image_height = 32;
  c.image_width = 16;
  c.patch_size = 8;
  c.vis_width = 16;
  c.vis_layers = 1;
  c.vis_heads = 2;
  c.txt_width = 16;
  c.txt_layers = 1;
  c.txt_heads = 2;
  c.joint_dim = 8;
  c.vocab_size = vocab;
  c.max_text_len = 24;
  c.num_identities = identities;
  c.id_tokens = 2;
  c.inst_tokens = 2;
  c.inversion_layers = 1;
  c.mlp_ratio = 2;
  return c;
}

// TOML text of a small end-to-end run.
inline std::string tiny_toml() {
  return R"(
[model]
image_height = 32
image_width = 16
patch_size = 8
vis_width = 16
vis_layers = 1
vis_heads = 2
txt_width = 16
txt_layers = 1
txt_heads = 2
joint_dim = 16
max_text_len = 28
id_tokens = 2
inst_tokens = 2
inversion_layers = 1
mlp_ratio = 2

[data]
identities = 8
images_per_identity = 4
cameras = 2
test_identities = 3
shared_identities = 2
t2i_batch = 4
i2i_batch = 4
instances_per_identity = 2

[stage1]
epochs = 2
lr_inversion = 1e-3

[stage2]
epochs = 3
warmup_epochs = 1
warmup_lr_start = 1e-4
peak_lr = 1e-3
floor_lr = 1e-5
grad_clip = 5.0
prompt_audit_every = 2
)";
}

// Small end-to-end run config rooted in `dir`.
inline unireid::RunConfig tiny_run(const std::filesystem::path& dir, uint64_t seed = 7) {
  return unireid::RunConfig::from_toml_string(
      tiny_toml(), {{"seed", std::to_string(seed)}, {"output.dir", "\"" + dir.string() + "\""}});
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("unireid_" + tag + "_" + std::to_string(::getpid()) + "_" +
             std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace testing
