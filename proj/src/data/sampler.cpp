#include "unireid/data/sampler.h"

#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "unireid/errors.h"
#include "unireid/random.h"

namespace unireid {

void BatchConfig::validate() const {
  if (t2i_batch < 2) throw ConfigError("data: t2i_batch must be at least 2");
  if (instances_per_identity < 2) {
    throw ConfigError("data: instances_per_identity must be at least 2");
  }
  if (i2i_batch % instances_per_identity != 0 ||
      i2i_batch / instances_per_identity < 2) {
    throw ConfigError(
        "data: i2i_batch must be a multiple of instances_per_identity covering at "
        "least 2 identities");
  }
}

torch::Tensor pad_token_batch(const std::vector<std::vector<int64_t>>& rows) {
  size_t len = 0;
  for (const auto& r : rows) len = std::max(len, r.size());
  auto out = torch::full({static_cast<int64_t>(rows.size()), static_cast<int64_t>(len)},
                         kPadId, torch::TensorOptions().dtype(torch::kInt64));
  auto acc = out.accessor<int64_t, 2>();
  for (size_t i = 0; i < rows.size(); ++i) {
    for (size_t j = 0; j < rows[i].size(); ++j) {
      acc[static_cast<int64_t>(i)][static_cast<int64_t>(j)] = rows[i][j];
    }
  }
  return out;
}

JointBatchSampler::JointBatchSampler(const ImageSet& t2i, const ImageSet& i2i,
                                     BatchConfig config, uint64_t seed)
    : t2i_(&t2i), i2i_(&i2i), config_(config), rng_(seed) {
  config_.validate();
  if (t2i.size() == 0) throw DataError("the T2I training set is empty");
  if (i2i.size() == 0) throw DataError("the I2I training set is empty");
  for (int64_t i = 0; i < t2i.size(); ++i) {
    if (t2i.tokens.at(static_cast<size_t>(i)).empty()) {
      throw DataError("T2I training image '" + t2i.paths[static_cast<size_t>(i)] +
                      "' has no tokenized caption");
    }
  }
  std::map<int64_t, std::vector<int64_t>> by_identity;
  for (int64_t i = 0; i < i2i.size(); ++i) {
    by_identity[i2i.identities[static_cast<size_t>(i)]].push_back(i);
  }
  if (by_identity.size() < 2) {
    throw DataError("the I2I training set needs at least 2 identities");
  }
  for (auto& [id, items] : by_identity) {
    identity_keys_.push_back(id);
    members_.push_back(std::move(items));
  }
}

int64_t JointBatchSampler::steps_per_epoch() const {
  return (t2i_->size() + config_.t2i_batch - 1) / config_.t2i_batch;
}

int64_t JointBatchSampler::draw_t2i() {
  if (t2i_cursor_ >= t2i_order_.size()) {
    t2i_order_.resize(static_cast<size_t>(t2i_->size()));
    for (size_t i = 0; i < t2i_order_.size(); ++i) t2i_order_[i] = static_cast<int64_t>(i);
    shuffle(t2i_order_, rng_);
    t2i_cursor_ = 0;
  }
  return t2i_order_[t2i_cursor_++];
}

int64_t JointBatchSampler::draw_identity() {
  if (identity_cursor_ >= identity_order_.size()) {
    identity_order_.resize(identity_keys_.size());
    for (size_t i = 0; i < identity_order_.size(); ++i) {
      identity_order_[i] = static_cast<int64_t>(i);
    }
    shuffle(identity_order_, rng_);
    identity_cursor_ = 0;
  }
  return identity_order_[identity_cursor_++];
}

JointBatch JointBatchSampler::next() {
  JointBatch batch;
  std::vector<std::vector<int64_t>> token_rows;
  for (int64_t i = 0; i < config_.t2i_batch; ++i) {
    const auto item = draw_t2i();
    batch.t2i_items.push_back(item);
    const auto& options = t2i_->tokens[static_cast<size_t>(item)];
    token_rows.push_back(options[static_cast<size_t>(
        uniform_int(rng_, static_cast<int64_t>(options.size())))]);
  }

  const int64_t n_ids = config_.i2i_batch / config_.instances_per_identity;
  std::set<int64_t> chosen;
  for (int64_t k = 0; k < n_ids; ++k) {
    int64_t slot = draw_identity();
    // Avoid a repeated identity at an epoch boundary.
    for (size_t guard = 0; chosen.count(slot) != 0 && guard < identity_keys_.size(); ++guard) {
      slot = draw_identity();
    }
    chosen.insert(slot);
    auto pool = members_[static_cast<size_t>(slot)];
    const auto p = static_cast<size_t>(config_.instances_per_identity);
    if (pool.size() >= p) {
      shuffle(pool, rng_);
      batch.i2i_items.insert(batch.i2i_items.end(), pool.begin(), pool.begin() + static_cast<long>(p));
    } else {
      std::ostringstream msg;
      msg << "identity " << identity_keys_[static_cast<size_t>(slot)] << " has "
          << pool.size() << " images, fewer than " << p
          << "; sampling with replacement";
      if (std::find(warnings_.begin(), warnings_.end(), msg.str()) == warnings_.end()) {
        warnings_.push_back(msg.str());
      }
      for (size_t j = 0; j < p; ++j) {
        batch.i2i_items.push_back(
            pool[static_cast<size_t>(uniform_int(rng_, static_cast<int64_t>(pool.size())))]);
      }
    }
  }

  const int64_t n_t2i = config_.t2i_batch;
  const int64_t n_total = n_t2i + static_cast<int64_t>(batch.i2i_items.size());
  auto index_opts = torch::TensorOptions().dtype(torch::kInt64);
  auto t2i_idx = torch::tensor(batch.t2i_items, index_opts);
  auto i2i_idx = torch::tensor(batch.i2i_items, index_opts);
  batch.pixels = torch::cat({t2i_->pixels.index_select(0, t2i_idx),
                             i2i_->pixels.index_select(0, i2i_idx)});

  std::vector<int64_t> labels;
  std::vector<int64_t> cameras;
  for (auto item : batch.t2i_items) {
    labels.push_back(t2i_->identities[static_cast<size_t>(item)]);
    cameras.push_back(t2i_->cameras[static_cast<size_t>(item)]);
  }
  for (auto item : batch.i2i_items) {
    labels.push_back(i2i_->identities[static_cast<size_t>(item)]);
    cameras.push_back(i2i_->cameras[static_cast<size_t>(item)]);
  }
  batch.labels = torch::tensor(labels, index_opts);
  batch.cameras = torch::tensor(cameras, index_opts);
  batch.is_t2i = torch::arange(n_total, index_opts) < n_t2i;
  batch.token_ids = pad_token_batch(token_rows);

  batch.views.batch_size = n_total;
  batch.views.t2i_index = torch::arange(n_t2i, index_opts);
  batch.views.labels = batch.labels;
  batch.views.cameras = batch.cameras;
  return batch;
}

nlohmann::json JointBatchSampler::state() const {
  std::ostringstream rng;
  rng << rng_;
  return {{"rng", rng.str()},
          {"t2i_order", t2i_order_},
          {"t2i_cursor", t2i_cursor_},
          {"identity_order", identity_order_},
          {"identity_cursor", identity_cursor_},
          {"warnings", warnings_}};
}

void JointBatchSampler::restore(const nlohmann::json& state) {
  try {
    std::istringstream rng(state.at("rng").get<std::string>());
    rng >> rng_;
    if (!rng) throw DataError("sampler state holds a corrupt RNG state");
    t2i_order_ = state.at("t2i_order").get<std::vector<int64_t>>();
    t2i_cursor_ = state.at("t2i_cursor").get<size_t>();
    identity_order_ = state.at("identity_order").get<std::vector<int64_t>>();
    identity_cursor_ = state.at("identity_cursor").get<size_t>();
    warnings_ = state.at("warnings").get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed sampler state: ") + ex.what());
  }
}

}  // namespace unireid
