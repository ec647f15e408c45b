#pragma once

#include <torch/torch.h>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "unireid/data/dataset.h"
#include "unireid/model.h"

namespace unireid {

struct RetrievalResult {
  std::string task;
  double rank1 = 0.0;
  double rank5 = 0.0;
  double rank10 = 0.0;
  double mAP = 0.0;
  std::vector<double> cmc;  // cmc[k] = fraction of queries matched within rank k+1
  std::vector<double> ap;   // per evaluated query, in query order
  int64_t n_queries = 0;    // evaluated queries
  int64_t n_gallery = 0;
  int64_t skipped = 0;      // queries without any positive after filtering

  nlohmann::json to_json() const;
};

// Mean over positive ranks k of (positives within the first k) / k.
// EvaluationError when there is no positive.
double average_precision(const std::vector<int>& relevance);

// Ranked relevance of one query: gallery sorted by descending score with
// ties kept in gallery order, then excluded items removed.
std::vector<int> ranked_relevance(const std::vector<double>& scores,
                                  const std::vector<int64_t>& gallery_ids,
                                  int64_t query_id,
                                  const std::vector<bool>& excluded = {});

struct RetrievalProblem {
  torch::Tensor similarity;  // [Q, G]
  std::vector<int64_t> query_ids;
  std::vector<int64_t> gallery_ids;
  std::vector<int64_t> query_cameras;    // used only with camera_filter
  std::vector<int64_t> gallery_cameras;
  bool camera_filter = false;  // drop same-identity same-camera gallery items
  std::string task;
};

// CMC and mAP over all queries. Queries left without positives are skipped
// and counted; EvaluationError when every query is skipped.
RetrievalResult evaluate_retrieval(const RetrievalProblem& problem);

// L2-normalized embeddings, computed in eval mode without gradients.
torch::Tensor image_embeddings(UnifiedReidModel& model, const torch::Tensor& pixels,
                               bool i2i_token, int64_t batch_size);
torch::Tensor caption_embeddings(UnifiedReidModel& model,
                                 const std::vector<std::vector<int64_t>>& tokens,
                                 int64_t batch_size);

// I2I: cls_i2i embeddings, cosine ranking, camera-aware filtering.
RetrievalResult evaluate_i2i(UnifiedReidModel& model, const ImageSet& query,
                             const ImageSet& gallery, int64_t batch_size);

// T2I: every caption of the gallery images is a query matched against the
// images' cls_t2i embeddings; no camera filtering. DataError when a
// caption's identity has no gallery image.
RetrievalResult evaluate_t2i(UnifiedReidModel& model, const ImageSet& gallery,
                             int64_t batch_size);
RetrievalResult evaluate_t2i(UnifiedReidModel& model, const ImageSet& captions,
                             const ImageSet& gallery, int64_t batch_size);

// Appends one row per result to a CSV, writing the header for a new file.
void append_runs_csv(const std::filesystem::path& path, const std::string& run,
                     const std::vector<RetrievalResult>& results);

}  // namespace unireid
