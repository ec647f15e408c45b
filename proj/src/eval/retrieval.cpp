#include "unireid/eval/retrieval.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <set>

#include "unireid/backbone/similarity.h"
#include "unireid/data/sampler.h"
#include "unireid/errors.h"

namespace unireid {

nlohmann::json RetrievalResult::to_json() const {
  return {{"task", task},           {"rank1", rank1},         {"rank5", rank5},
          {"rank10", rank10},       {"mAP", mAP},             {"n_queries", n_queries},
          {"n_gallery", n_gallery}, {"skipped", skipped}};
}

double average_precision(const std::vector<int>& relevance) {
  double sum = 0.0;
  int64_t hits = 0;
  for (size_t k = 0; k < relevance.size(); ++k) {
    if (relevance[k] != 0) {
      ++hits;
      sum += static_cast<double>(hits) / static_cast<double>(k + 1);
    }
  }
  if (hits == 0) throw EvaluationError("average precision is undefined without a positive");
  return sum / static_cast<double>(hits);
}

std::vector<int> ranked_relevance(const std::vector<double>& scores,
                                  const std::vector<int64_t>& gallery_ids, int64_t query_id,
                                  const std::vector<bool>& excluded) {
  std::vector<size_t> order(scores.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return scores[a] > scores[b]; });
  std::vector<int> rel;
  rel.reserve(order.size());
  for (const auto g : order) {
    if (!excluded.empty() && excluded[g]) continue;
    rel.push_back(gallery_ids[g] == query_id ? 1 : 0);
  }
  return rel;
}

RetrievalResult evaluate_retrieval(const RetrievalProblem& p) {
  const auto sim = p.similarity.to(torch::kFloat64).contiguous();
  if (sim.dim() != 2) throw InputError("similarity must be a [queries, gallery] matrix");
  const auto nq = sim.size(0);
  const auto ng = sim.size(1);
  if (static_cast<int64_t>(p.query_ids.size()) != nq ||
      static_cast<int64_t>(p.gallery_ids.size()) != ng) {
    throw InputError("identity lists do not match the similarity matrix");
  }
  if (p.camera_filter && (static_cast<int64_t>(p.query_cameras.size()) != nq ||
                          static_cast<int64_t>(p.gallery_cameras.size()) != ng)) {
    throw InputError("camera lists do not match the similarity matrix");
  }
  if (ng == 0) throw EvaluationError("the gallery is empty");

  RetrievalResult r;
  r.task = p.task;
  r.n_gallery = ng;
  const int64_t depth = std::max<int64_t>(ng, 10);
  std::vector<double> hits_at(static_cast<size_t>(depth), 0.0);
  const double* data = sim.data_ptr<double>();
  std::vector<bool> excluded(static_cast<size_t>(ng), false);
  for (int64_t q = 0; q < nq; ++q) {
    std::vector<double> scores(data + q * ng, data + (q + 1) * ng);
    if (p.camera_filter) {
      for (int64_t g = 0; g < ng; ++g) {
        excluded[static_cast<size_t>(g)] =
            p.gallery_ids[static_cast<size_t>(g)] == p.query_ids[static_cast<size_t>(q)] &&
            p.gallery_cameras[static_cast<size_t>(g)] == p.query_cameras[static_cast<size_t>(q)];
      }
    }
    const auto rel = ranked_relevance(scores, p.gallery_ids, p.query_ids[static_cast<size_t>(q)],
                                      p.camera_filter ? excluded : std::vector<bool>{});
    const auto first = std::find(rel.begin(), rel.end(), 1);
    if (first == rel.end()) {
      ++r.skipped;
      continue;
    }
    for (auto k = first - rel.begin(); k < depth; ++k) hits_at[static_cast<size_t>(k)] += 1.0;
    r.ap.push_back(average_precision(rel));
  }
  r.n_queries = static_cast<int64_t>(r.ap.size());
  if (r.n_queries == 0) {
    throw EvaluationError("no " + p.task + " query has a positive gallery item");
  }
  const auto n = static_cast<double>(r.n_queries);
  for (auto& h : hits_at) r.cmc.push_back(h / n);
  r.rank1 = r.cmc[0];
  r.rank5 = r.cmc[4];
  r.rank10 = r.cmc[9];
  r.mAP = std::accumulate(r.ap.begin(), r.ap.end(), 0.0) / n;
  return r;
}

torch::Tensor image_embeddings(UnifiedReidModel& model, const torch::Tensor& pixels,
                               bool i2i_token, int64_t batch_size) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<torch::Tensor> parts;
  for (int64_t s = 0; s < pixels.size(0); s += batch_size) {
    const auto f = model->visual->forward(pixels.slice(0, s, s + batch_size));
    parts.push_back(i2i_token ? f.cls_i2i : f.cls_t2i);
  }
  model->train(was_training);
  return l2_normalize(torch::cat(parts, 0));
}

torch::Tensor caption_embeddings(UnifiedReidModel& model,
                                 const std::vector<std::vector<int64_t>>& tokens,
                                 int64_t batch_size) {
  torch::NoGradGuard no_grad;
  const bool was_training = model->is_training();
  model->eval();
  std::vector<torch::Tensor> parts;
  for (size_t s = 0; s < tokens.size(); s += static_cast<size_t>(batch_size)) {
    const auto end = std::min(tokens.size(), s + static_cast<size_t>(batch_size));
    std::vector<std::vector<int64_t>> rows(tokens.begin() + static_cast<std::ptrdiff_t>(s),
                                           tokens.begin() + static_cast<std::ptrdiff_t>(end));
    parts.push_back(model->text->forward(pad_token_batch(rows)).eos);
  }
  model->train(was_training);
  return l2_normalize(torch::cat(parts, 0));
}

RetrievalResult evaluate_i2i(UnifiedReidModel& model, const ImageSet& query,
                             const ImageSet& gallery, int64_t batch_size) {
  if (query.size() == 0) throw EvaluationError("the I2I query set is empty");
  if (gallery.size() == 0) throw EvaluationError("the I2I gallery is empty");
  RetrievalProblem p;
  const auto q = image_embeddings(model, query.pixels, true, batch_size);
  const auto g = image_embeddings(model, gallery.pixels, true, batch_size);
  p.similarity = torch::matmul(q, g.t());
  p.query_ids = query.identities;
  p.gallery_ids = gallery.identities;
  p.query_cameras = query.cameras;
  p.gallery_cameras = gallery.cameras;
  p.camera_filter = true;
  p.task = "i2i";
  return evaluate_retrieval(p);
}

RetrievalResult evaluate_t2i(UnifiedReidModel& model, const ImageSet& gallery,
                             int64_t batch_size) {
  return evaluate_t2i(model, gallery, gallery, batch_size);
}

RetrievalResult evaluate_t2i(UnifiedReidModel& model, const ImageSet& captions,
                             const ImageSet& gallery, int64_t batch_size) {
  if (gallery.size() == 0) throw EvaluationError("the T2I gallery is empty");
  const std::set<int64_t> known(gallery.identities.begin(), gallery.identities.end());
  std::vector<std::vector<int64_t>> tokens;
  std::vector<int64_t> ids;
  for (int64_t i = 0; i < captions.size(); ++i) {
    const auto id = captions.identities[static_cast<size_t>(i)];
    for (const auto& t : captions.tokens.at(static_cast<size_t>(i))) {
      if (known.count(id) == 0) {
        throw DataError("caption of '" + captions.paths[static_cast<size_t>(i)] +
                        "' references identity " + std::to_string(id) +
                        ", which has no gallery image");
      }
      tokens.push_back(t);
      ids.push_back(id);
    }
  }
  if (tokens.empty()) throw EvaluationError("the T2I query set has no captions");
  RetrievalProblem p;
  const auto q = caption_embeddings(model, tokens, batch_size);
  const auto g = image_embeddings(model, gallery.pixels, false, batch_size);
  p.similarity = torch::matmul(q, g.t());
  p.query_ids = std::move(ids);
  p.gallery_ids = gallery.identities;
  p.task = "t2i";
  return evaluate_retrieval(p);
}

void append_runs_csv(const std::filesystem::path& path, const std::string& run,
                     const std::vector<RetrievalResult>& results) {
  const bool fresh = !std::filesystem::exists(path);
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw IoError("cannot append to " + path.string());
  if (fresh) out << "run,task,rank1,rank5,rank10,mAP,n_queries,n_gallery,skipped\n";
  out << std::setprecision(10);
  for (const auto& r : results) {
    out << run << ',' << r.task << ',' << r.rank1 << ',' << r.rank5 << ',' << r.rank10 << ','
        << r.mAP << ',' << r.n_queries << ',' << r.n_gallery << ',' << r.skipped << '\n';
  }
}

}  // namespace unireid
