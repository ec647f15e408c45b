#include <doctest.h>
#include <torch/torch.h>

#include <cmath>
#include <random>

#include "helpers.h"
#include "oracles.h"
#include "unireid/errors.h"
#include "unireid/objectives/losses.h"

using namespace unireid;
using testing::randn;

namespace {

const auto kF64 = torch::TensorOptions().dtype(torch::kFloat64);
const auto kI64 = torch::TensorOptions().dtype(torch::kInt64);

oracle::Mat rows(const torch::Tensor& t) {
  auto c = t.detach().contiguous();
  oracle::Mat out(static_cast<size_t>(c.size(0)));
  for (int64_t i = 0; i < c.size(0); ++i) out[i] = testing::to_vector(c[i]);
  return out;
}

torch::Tensor labels_of(std::vector<int64_t> v) {
  return torch::tensor(v, kI64);
}

torch::Tensor tau(double v) { return torch::tensor(v, kF64); }

BatchViews views_of(int64_t b, std::vector<int64_t> t2i, std::vector<int64_t> labels) {
  BatchViews v;
  v.batch_size = b;
  v.t2i_index = torch::tensor(t2i, kI64);
  v.labels = labels_of(labels);
  v.cameras = torch::zeros({b}, kI64);
  return v;
}

double val(const torch::Tensor& t) { return t.item<double>(); }

}  // namespace

TEST_SUITE("objectives") {

TEST_CASE("sdm is zero when softmax reproduces the label distribution") {
  const int64_t n = 4;
  auto basis = torch::eye(n, kF64);
  // exp(-1/tau) equals the 1e-8 floor, so each softmax row matches its target.
  const double t = 1.0 / std::log(1e8);
  auto loss = sdm_loss(basis, basis, labels_of({0, 1, 2, 3}), tau(t));
  CHECK(std::abs(val(loss)) < 1e-9);
}

TEST_CASE("sdm is non-negative on random batches") {
  std::mt19937_64 rng(11);
  std::uniform_int_distribution<int64_t> label(0, 2);
  for (int trial = 0; trial < 100; ++trial) {
    std::vector<int64_t> l(6);
    for (auto& x : l) x = label(rng);
    auto loss = sdm_loss(randn({6, 8}, rng), randn({6, 8}, rng), labels_of(l), tau(0.07));
    CHECK(val(loss) >= 0.0);
  }
}

TEST_CASE("sdm hand case matches scalar computation") {
  auto img = torch::tensor({{1.0, 0.0}, {0.6, 0.8}}, kF64);
  auto txt = torch::tensor({{0.8, 0.6}, {0.0, 1.0}}, kF64);
  const double t = 0.5;
  // sims: [[0.8, 0], [0.96, 0.8]]
  const double s[2][2] = {{0.8, 0.0}, {0.96, 0.8}};
  const double q_other = 1e-8 / (1 + 1e-8);
  const double q_self = 1.0 / (1 + 1e-8);
  auto kl_row = [&](double a, double b) {  // a: own-pair logit, b: other
    const double pa = 1.0 / (1.0 + std::exp(b - a));
    const double pb = 1.0 - pa;
    return pa * std::log(pa / q_self) + pb * std::log(pb / q_other);
  };
  const double i2t = 0.5 * (kl_row(s[0][0] / t, s[0][1] / t) + kl_row(s[1][1] / t, s[1][0] / t));
  const double t2i = 0.5 * (kl_row(s[0][0] / t, s[1][0] / t) + kl_row(s[1][1] / t, s[0][1] / t));
  auto loss = sdm_loss(img, txt, labels_of({0, 1}), tau(t));
  CHECK(val(loss) == doctest::Approx(0.5 * (i2t + t2i)).epsilon(1e-12));
}

TEST_CASE("sdm random case matches oracle with repeated identities") {
  std::mt19937_64 rng(3);
  auto img = randn({6, 8}, rng);
  auto txt = randn({6, 8}, rng);
  std::vector<int64_t> l{0, 1, 0, 2, 1, 0};
  auto loss = sdm_loss(img, txt, labels_of(l), tau(0.07));
  CHECK(val(loss) == doctest::Approx(oracle::sdm(rows(img), rows(txt), l, 0.07)).epsilon(1e-10));
}

TEST_CASE("sdm rejects a single sample") {
  auto x = torch::ones({1, 4}, kF64);
  CHECK_THROWS_AS(sdm_loss(x, x, labels_of({0}), tau(0.07)), InputError);
}

TEST_CASE("id loss: uniform logits give ln N") {
  auto loss = identity_loss(torch::zeros({5, 8}, kF64), labels_of({0, 3, 7, 1, 2}));
  CHECK(val(loss) == doctest::Approx(std::log(8.0)).epsilon(1e-12));
}

TEST_CASE("id loss vanishes for confident correct logits") {
  auto logits = torch::zeros({2, 4}, kF64);
  logits[0][1] = 200.0;
  logits[1][3] = 200.0;
  CHECK(val(identity_loss(logits, labels_of({1, 3}))) < 1e-12);
}

TEST_CASE("id loss matches softmax cross-entropy oracle") {
  std::mt19937_64 rng(5);
  auto logits = randn({6, 5}, rng);
  std::vector<int64_t> l{4, 0, 2, 2, 1, 3};
  CHECK(val(identity_loss(logits, labels_of(l))) ==
        doctest::Approx(oracle::mean_cross_entropy(rows(logits), l)).epsilon(1e-12));
}

TEST_CASE("id loss rejects labels outside the class range") {
  CHECK_THROWS_AS(identity_loss(torch::zeros({2, 4}, kF64), labels_of({0, 4})), LabelError);
}

TEST_CASE("t2i identity loss averages the two modalities") {
  std::mt19937_64 rng(6);
  auto a = randn({4, 5}, rng);
  auto b = randn({4, 5}, rng);
  std::vector<int64_t> l{0, 1, 4, 1};
  const double expected = 0.5 * (oracle::mean_cross_entropy(rows(a), l) +
                                 oracle::mean_cross_entropy(rows(b), l));
  CHECK(val(t2i_identity_loss(a, b, labels_of(l))) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("triplet is zero when the margin is satisfied") {
  auto f = torch::tensor({{1.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {0.0, 1.0}}, kF64);
  CHECK(val(triplet_loss(f, labels_of({0, 0, 1, 1}), 0.3)) == 0.0);
}

TEST_CASE("triplet equals the margin when all distances are equal") {
  // Regular tetrahedron on the unit sphere.
  const double c = 1.0 / std::sqrt(3.0);
  auto f = torch::tensor({{c, c, c}, {c, -c, -c}, {-c, c, -c}, {-c, -c, c}}, kF64);
  CHECK(val(triplet_loss(f, labels_of({0, 0, 1, 1}), 0.3)) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("triplet matches exhaustive mining on a 4x4 batch") {
  std::mt19937_64 rng(8);
  std::vector<int64_t> l;
  for (int64_t id = 0; id < 4; ++id) {
    for (int k = 0; k < 4; ++k) l.push_back(id);
  }
  for (int trial = 0; trial < 5; ++trial) {
    auto f = randn({16, 8}, rng);
    CHECK(val(triplet_loss(f, labels_of(l), 0.3)) ==
          doctest::Approx(oracle::triplet(rows(f), l, 0.3)).epsilon(1e-10));
  }
}

TEST_CASE("triplet rejects degenerate PK structure") {
  std::mt19937_64 rng(9);
  auto f = randn({4, 3}, rng);
  CHECK_THROWS_AS(triplet_loss(f, labels_of({0, 0, 0, 0}), 0.3), InputError);
  CHECK_THROWS_AS(triplet_loss(f, labels_of({0, 0, 1, 2}), 0.3), InputError);
}

TEST_CASE("prompt contrastive: equal similarities give ln |B|") {
  auto img = torch::ones({4, 8}, kF64);
  auto refs = torch::ones({4, 8}, kF64);
  auto pc = prompt_contrastive(img, refs, tau(0.07));
  CHECK(val(pc.t2i) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
  CHECK(val(pc.i2t) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
}

TEST_CASE("prompt contrastive vanishes for dominant matching pairs") {
  auto basis = torch::eye(3, kF64);
  auto pc = prompt_contrastive(basis, basis, tau(1e-3));
  CHECK(val(pc.t2i) < 1e-12);
  CHECK(val(pc.i2t) < 1e-12);
}

TEST_CASE("prompt contrastive 3-sample case matches oracle") {
  std::mt19937_64 rng(10);
  auto img = randn({3, 4}, rng);
  auto refs = randn({3, 4}, rng);
  auto pc = prompt_contrastive(img, refs, tau(0.5));
  auto expected = oracle::prompt_contrastive(rows(img), rows(refs), 0.5);
  CHECK(val(pc.t2i) == doctest::Approx(expected.t2i).epsilon(1e-12));
  CHECK(val(pc.i2t) == doctest::Approx(expected.i2t).epsilon(1e-12));
}

TEST_CASE("inversion consistency values") {
  auto views = views_of(1, {0}, {0});
  auto a = torch::tensor({{1.0, 0.0}}, kF64);
  auto b = torch::tensor({{0.5, std::sqrt(3.0) / 2}}, kF64);
  CHECK(std::abs(val(inversion_consistency(a, a, b, b, views))) < 1e-12);
  CHECK(val(inversion_consistency(a, b, a, b, views)) == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("inversion consistency uses separate denominators for B and B_t2i") {
  std::mt19937_64 rng(12);
  auto views = views_of(4, {1, 3}, {0, 1, 2, 3});
  auto vis = randn({4, 8}, rng);
  auto cls = randn({4, 8}, rng);
  auto txt = randn({2, 8}, rng);
  auto eos = randn({2, 8}, rng);
  const double expected = oracle::mean_normalized_sq_dist(rows(vis), rows(cls)) +
                          oracle::mean_normalized_sq_dist(rows(txt), rows(eos));
  CHECK(val(inversion_consistency(vis, cls, txt, eos, views)) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("ilpa values and cross pairing") {
  auto views = views_of(1, {0}, {0});
  auto a = torch::tensor({{1.0, 0.0}}, kF64);
  auto b = torch::tensor({{0.5, std::sqrt(3.0) / 2}}, kF64);
  CHECK(std::abs(val(ilpa_loss(a, a, b, b, views).total)) < 1e-12);
  auto off = ilpa_loss(a, b, a, b, views);
  CHECK(val(off.total) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(val(off.tgps) == doctest::Approx(1.0).epsilon(1e-12));

  std::mt19937_64 rng(13);
  auto v4 = views_of(4, {0, 2}, {0, 1, 2, 3});
  auto txt_prompt = randn({2, 8}, rng);
  auto cls = randn({4, 8}, rng);
  auto vis_prompt = randn({4, 8}, rng);
  auto eos = randn({2, 8}, rng);
  auto cls_rows = rows(cls);
  auto vis_rows = rows(vis_prompt);
  const double tgps = oracle::mean_normalized_sq_dist(rows(txt_prompt), {cls_rows[0], cls_rows[2]});
  const double vgps = oracle::mean_normalized_sq_dist({vis_rows[0], vis_rows[2]}, rows(eos));
  auto r = ilpa_loss(txt_prompt, cls, vis_prompt, eos, v4);
  CHECK(val(r.tgps) == doctest::Approx(tgps).epsilon(1e-12));
  CHECK(val(r.vgps) == doctest::Approx(vgps).epsilon(1e-12));
  CHECK(val(r.total) == doctest::Approx(tgps + vgps).epsilon(1e-12));
}

TEST_CASE("ilpa on an I2I-only batch is zero and flagged") {
  BatchViews v;
  v.batch_size = 3;
  v.labels = labels_of({0, 1, 2});
  auto empty = torch::zeros({0, 4}, kF64);
  auto r = ilpa_loss(empty, torch::ones({3, 4}, kF64), torch::ones({3, 4}, kF64), empty, v);
  CHECK(r.empty);
  CHECK(val(r.total) == 0.0);
}

TEST_CASE("cic values") {
  auto uniform = cic_loss(torch::ones({3, 4}, kF64), torch::ones({10, 4}, kF64),
                          labels_of({0, 5, 9}), tau(0.07), 10);
  CHECK(val(uniform) == doctest::Approx(std::log(10.0)).epsilon(1e-12));

  auto basis = torch::eye(4, kF64);
  CHECK(val(cic_loss(basis, basis, labels_of({0, 1, 2, 3}), tau(1e-3), 4)) < 1e-12);

  std::mt19937_64 rng(14);
  auto feats = randn({6, 8}, rng);
  auto bank = randn({5, 8}, rng);
  std::vector<int64_t> l{0, 4, 2, 2, 1, 3};
  CHECK(val(cic_loss(feats, bank, labels_of(l), tau(0.07), 5)) ==
        doctest::Approx(oracle::cic(rows(feats), rows(bank), l, 0.07)).epsilon(1e-12));
}

TEST_CASE("cic rejects a bank with the wrong row count") {
  CHECK_THROWS_AS(cic_loss(torch::ones({2, 4}, kF64), torch::ones({4, 4}, kF64),
                           labels_of({0, 1}), tau(0.07), 5),
                  ConfigError);
}

TEST_CASE("cmpr values") {
  auto views = views_of(1, {0}, {0});
  auto p = torch::zeros({1, 2, 3}, kF64);
  CHECK(val(cmpr_loss(p, p, views)) == 0.0);
  CHECK(val(cmpr_loss(p + 1.0, p, views)) == doctest::Approx(6.0).epsilon(1e-12));

  std::mt19937_64 rng(15);
  auto v = views_of(3, {0, 1, 2}, {0, 1, 2});
  auto pt = randn({3, 4, 6}, rng);
  auto pv = randn({3, 4, 6}, rng);
  std::vector<oracle::Mat> a, b;
  for (int64_t i = 0; i < 3; ++i) {
    a.push_back(rows(pt[i]));
    b.push_back(rows(pv[i]));
  }
  CHECK(val(cmpr_loss(pt, pv, v)) == doctest::Approx(oracle::cmpr(a, b)).epsilon(1e-12));
}

TEST_CASE("cmpr rejects mismatched token shapes") {
  auto views = views_of(1, {0}, {0});
  CHECK_THROWS_AS(cmpr_loss(torch::zeros({1, 2, 3}, kF64), torch::zeros({1, 3, 3}, kF64), views),
                  ConfigError);
}

TEST_CASE("stage objectives combine their parts") {
  auto s = [](double v) { return torch::tensor(v, kF64); };
  Stage1Parts zero{s(0), s(0), s(0)};
  CHECK(val(stage1_objective(zero)) == 0.0);
  Stage1Parts p1{s(0.5), s(1.25), s(2.0)};
  CHECK(val(stage1_objective(p1)) == doctest::Approx(3.75));

  Stage2Parts p2;
  p2.sdm = s(1.0);
  p2.id_t2i = s(2.0);
  p2.triplet = s(0.5);
  p2.id_i2i = s(3.0);
  p2.cic = s(0.25);
  p2.ilpa = s(2.0);
  p2.cmpr = s(10.0);
  LossWeights w;
  CHECK(val(stage2_objective(p2, w)) == doctest::Approx(6.5 + 0.25 + 0.4 * 2.0 + 0.06 * 10.0));
  w.lambda1 = 0;
  w.lambda2 = 0;
  CHECK(val(stage2_objective(p2, w)) == doctest::Approx(6.75));
  CHECK(val(base_objective(p2)) == doctest::Approx(6.5));
}

TEST_CASE("loss weights validate") {
  LossWeights w;
  CHECK_NOTHROW(w.validate());
  w.lambda1 = -0.1;
  CHECK_THROWS_AS(w.validate(), ConfigError);
  w = LossWeights{};
  w.temperature = 0;
  CHECK_THROWS_AS(w.validate(), ConfigError);
}

TEST_CASE("batch views reject bad subsets") {
  auto v = views_of(3, {0, 0}, {0, 1, 2});
  CHECK_THROWS_AS(v.validate(), InputError);
  v = views_of(3, {3}, {0, 1, 2});
  CHECK_THROWS_AS(v.validate(), InputError);
  v = views_of(4, {2, 0}, {0, 1, 2, 3});
  CHECK_NOTHROW(v.validate());
  CHECK(testing::to_vector(v.i2i_index()) == std::vector<double>{1, 3});
}

TEST_CASE("losses are invariant to batch reordering") {
  std::mt19937_64 rng(16);
  std::vector<int64_t> l{0, 0, 1, 1, 2, 2};
  auto perm = torch::tensor(std::vector<int64_t>{3, 0, 5, 1, 4, 2}, kI64);
  auto lab = labels_of(l);
  auto a = randn({6, 8}, rng);
  auto b = randn({6, 8}, rng);
  auto pa = a.index_select(0, perm);
  auto pb = b.index_select(0, perm);
  auto pl = lab.index_select(0, perm);
  auto close = [](const torch::Tensor& x, const torch::Tensor& y) {
    return std::abs(val(x) - val(y)) < 1e-6;
  };
  CHECK(close(sdm_loss(a, b, lab, tau(0.07)), sdm_loss(pa, pb, pl, tau(0.07))));
  CHECK(close(triplet_loss(a, lab, 0.3), triplet_loss(pa, pl, 0.3)));
  CHECK(close(identity_loss(a.narrow(1, 0, 3), lab), identity_loss(pa.narrow(1, 0, 3), pl)));
  auto pc = prompt_contrastive(a, b, tau(0.07));
  auto ppc = prompt_contrastive(pa, pb, tau(0.07));
  CHECK(close(pc.t2i, ppc.t2i));
  CHECK(close(pc.i2t, ppc.i2t));
  auto bank = randn({3, 8}, rng);
  CHECK(close(cic_loss(a, bank, lab, tau(0.07), 3), cic_loss(pa, bank, pl, tau(0.07), 3)));
  auto all = views_of(6, {0, 1, 2, 3, 4, 5}, l);
  auto pall = all;
  pall.labels = pl;
  CHECK(close(inversion_consistency(a, b, b, a, all), inversion_consistency(pa, pb, pb, pa, pall)));
  CHECK(close(ilpa_loss(a, b, b, a, all).total, ilpa_loss(pa, pb, pb, pa, pall).total));
  auto t3a = a.view({6, 2, 4});
  auto t3b = b.view({6, 2, 4});
  CHECK(close(cmpr_loss(t3a, t3b, all), cmpr_loss(pa.view({6, 2, 4}), pb.view({6, 2, 4}), pall)));
}

TEST_CASE("non-negativity on random inputs") {
  std::mt19937_64 rng(17);
  auto v = views_of(6, {1, 2, 4}, {0, 0, 1, 1, 2, 2});
  for (int trial = 0; trial < 20; ++trial) {
    auto b6 = randn({6, 8}, rng);
    auto c6 = randn({6, 8}, rng);
    auto t3 = randn({3, 8}, rng);
    auto e3 = randn({3, 8}, rng);
    CHECK(val(inversion_consistency(b6, c6, t3, e3, v)) >= 0);
    CHECK(val(ilpa_loss(t3, c6, b6, e3, v).total) >= 0);
    CHECK(val(cmpr_loss(randn({3, 2, 4}, rng), randn({6, 2, 4}, rng), v)) >= 0);
    CHECK(val(triplet_loss(b6, v.labels, 0.3)) >= 0);
  }
}

TEST_CASE("finite-difference gradients for every loss") {
  std::mt19937_64 rng(18);
  const auto v = views_of(6, {0, 2, 3}, {0, 0, 1, 1, 2, 2});
  const auto lab = v.labels;
  const auto lab_t2i = labels_of({0, 1, 1});
  auto t = tau(0.5);
  std::vector<std::pair<std::string, testing::ScalarFn>> cases = {
      {"sdm", [&](const auto& x) { return sdm_loss(x[0], x[1], lab_t2i, x[2]); }},
      {"id", [&](const auto& x) { return identity_loss(x[0], lab); }},
      {"triplet", [&](const auto& x) { return triplet_loss(x[0], lab, 0.3); }},
      {"contrastive",
       [&](const auto& x) {
         auto pc = prompt_contrastive(x[0], x[1], x[2]);
         return pc.t2i + 0.7 * pc.i2t;
       }},
      {"ic", [&](const auto& x) { return inversion_consistency(x[0], x[1], x[2], x[3], v); }},
      {"ilpa", [&](const auto& x) { return ilpa_loss(x[0], x[1], x[2], x[3], v).total; }},
      {"cic", [&](const auto& x) { return cic_loss(x[0], x[1], lab, x[2], 5); }},
      {"cmpr", [&](const auto& x) { return cmpr_loss(x[0], x[1], v); }},
  };
  std::vector<std::vector<torch::Tensor>> inputs = {
      {randn({3, 8}, rng), randn({3, 8}, rng), t},
      {randn({6, 5}, rng)},
      {randn({6, 8}, rng)},
      {randn({6, 8}, rng), randn({6, 8}, rng), t},
      {randn({6, 8}, rng), randn({6, 8}, rng), randn({3, 8}, rng), randn({3, 8}, rng)},
      {randn({3, 8}, rng), randn({6, 8}, rng), randn({6, 8}, rng), randn({3, 8}, rng)},
      {randn({6, 8}, rng), randn({5, 8}, rng), t},
      {randn({3, 2, 8}, rng), randn({6, 2, 8}, rng)},
  };
  for (size_t i = 0; i < cases.size(); ++i) {
    CAPTURE(cases[i].first);
    CHECK(testing::gradient_error(cases[i].second, inputs[i]) < 1e-3);
  }
}

TEST_CASE("subset discipline: I2I-only samples do not reach T2I terms") {
  std::mt19937_64 rng(19);
  const auto v = views_of(6, {1, 4}, {0, 0, 1, 1, 2, 2});
  auto cls = randn({6, 8}, rng);
  auto vis_prompt = randn({6, 8}, rng);
  auto pv = randn({6, 2, 8}, rng);
  auto txt_prompt = randn({2, 8}, rng);
  auto eos = randn({2, 8}, rng);
  auto pt = randn({2, 2, 8}, rng);
  auto t2i_rows = v.t2i_index;
  auto lab_t2i = v.labels.index_select(0, t2i_rows);

  const double sdm0 = val(sdm_loss(cls.index_select(0, t2i_rows), eos, lab_t2i, tau(0.07)));
  const double ilpa0 = val(ilpa_loss(txt_prompt, cls, vis_prompt, eos, v).total);
  const double cmpr0 = val(cmpr_loss(pt, pv, v));
  for (int64_t i2i_row : {0, 2, 3, 5}) {
    auto cls2 = cls.clone();
    auto vis2 = vis_prompt.clone();
    auto pv2 = pv.clone();
    cls2[i2i_row] += randn({8}, rng);
    vis2[i2i_row] += randn({8}, rng);
    pv2[i2i_row] += randn({2, 8}, rng);
    CHECK(val(sdm_loss(cls2.index_select(0, t2i_rows), eos, lab_t2i, tau(0.07))) == sdm0);
    CHECK(val(ilpa_loss(txt_prompt, cls2, vis2, eos, v).total) == ilpa0);
    CHECK(val(cmpr_loss(pt, pv2, v)) == cmpr0);
  }
}

TEST_CASE("class-token routing of the base losses") {
  std::mt19937_64 rng(20);
  // B = 8, B_t2i = {0, 1, 4, 5}; the I2I sub-batch {2, 3, 6, 7} has PK structure.
  const auto v = views_of(8, {0, 1, 4, 5}, {0, 1, 0, 0, 2, 1, 1, 1});
  auto w_t2i = randn({3, 8}, rng);
  auto w_i2i = randn({3, 8}, rng);
  BaseHeads heads;
  heads.t2i_classifier = [&](const torch::Tensor& x) { return x.matmul(w_t2i.t()); };
  heads.i2i_classifier = [&](const torch::Tensor& x) { return x.matmul(w_i2i.t()); };

  auto cls_t2i = randn({8, 8}, rng).set_requires_grad(true);
  auto cls_i2i = randn({8, 8}, rng).set_requires_grad(true);
  auto eos = randn({4, 8}, rng);
  auto parts = base_losses(cls_t2i, cls_i2i, eos, v, heads, tau(0.07), 0.3);

  auto grad_norms = [&](const torch::Tensor& loss) {
    auto g = torch::autograd::grad({loss}, {cls_t2i, cls_i2i}, {}, true, false, true);
    auto norm = [](const torch::Tensor& t) { return t.defined() ? t.abs().max().item<double>() : 0.0; };
    return std::make_pair(norm(g[0]), norm(g[1]));
  };
  auto [sdm_t, sdm_i] = grad_norms(parts.sdm);
  auto [idt_t, idt_i] = grad_norms(parts.id_t2i);
  auto [tri_t, tri_i] = grad_norms(parts.triplet);
  auto [idi_t, idi_i] = grad_norms(parts.id_i2i);
  CHECK(sdm_t > 0);
  CHECK(sdm_i == 0);
  CHECK(idt_t > 0);
  CHECK(idt_i == 0);
  CHECK(tri_i > 0);
  CHECK(tri_t == 0);
  CHECK(idi_i > 0);
  CHECK(idi_t == 0);

  // Numerically: moving the non-owning token leaves the value unchanged.
  auto shifted_i2i = (cls_i2i.detach() + randn({8, 8}, rng));
  auto shifted_t2i = (cls_t2i.detach() + randn({8, 8}, rng));
  auto a = base_losses(cls_t2i.detach(), shifted_i2i, eos, v, heads, tau(0.07), 0.3);
  auto b = base_losses(shifted_t2i, cls_i2i.detach(), eos, v, heads, tau(0.07), 0.3);
  CHECK(val(a.sdm) == val(parts.sdm));
  CHECK(val(a.id_t2i) == val(parts.id_t2i));
  CHECK(val(b.triplet) == val(parts.triplet));
  CHECK(val(b.id_i2i) == val(parts.id_i2i));
}

}  // TEST_SUITE
