#include <doctest.h>
#include <torch/torch.h>

#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "helpers.h"
#include "unireid/data/dataset.h"
#include "unireid/data/identity_unification.h"
#include "unireid/data/manifest.h"
#include "unireid/data/png_io.h"
#include "unireid/data/sampler.h"
#include "unireid/data/synthetic.h"
#include "unireid/data/vocabulary.h"
#include "unireid/errors.h"

using namespace unireid;
namespace fs = std::filesystem;

namespace {

SyntheticSpec small_spec(uint64_t seed = 3) {
  SyntheticSpec s;
  s.n_identities = 8;
  s.images_per_identity = 8;
  s.n_cameras = 4;
  s.test_identities = 3;
  s.shared_identities = 2;
  s.seed = seed;
  return s;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::map<std::string, std::string> tree(const fs::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
  }
  return out;
}

DatasetManifest toy_manifest(const std::string& name, int64_t ids, DatasetModality m) {
  DatasetManifest d;
  d.name = name;
  d.modality = m;
  d.image_height = 16;
  d.image_width = 8;
  for (int64_t i = 0; i < ids; ++i) {
    for (int64_t j = 0; j < 2; ++j) {
      ManifestEntry e;
      e.image_path = name + "/" + std::to_string(i) + "_" + std::to_string(j) + ".png";
      e.identity = 100 + i;
      e.camera = j;
      if (m == DatasetModality::kT2I) e.captions = {"a man"};
      d.entries.push_back(e);
    }
  }
  return d;
}

}  // namespace

TEST_SUITE("data") {

TEST_CASE("generator writes counted, faithful, leak-free datasets") {
  testing::TempDir dir("gen");
  auto out = generate_synthetic(small_spec(), dir.path());
  for (const auto& path : {out.t2i_manifest, out.i2i_manifest}) {
    auto m = load_manifest(path);
    CHECK(m.entries.size() == 64);
    std::map<int64_t, int> per_id;
    std::set<std::string> train, test;
    for (const auto& e : m.entries) {
      ++per_id[e.identity];
      CHECK(fs::exists(m.resolve(e)));
      (e.split == Split::kTrain ? train : test).insert(e.image_path);
    }
    CHECK(per_id.size() == 8);
    for (const auto& [id, n] : per_id) CHECK(n == 8);
    for (const auto& p : train) CHECK(test.count(p) == 0);
    CHECK_NOTHROW(m.validate());
  }

  // Every caption names exactly the generating attributes of its image.
  auto m = load_manifest(out.t2i_manifest);
  auto attrs = nlohmann::json::parse(slurp(out.t2i_manifest.parent_path() / "attributes.json"));
  std::map<std::string, nlohmann::json> by_path;
  for (const auto& a : attrs) by_path[a.at("image_path").get<std::string>()] = a;
  for (const auto& e : m.entries) {
    REQUIRE(e.captions.size() == 1);
    const auto& a = by_path.at(e.image_path);
    const auto words = split_words(e.captions[0]);
    auto before = [&](const std::string& word) {
      auto it = std::find(words.begin(), words.end(), word);
      REQUIRE(it != words.end());
      REQUIRE(it != words.begin());
      return *(it - 1);
    };
    CHECK(before("top") == a.at("top_color").get<std::string>());
    CHECK(before("pants") == a.at("bottom_color").get<std::string>());
    CHECK(before("hair") == a.at("hair").get<std::string>());
    int top_words = 0;
    for (size_t i = 0; i + 1 < words.size(); ++i) {
      if (words[i + 1] == "top") ++top_words;
    }
    CHECK(top_words == 1);
  }
}

TEST_CASE("generator is byte-identical for the same spec") {
  testing::TempDir a("gen_a"), b("gen_b"), c("gen_c");
  generate_synthetic(small_spec(5), a.path());
  generate_synthetic(small_spec(5), b.path());
  generate_synthetic(small_spec(6), c.path());
  auto ta = tree(a.path());
  CHECK(ta.size() == 2 * (64 + 2));
  CHECK(ta == tree(b.path()));
  CHECK(ta != tree(c.path()));
}

TEST_CASE("identities are stable across cameras") {
  testing::TempDir dir("attrs");
  auto out = generate_synthetic(small_spec(), dir.path());
  auto attrs = nlohmann::json::parse(slurp(out.i2i_manifest.parent_path() / "attributes.json"));
  auto m = load_manifest(out.i2i_manifest);
  std::map<int64_t, std::string> person;
  for (size_t i = 0; i < m.entries.size(); ++i) {
    const auto& a = attrs.at(i);
    const auto key = a.at("gender").get<std::string>() + a.at("hair").get<std::string>() +
                     a.at("top_color").get<std::string>() + a.at("bottom_color").get<std::string>();
    auto [it, fresh] = person.emplace(m.entries[i].identity, key);
    CHECK(it->second == key);
  }
  std::set<std::string> distinct;
  for (const auto& [id, key] : person) distinct.insert(key);
  CHECK(distinct.size() == person.size());
}

TEST_CASE("synthetic spec validation") {
  auto s = small_spec();
  s.images_per_identity = 3;
  CHECK_THROWS_AS(s.validate(), ConfigError);
  s = small_spec();
  s.n_identities = 1;
  CHECK_THROWS_AS(s.validate(), ConfigError);
}

TEST_CASE("generation into an unwritable location is an I/O error") {
  testing::TempDir dir("blocked");
  const auto file = dir.path() / "file";
  std::ofstream(file) << "x";
  CHECK_THROWS_AS(generate_synthetic(small_spec(), file / "sub"), IoError);
}

TEST_CASE("png round trip") {
  testing::TempDir dir("png");
  RgbImage img{3, 2, {1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 16, 17, 18}};
  write_png(dir.path() / "x.png", img);
  auto back = read_png(dir.path() / "x.png");
  CHECK(back.height == 3);
  CHECK(back.width == 2);
  CHECK(back.pixels == img.pixels);
  CHECK_THROWS_AS(read_png(dir.path() / "missing.png"), IoError);
}

TEST_CASE("manifest json round trip and validation") {
  auto m = toy_manifest("t", 3, DatasetModality::kT2I);
  m.correspondence.push_back({100, "alice"});
  auto back = manifest_from_json(manifest_to_json(m));
  CHECK(manifest_to_json(back) == manifest_to_json(m));

  auto bad = m;
  bad.entries[0].captions.clear();
  CHECK_THROWS_AS(bad.validate(), DataError);
  bad = m;
  auto dup = bad.entries[0];
  dup.split = Split::kGallery;
  bad.entries.push_back(dup);
  CHECK_THROWS_AS(bad.validate(), DataError);
  auto i2i = toy_manifest("i", 2, DatasetModality::kI2I);
  CHECK_NOTHROW(i2i.validate());
  i2i.entries[0].captions = {"x"};
  CHECK_THROWS_AS(i2i.validate(), DataError);
}

TEST_CASE("identity unification") {
  auto a = toy_manifest("a", 10, DatasetModality::kT2I);
  auto b = toy_manifest("b", 10, DatasetModality::kI2I);
  CHECK(unify_identities({a, b}).num_identities == 20);

  for (int64_t i = 0; i < 3; ++i) {
    a.correspondence.push_back({100 + i, "p" + std::to_string(i)});
    b.correspondence.push_back({105 + i, "p" + std::to_string(i)});
  }
  auto u = unify_identities({a, b});
  CHECK(u.num_identities == 17);

  // Brute force: two images share a unified label iff they show the same person.
  struct Item {
    int64_t label;
    std::string person;
  };
  std::vector<Item> items;
  const std::vector<DatasetManifest> src{a, b};
  for (size_t d = 0; d < 2; ++d) {
    std::map<int64_t, std::string> named;
    for (const auto& c : src[d].correspondence) named[c.identity] = c.person;
    for (size_t i = 0; i < src[d].entries.size(); ++i) {
      const auto raw = src[d].entries[i].identity;
      const auto person = named.count(raw) ? named[raw] : src[d].name + std::to_string(raw);
      items.push_back({u.remapped[d].entries[i].identity, person});
      CHECK(u.labels[d].at(raw) == u.remapped[d].entries[i].identity);
    }
  }
  std::set<int64_t> labels;
  for (const auto& x : items) {
    labels.insert(x.label);
    for (const auto& y : items) CHECK((x.label == y.label) == (x.person == y.person));
  }
  CHECK(*labels.begin() == 0);
  CHECK(*labels.rbegin() == 16);

  auto conflict = a;
  conflict.correspondence.push_back({109, "p0"});
  CHECK_THROWS_AS(unify_identities({conflict, b}), DataError);
  auto twice = a;
  twice.correspondence.push_back({100, "p9"});
  CHECK_THROWS_AS(unify_identities({twice, b}), DataError);
}

TEST_CASE("tokenizer") {
  auto vocab = Vocabulary::build({"A red top", "the man, walking"});
  auto id = [&](const char* w) { return *vocab.find(w); };
  CHECK(tokenize("a red top", vocab, 77, TokenizeMode::kTrain) ==
        std::vector<int64_t>{kBosId, id("a"), id("red"), id("top"), kEosId});
  CHECK(tokenize("", vocab, 77, TokenizeMode::kTrain) == std::vector<int64_t>{kBosId, kEosId});

  std::string longer;
  for (int i = 0; i < 100; ++i) longer += "red ";
  auto t = tokenize(longer, vocab, 77, TokenizeMode::kTrain);
  CHECK(t.size() == 77);
  CHECK(t.front() == kBosId);
  CHECK(t.back() == kEosId);

  CHECK_THROWS_AS(tokenize("a zebra", vocab, 77, TokenizeMode::kTrain), DataError);
  CHECK(tokenize("a zebra", vocab, 77, TokenizeMode::kEval) ==
        std::vector<int64_t>{kBosId, id("a"), kPadId, kEosId});
  CHECK(split_words("The MAN,walking.") ==
        std::vector<std::string>{"the", "man", "walking"});
}

TEST_CASE("vocabulary is bijective with reserved specials") {
  auto vocab = Vocabulary::build({"a photo of a person and a bag"});
  std::set<std::string> seen;
  for (int64_t i = 0; i < vocab.size(); ++i) {
    CHECK(seen.insert(vocab.word(i)).second);
    if (i >= kNumSpecialTokens) CHECK(*vocab.find(vocab.word(i)) == i);
  }
  auto t = vocab.prompt_template();
  CHECK(t.photo >= kNumSpecialTokens);
  CHECK(Vocabulary::from_json(vocab.to_json()) == vocab);
}

TEST_CASE("joint batches") {
  testing::TempDir dir("sampler");
  auto out = generate_synthetic(small_spec(), dir.path());
  auto data = load_training_data(out.t2i_manifest, out.i2i_manifest, 40);
  CHECK(data.identities.num_identities == 5 + 5 - 2);
  CHECK(data.t2i_gallery.size() == 24);
  CHECK(data.i2i_query.size() == 12);

  BatchConfig bc;
  bc.t2i_batch = 8;
  bc.i2i_batch = 8;
  bc.instances_per_identity = 4;
  JointBatchSampler s(data.t2i_train, data.i2i_train, bc, 11);
  auto b = s.next();
  CHECK(b.labels.size(0) == 16);
  CHECK(b.views.t2i_size() == 8);
  CHECK(b.token_ids.size(0) == 8);
  CHECK(b.is_t2i.sum().item<int64_t>() == 8);
  std::map<int64_t, int> counts;
  for (int64_t i = 8; i < 16; ++i) ++counts[b.labels[i].item<int64_t>()];
  CHECK(counts.size() == 2);
  for (const auto& [id, n] : counts) CHECK(n == 4);

  JointBatchSampler again(data.t2i_train, data.i2i_train, bc, 11);
  auto b2 = again.next();
  CHECK(b2.t2i_items == b.t2i_items);
  CHECK(b2.i2i_items == b.i2i_items);
  CHECK(torch::equal(b2.token_ids, b.token_ids));

  // State round trip continues the same stream.
  auto state = s.state();
  auto next_a = s.next();
  again.restore(state);
  auto next_b = again.next();
  CHECK(next_a.t2i_items == next_b.t2i_items);
  CHECK(next_a.i2i_items == next_b.i2i_items);
}

TEST_CASE("sampler coverage and PK guarantee over 1000 batches") {
  testing::TempDir dir("coverage");
  auto out = generate_synthetic(small_spec(9), dir.path());
  auto data = load_training_data(out.t2i_manifest, out.i2i_manifest, 40);
  BatchConfig bc;
  bc.t2i_batch = 4;
  bc.i2i_batch = 4;
  bc.instances_per_identity = 2;
  JointBatchSampler s(data.t2i_train, data.i2i_train, bc, 1);
  std::set<int64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    auto b = s.next();
    for (int64_t k = 0; k < b.labels.size(0); ++k) seen.insert(b.labels[k].item<int64_t>());
    std::map<int64_t, int> counts;
    for (int64_t k = 4; k < 8; ++k) ++counts[b.labels[k].item<int64_t>()];
    CHECK(counts.size() >= 2);
    for (const auto& [id, n] : counts) CHECK(n >= 2);
  }
  CHECK(static_cast<int64_t>(seen.size()) == data.identities.num_identities);
}

TEST_CASE("small identities are resampled with a warning") {
  testing::TempDir dir("warn");
  auto out = generate_synthetic(small_spec(), dir.path());
  auto data = load_training_data(out.t2i_manifest, out.i2i_manifest, 40);
  BatchConfig bc;
  bc.t2i_batch = 4;
  bc.i2i_batch = 20;
  bc.instances_per_identity = 10;
  JointBatchSampler s(data.t2i_train, data.i2i_train, bc, 2);
  auto b = s.next();
  CHECK(b.labels.size(0) == 24);
  CHECK_FALSE(s.warnings().empty());
}

TEST_CASE("batch config validation") {
  BatchConfig bc;
  bc.instances_per_identity = 1;
  CHECK_THROWS_AS(bc.validate(), ConfigError);
  bc = BatchConfig{};
  bc.t2i_batch = 1;
  CHECK_THROWS_AS(bc.validate(), ConfigError);
}

}  // TEST_SUITE
