#include "unireid/data/manifest.h"

#include <fstream>
#include <set>

#include "unireid/errors.h"

namespace unireid {
namespace {

Split parse_split(const std::string& s) {
  if (s == "train") return Split::kTrain;
  if (s == "query") return Split::kQuery;
  if (s == "gallery") return Split::kGallery;
  throw DataError("unknown split '" + s + "'");
}

DatasetModality parse_modality(const std::string& s) {
  if (s == "t2i") return DatasetModality::kT2I;
  if (s == "i2i") return DatasetModality::kI2I;
  throw DataError("unknown dataset modality '" + s + "'");
}

}  // namespace

const char* split_name(Split split) {
  switch (split) {
    case Split::kTrain:
      return "train";
    case Split::kQuery:
      return "query";
    case Split::kGallery:
      return "gallery";
  }
  return "train";
}

const char* modality_name(DatasetModality modality) {
  return modality == DatasetModality::kT2I ? "t2i" : "i2i";
}

void DatasetManifest::validate() const {
  std::set<std::string> train_paths;
  std::set<std::string> test_paths;
  for (const auto& e : entries) {
    if (modality == DatasetModality::kT2I && e.split == Split::kTrain &&
        e.captions.empty()) {
      throw DataError(name + ": T2I training image '" + e.image_path +
                      "' has no caption");
    }
    if (modality == DatasetModality::kI2I && !e.captions.empty()) {
      throw DataError(name + ": I2I image '" + e.image_path + "' has captions");
    }
    (e.split == Split::kTrain ? train_paths : test_paths).insert(e.image_path);
  }
  for (const auto& p : train_paths) {
    if (test_paths.count(p) != 0) {
      throw DataError(name + ": image '" + p + "' is in both train and test splits");
    }
  }
}

nlohmann::json manifest_to_json(const DatasetManifest& m) {
  nlohmann::json corr = nlohmann::json::array();
  for (const auto& c : m.correspondence) {
    corr.push_back({{"identity", c.identity}, {"person", c.person}});
  }
  nlohmann::json entries = nlohmann::json::array();
  for (const auto& e : m.entries) {
    entries.push_back({{"image_path", e.image_path},
                       {"identity", e.identity},
                       {"camera", e.camera},
                       {"split", split_name(e.split)},
                       {"captions", e.captions}});
  }
  return {{"meta",
           {{"name", m.name},
            {"modality", modality_name(m.modality)},
            {"image_size", {m.image_height, m.image_width}},
            {"correspondence", corr}}},
          {"entries", entries}};
}

DatasetManifest manifest_from_json(const nlohmann::json& j) {
  DatasetManifest m;
  try {
    const auto& meta = j.at("meta");
    m.name = meta.at("name").get<std::string>();
    m.modality = parse_modality(meta.at("modality").get<std::string>());
    const auto& size = meta.at("image_size");
    m.image_height = size.at(0).get<int64_t>();
    m.image_width = size.at(1).get<int64_t>();
    if (meta.contains("correspondence")) {
      for (const auto& c : meta.at("correspondence")) {
        m.correspondence.push_back(
            {c.at("identity").get<int64_t>(), c.at("person").get<std::string>()});
      }
    }
    for (const auto& e : j.at("entries")) {
      ManifestEntry entry;
      entry.image_path = e.at("image_path").get<std::string>();
      entry.identity = e.at("identity").get<int64_t>();
      entry.camera = e.at("camera").get<int64_t>();
      entry.split = parse_split(e.at("split").get<std::string>());
      if (e.contains("captions")) {
        entry.captions = e.at("captions").get<std::vector<std::string>>();
      }
      m.entries.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& ex) {
    throw DataError(std::string("malformed manifest: ") + ex.what());
  }
  return m;
}

DatasetManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open manifest " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& ex) {
    throw DataError("manifest " + path.string() + " is not valid JSON: " + ex.what());
  }
  auto m = manifest_from_json(j);
  m.base_dir = path.parent_path();
  m.validate();
  return m;
}

void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write manifest " + path.string());
  out << manifest_to_json(manifest).dump(2) << '\n';
  if (!out) throw IoError("failed writing manifest " + path.string());
}

}  // namespace unireid
