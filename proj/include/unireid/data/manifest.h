#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace unireid {

enum class Split { kTrain, kQuery, kGallery };
enum class DatasetModality { kT2I, kI2I };

const char* split_name(Split split);
const char* modality_name(DatasetModality modality);

struct ManifestEntry {
  std::string image_path;  // relative to the manifest directory
  int64_t identity = 0;    // raw id within this dataset
  int64_t camera = 0;
  Split split = Split::kTrain;
  std::vector<std::string> captions;
};

// Declares that a raw id of this dataset is the named person, so the same
// person in different datasets receives one unified label.
struct PersonCorrespondence {
  int64_t identity = 0;
  std::string person;
};

struct DatasetManifest {
  std::string name;
  DatasetModality modality = DatasetModality::kT2I;
  int64_t image_height = 0;
  int64_t image_width = 0;
  std::vector<PersonCorrespondence> correspondence;
  std::vector<ManifestEntry> entries;

  // Directory the relative image paths resolve against; not serialized.
  std::filesystem::path base_dir;

  // DataError when T2I train entries lack captions, I2I entries carry
  // captions, or an image path is in both train and test splits.
  void validate() const;

  std::filesystem::path resolve(const ManifestEntry& entry) const {
    return base_dir / entry.image_path;
  }
};

nlohmann::json manifest_to_json(const DatasetManifest& manifest);
DatasetManifest manifest_from_json(const nlohmann::json& j);

DatasetManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const DatasetManifest& manifest,
                   const std::filesystem::path& path);

}  // namespace unireid
