#pragma once

#include <cstdint>
#include <filesystem>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "unireid/data/manifest.h"
#include "unireid/data/png_io.h"

namespace unireid {

// Procedural pedestrian benchmark standing in for a paired T2I + I2I
// dataset combination.
struct SyntheticSpec {
  int64_t n_identities = 32;         // per dataset, train + test
  int64_t images_per_identity = 8;
  int64_t n_cameras = 4;
  int64_t test_identities = 16;      // the last ids of each dataset
  int64_t shared_identities = 4;     // train persons present in both datasets

  // Attribute vocabulary sizes. Identity attributes are stable per person;
  // instance attributes are drawn per image.
  int64_t genders = 2;
  int64_t hair_colors = 4;
  int64_t top_colors = 8;
  int64_t bottom_colors = 6;
  int64_t actions = 3;
  int64_t carried_objects = 4;

  int64_t image_height = 64;
  int64_t image_width = 32;
  uint64_t seed = 0;

  void validate() const;
};

void to_json(nlohmann::json& j, const SyntheticSpec& s);

struct PersonAttributes {
  int64_t gender = 0;
  int64_t hair = 0;
  int64_t top = 0;
  int64_t bottom = 0;

  bool operator==(const PersonAttributes&) const = default;
};

struct InstanceAttributes {
  int64_t action = 0;
  int64_t carried_object = 0;
};

// Word tables; sizes in SyntheticSpec select a prefix of each.
struct AttributeWords {
  std::vector<std::string> genders;
  std::vector<std::string> hair_colors;
  std::vector<std::string> top_colors;
  std::vector<std::string> bottom_colors;
  std::vector<std::string> actions;
  std::vector<std::string> carried_objects;
};
const AttributeWords& attribute_words();

// "the <gender> with <hair> hair wearing <top> top and <bottom> pants,
//  <action> and carrying <object>"
std::string render_caption(const PersonAttributes& person,
                           const InstanceAttributes& instance);

// Colour-block pedestrian: identity attributes as body regions, instance
// attributes as pose and a carried-object mark, camera as a global tint,
// plus seeded pixel noise and jitter.
RgbImage render_person(const PersonAttributes& person,
                       const InstanceAttributes& instance, int64_t camera,
                       int64_t height, int64_t width, std::mt19937_64& rng);

struct SyntheticOutput {
  std::filesystem::path t2i_manifest;
  std::filesystem::path i2i_manifest;
};

// Writes <out>/t2i/{manifest.json, attributes.json, images/} and the same
// under <out>/i2i. attributes.json records the generating attributes of
// every image. Deterministic in the spec (including its seed).
SyntheticOutput generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir);

}  // namespace unireid
