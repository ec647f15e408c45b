#include "unireid/data/synthetic.h"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>

#include "unireid/errors.h"
#include "unireid/random.h"

namespace unireid {
namespace {

using Color = std::array<float, 3>;

const std::map<std::string, Color>& color_table() {
  static const std::map<std::string, Color> table = {
      {"red", {0.85f, 0.10f, 0.10f}},    {"green", {0.10f, 0.65f, 0.15f}},
      {"blue", {0.10f, 0.20f, 0.85f}},   {"yellow", {0.95f, 0.85f, 0.10f}},
      {"black", {0.08f, 0.08f, 0.08f}},  {"white", {0.95f, 0.95f, 0.95f}},
      {"purple", {0.55f, 0.15f, 0.70f}}, {"orange", {0.95f, 0.50f, 0.05f}},
      {"pink", {0.95f, 0.55f, 0.70f}},   {"cyan", {0.10f, 0.80f, 0.85f}},
      {"gray", {0.50f, 0.50f, 0.50f}},   {"brown", {0.45f, 0.28f, 0.12f}},
      {"blonde", {0.90f, 0.80f, 0.45f}},
  };
  return table;
}

const Color kSkin = {0.87f, 0.70f, 0.58f};

// Per-camera background and multiplicative tint.
const std::array<Color, 8> kBackgrounds = {{{0.55f, 0.60f, 0.55f},
                                            {0.62f, 0.56f, 0.50f},
                                            {0.50f, 0.55f, 0.63f},
                                            {0.63f, 0.63f, 0.58f},
                                            {0.45f, 0.50f, 0.45f},
                                            {0.70f, 0.66f, 0.62f},
                                            {0.52f, 0.48f, 0.55f},
                                            {0.58f, 0.62f, 0.66f}}};
const std::array<Color, 8> kTints = {{{1.00f, 1.00f, 1.00f},
                                      {1.10f, 0.96f, 0.88f},
                                      {0.90f, 1.00f, 1.10f},
                                      {0.96f, 1.06f, 0.94f},
                                      {1.06f, 1.06f, 0.90f},
                                      {0.92f, 0.94f, 1.04f},
                                      {1.04f, 0.90f, 1.02f},
                                      {0.95f, 1.00f, 0.95f}}};

const Color& lookup_color(const std::string& name) { return color_table().at(name); }

class Canvas {
 public:
  Canvas(int64_t h, int64_t w, const Color& fill)
      : h_(h), w_(w), rgb_(static_cast<size_t>(h * w * 3)) {
    for (int64_t i = 0; i < h * w; ++i) {
      for (int c = 0; c < 3; ++c) rgb_[static_cast<size_t>(i * 3 + c)] = fill[c];
    }
  }

  // Half-open rectangle in pixel coordinates, clipped to the canvas.
  void fill(double y0, double y1, double x0, double x1, const Color& color) {
    const auto r0 = std::clamp<int64_t>(std::lround(y0), 0, h_);
    const auto r1 = std::clamp<int64_t>(std::lround(y1), 0, h_);
    const auto c0 = std::clamp<int64_t>(std::lround(x0), 0, w_);
    const auto c1 = std::clamp<int64_t>(std::lround(x1), 0, w_);
    for (int64_t r = r0; r < r1; ++r) {
      for (int64_t c = c0; c < c1; ++c) {
        for (int k = 0; k < 3; ++k) {
          rgb_[static_cast<size_t>((r * w_ + c) * 3 + k)] = color[k];
        }
      }
    }
  }

  RgbImage finish(const Color& tint, double brightness, double noise_sigma,
                  std::mt19937_64& rng) const {
    RgbImage img;
    img.height = h_;
    img.width = w_;
    img.pixels.resize(rgb_.size());
    for (size_t i = 0; i < rgb_.size(); ++i) {
      double v = rgb_[i] * tint[i % 3] * brightness +
                 noise_sigma * standard_normal(rng);
      v = std::clamp(v, 0.0, 1.0);
      img.pixels[i] = static_cast<uint8_t>(std::lround(v * 255.0));
    }
    return img;
  }

 private:
  int64_t h_;
  int64_t w_;
  std::vector<float> rgb_;
};

std::vector<PersonAttributes> all_people(const SyntheticSpec& spec) {
  std::vector<PersonAttributes> people;
  for (int64_t g = 0; g < spec.genders; ++g)
    for (int64_t h = 0; h < spec.hair_colors; ++h)
      for (int64_t t = 0; t < spec.top_colors; ++t)
        for (int64_t b = 0; b < spec.bottom_colors; ++b) people.push_back({g, h, t, b});
  return people;
}

// Picks `count` distinct people so that every attribute value is used as
// evenly as possible along the list: each pick minimizes the summed usage of
// its values, ties going to the earlier candidate of a seeded shuffle.
std::vector<PersonAttributes> balanced_people(const SyntheticSpec& spec, int64_t count,
                                              std::mt19937_64& rng) {
  auto candidates = all_people(spec);
  shuffle(candidates, rng);
  std::vector<std::vector<int64_t>> used = {
      std::vector<int64_t>(static_cast<size_t>(spec.genders)),
      std::vector<int64_t>(static_cast<size_t>(spec.hair_colors)),
      std::vector<int64_t>(static_cast<size_t>(spec.top_colors)),
      std::vector<int64_t>(static_cast<size_t>(spec.bottom_colors))};
  const auto values = [](const PersonAttributes& p) {
    return std::array<int64_t, 4>{p.gender, p.hair, p.top, p.bottom};
  };
  std::vector<PersonAttributes> out;
  std::vector<bool> taken(candidates.size(), false);
  for (int64_t k = 0; k < count; ++k) {
    size_t best = candidates.size();
    int64_t best_cost = 0;
    for (size_t c = 0; c < candidates.size(); ++c) {
      if (taken[c]) continue;
      const auto v = values(candidates[c]);
      int64_t cost = 0;
      for (size_t a = 0; a < v.size(); ++a) cost += used[a][static_cast<size_t>(v[a])];
      if (best == candidates.size() || cost < best_cost) {
        best = c;
        best_cost = cost;
      }
    }
    taken[best] = true;
    const auto v = values(candidates[best]);
    for (size_t a = 0; a < v.size(); ++a) ++used[a][static_cast<size_t>(v[a])];
    out.push_back(candidates[best]);
  }
  return out;
}

std::string image_name(int64_t identity, int64_t index) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "images/%04lld_%02lld.png",
                static_cast<long long>(identity), static_cast<long long>(index));
  return buf;
}

}  // namespace

void SyntheticSpec::validate() const {
  auto require = [](bool ok, const std::string& msg) {
    if (!ok) throw ConfigError("synthetic: " + msg);
  };
  const auto& words = attribute_words();
  require(n_identities >= 2, "n_identities must be at least 2");
  require(images_per_identity >= 4, "images_per_identity must be at least 4");
  require(n_cameras >= 1, "n_cameras must be positive");
  require(test_identities >= 0 && test_identities < n_identities - 1,
          "test_identities must leave at least 2 training identities");
  require(shared_identities >= 0 && shared_identities <= n_identities - test_identities,
          "shared_identities must not exceed the training identities");
  require(genders >= 1 && genders <= static_cast<int64_t>(words.genders.size()),
          "genders out of range");
  require(hair_colors >= 1 && hair_colors <= static_cast<int64_t>(words.hair_colors.size()),
          "hair_colors out of range");
  require(top_colors >= 1 && top_colors <= static_cast<int64_t>(words.top_colors.size()),
          "top_colors out of range");
  require(bottom_colors >= 1 &&
              bottom_colors <= static_cast<int64_t>(words.bottom_colors.size()),
          "bottom_colors out of range");
  require(actions >= 1 && actions <= static_cast<int64_t>(words.actions.size()),
          "actions out of range");
  require(carried_objects >= 1 &&
              carried_objects <= static_cast<int64_t>(words.carried_objects.size()),
          "carried_objects out of range");
  require(image_height >= 16 && image_width >= 8, "image is too small to render");
  const int64_t combos = genders * hair_colors * top_colors * bottom_colors;
  require(combos >= 2 * n_identities - shared_identities,
          "attribute vocabularies allow only " + std::to_string(combos) +
              " distinct people");
}

void to_json(nlohmann::json& j, const SyntheticSpec& s) {
  j = nlohmann::json{{"identities", s.n_identities},
                     {"images_per_identity", s.images_per_identity},
                     {"cameras", s.n_cameras},
                     {"test_identities", s.test_identities},
                     {"shared_identities", s.shared_identities},
                     {"genders", s.genders},
                     {"hair_colors", s.hair_colors},
                     {"top_colors", s.top_colors},
                     {"bottom_colors", s.bottom_colors},
                     {"actions", s.actions},
                     {"carried_objects", s.carried_objects},
                     {"image_height", s.image_height},
                     {"image_width", s.image_width},
                     {"seed", s.seed}};
}

const AttributeWords& attribute_words() {
  static const AttributeWords words = {
      {"man", "woman"},
      {"black", "brown", "blonde", "gray", "red", "white"},
      {"red", "green", "blue", "yellow", "black", "white", "purple", "orange",
       "pink", "cyan", "gray", "brown"},
      {"black", "blue", "gray", "brown", "white", "green", "red", "yellow"},
      {"standing", "walking", "running"},
      {"a bag", "an umbrella", "a phone", "nothing"},
  };
  return words;
}

std::string render_caption(const PersonAttributes& p, const InstanceAttributes& inst) {
  const auto& w = attribute_words();
  const auto at = [](const std::vector<std::string>& v, int64_t i) -> const std::string& {
    return v.at(static_cast<size_t>(i));
  };
  return "the " + at(w.genders, p.gender) + " with " + at(w.hair_colors, p.hair) +
         " hair wearing " + at(w.top_colors, p.top) + " top and " +
         at(w.bottom_colors, p.bottom) + " pants, " + at(w.actions, inst.action) +
         " and carrying " + at(w.carried_objects, inst.carried_object);
}

RgbImage render_person(const PersonAttributes& p, const InstanceAttributes& inst,
                       int64_t camera, int64_t height, int64_t width,
                       std::mt19937_64& rng) {
  const auto& words = attribute_words();
  const double h = static_cast<double>(height);
  const double w = static_cast<double>(width);
  const auto cam = static_cast<size_t>(camera % 8);

  Canvas canvas(height, width, kBackgrounds[cam]);
  const double cx = w / 2.0 + (uniform01(rng) * 4.0 - 2.0) * (w / 32.0);
  const double dy = (uniform01(rng) * 2.0 - 1.0) * (h / 64.0);
  auto y = [&](double f) { return f * h + dy; };

  const Color& hair = lookup_color(words.hair_colors.at(static_cast<size_t>(p.hair)));
  const Color& top = lookup_color(words.top_colors.at(static_cast<size_t>(p.top)));
  const Color& bottom = lookup_color(words.bottom_colors.at(static_cast<size_t>(p.bottom)));
  const bool woman = p.gender == 1;

  // Head and hair; long hair frames the face.
  if (woman) canvas.fill(y(0.05), y(0.27), cx - 0.20 * w, cx + 0.20 * w, hair);
  canvas.fill(y(0.05), y(0.20), cx - 0.16 * w, cx + 0.16 * w, kSkin);
  canvas.fill(y(0.05), y(0.11), cx - 0.16 * w, cx + 0.16 * w, hair);

  // Torso.
  const double torso = woman ? 0.22 * w : 0.28 * w;
  canvas.fill(y(0.21), y(0.55), cx - torso, cx + torso, top);

  // Legs; the gap encodes the action.
  const double gaps[] = {0.03, 0.10, 0.17};
  const double gap = gaps[inst.action % 3] * w;
  const double leg = 0.15 * w;
  const double leg_end = inst.action == 2 ? 0.89 : 0.93;
  canvas.fill(y(0.55), y(leg_end), cx - gap - leg, cx - gap, bottom);
  canvas.fill(y(0.55), y(leg_end), cx + gap, cx + gap + leg, bottom);

  // Carried object.
  switch (inst.carried_object) {
    case 0:  // bag
      canvas.fill(y(0.38), y(0.54), cx + torso, cx + torso + 0.14 * w,
                  {0.45f, 0.30f, 0.15f});
      break;
    case 1:  // umbrella
      canvas.fill(y(0.0), y(0.04), cx - 0.35 * w, cx + 0.35 * w, {0.20f, 0.10f, 0.30f});
      canvas.fill(y(0.04), y(0.45), cx + 0.28 * w, cx + 0.33 * w, {0.20f, 0.10f, 0.30f});
      break;
    case 2:  // phone
      canvas.fill(y(0.13), y(0.19), cx + 0.17 * w, cx + 0.26 * w, {0.05f, 0.05f, 0.10f});
      break;
    default:
      break;
  }

  const double brightness = 0.92 + 0.16 * uniform01(rng);
  return canvas.finish(kTints[cam], brightness, 0.03, rng);
}

SyntheticOutput generate_synthetic(const SyntheticSpec& spec,
                                   const std::filesystem::path& out_dir) {
  spec.validate();
  std::mt19937_64 rng(derive_seed(spec.seed, "people"));
  const auto people =
      balanced_people(spec, 2 * spec.n_identities - spec.shared_identities, rng);

  const int64_t n = spec.n_identities;
  const int64_t n_train = n - spec.test_identities;
  const auto person_of = [&](DatasetModality modality, int64_t raw) -> int64_t {
    if (modality == DatasetModality::kT2I || raw < spec.shared_identities) return raw;
    return n + raw - spec.shared_identities;
  };

  SyntheticOutput output;
  for (const auto modality : {DatasetModality::kT2I, DatasetModality::kI2I}) {
    const std::string name = modality_name(modality);
    const auto dir = out_dir / name;
    std::error_code ec;
    std::filesystem::create_directories(dir / "images", ec);
    if (ec) throw IoError("cannot create " + (dir / "images").string() + ": " + ec.message());

    DatasetManifest manifest;
    manifest.name = "synthetic_" + name;
    manifest.modality = modality;
    manifest.image_height = spec.image_height;
    manifest.image_width = spec.image_width;
    manifest.base_dir = dir;
    for (int64_t r = 0; r < spec.shared_identities; ++r) {
      manifest.correspondence.push_back({r, "person_" + std::to_string(r)});
    }

    nlohmann::json attributes = nlohmann::json::array();
    const auto& words = attribute_words();
    for (int64_t raw = 0; raw < n; ++raw) {
      const auto& person = people.at(static_cast<size_t>(person_of(modality, raw)));
      for (int64_t j = 0; j < spec.images_per_identity; ++j) {
        std::mt19937_64 image_rng(derive_seed(
            spec.seed, name + "/" + std::to_string(raw) + "/" + std::to_string(j)));
        InstanceAttributes inst;
        inst.action = uniform_int(image_rng, spec.actions);
        inst.carried_object = uniform_int(image_rng, spec.carried_objects);

        ManifestEntry entry;
        entry.image_path = image_name(raw, j);
        entry.identity = raw;
        entry.camera = j % spec.n_cameras;
        if (raw < n_train) {
          entry.split = Split::kTrain;
        } else if (modality == DatasetModality::kT2I) {
          entry.split = Split::kGallery;
        } else {
          entry.split = j < spec.n_cameras ? Split::kQuery : Split::kGallery;
        }
        if (modality == DatasetModality::kT2I) {
          entry.captions.push_back(render_caption(person, inst));
        }

        const auto image = render_person(person, inst, entry.camera, spec.image_height,
                                         spec.image_width, image_rng);
        write_png(dir / entry.image_path, image);

        attributes.push_back(
            {{"image_path", entry.image_path},
             {"gender", words.genders.at(static_cast<size_t>(person.gender))},
             {"hair", words.hair_colors.at(static_cast<size_t>(person.hair))},
             {"top_color", words.top_colors.at(static_cast<size_t>(person.top))},
             {"bottom_color", words.bottom_colors.at(static_cast<size_t>(person.bottom))},
             {"action", words.actions.at(static_cast<size_t>(inst.action))},
             {"carried_object",
              words.carried_objects.at(static_cast<size_t>(inst.carried_object))}});
        manifest.entries.push_back(std::move(entry));
      }
    }
    manifest.validate();
    save_manifest(manifest, dir / "manifest.json");
    std::ofstream attr_out(dir / "attributes.json", std::ios::binary);
    if (!attr_out) throw IoError("cannot write " + (dir / "attributes.json").string());
    attr_out << attributes.dump(2) << '\n';

    (modality == DatasetModality::kT2I ? output.t2i_manifest : output.i2i_manifest) =
        dir / "manifest.json";
  }
  return output;
}

}  // namespace unireid
