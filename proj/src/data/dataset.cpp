#include "unireid/data/dataset.h"

#include "unireid/errors.h"

namespace unireid {

torch::Tensor image_to_tensor(const RgbImage& image) {
  auto hwc = torch::from_blob(const_cast<uint8_t*>(image.pixels.data()),
                              {image.height, image.width, 3}, torch::kUInt8);
  return hwc.permute({2, 0, 1}).to(torch::kFloat32).div(255.0).contiguous();
}

ImageSet load_image_set(const DatasetManifest& manifest,
                        const std::function<bool(Split)>& keep) {
  ImageSet set;
  std::vector<torch::Tensor> images;
  for (const auto& e : manifest.entries) {
    if (!keep(e.split)) continue;
    const auto image = read_png(manifest.resolve(e));
    if (image.height != manifest.image_height || image.width != manifest.image_width) {
      throw DataError(manifest.name + ": image '" + e.image_path + "' is " +
                      std::to_string(image.height) + "x" + std::to_string(image.width) +
                      ", manifest declares " + std::to_string(manifest.image_height) +
                      "x" + std::to_string(manifest.image_width));
    }
    images.push_back(image_to_tensor(image));
    set.identities.push_back(e.identity);
    set.cameras.push_back(e.camera);
    set.captions.push_back(e.captions);
    set.paths.push_back(e.image_path);
  }
  set.pixels = images.empty()
                   ? torch::zeros({0, 3, manifest.image_height, manifest.image_width})
                   : torch::stack(images);
  return set;
}

void tokenize_captions(ImageSet& set, const Vocabulary& vocab, int64_t max_len,
                       TokenizeMode mode) {
  set.tokens.clear();
  for (const auto& captions : set.captions) {
    std::vector<std::vector<int64_t>> ids;
    for (const auto& c : captions) ids.push_back(tokenize(c, vocab, max_len, mode));
    set.tokens.push_back(std::move(ids));
  }
}

TrainingData load_training_data(const std::filesystem::path& t2i_manifest,
                                const std::filesystem::path& i2i_manifest,
                                int64_t max_text_len, const Vocabulary* vocab) {
  const auto t2i = load_manifest(t2i_manifest);
  const auto i2i = load_manifest(i2i_manifest);
  if (t2i.modality != DatasetModality::kT2I) {
    throw DataError(t2i_manifest.string() + " is not a T2I manifest");
  }
  if (i2i.modality != DatasetModality::kI2I) {
    throw DataError(i2i_manifest.string() + " is not an I2I manifest");
  }
  if (t2i.image_height != i2i.image_height || t2i.image_width != i2i.image_width) {
    throw DataError("T2I and I2I datasets have different image sizes");
  }

  TrainingData data;
  data.identities = unify_identities({t2i, i2i});
  const auto& t2i_u = data.identities.remapped[0];
  const auto& i2i_u = data.identities.remapped[1];

  const auto is_train = [](Split s) { return s == Split::kTrain; };
  data.t2i_train = load_image_set(t2i_u, is_train);
  data.i2i_train = load_image_set(i2i_u, is_train);
  data.t2i_gallery = load_image_set(t2i_u, [](Split s) { return s != Split::kTrain; });
  data.i2i_query = load_image_set(i2i_u, [](Split s) { return s == Split::kQuery; });
  data.i2i_gallery = load_image_set(i2i_u, [](Split s) { return s == Split::kGallery; });

  if (vocab != nullptr) {
    data.vocab = *vocab;
  } else {
    std::vector<std::string> captions;
    for (const auto& cs : data.t2i_train.captions) {
      captions.insert(captions.end(), cs.begin(), cs.end());
    }
    data.vocab = Vocabulary::build(captions);
  }
  tokenize_captions(data.t2i_train, data.vocab, max_text_len, TokenizeMode::kTrain);
  tokenize_captions(data.t2i_gallery, data.vocab, max_text_len, TokenizeMode::kEval);
  return data;
}

}  // namespace unireid
