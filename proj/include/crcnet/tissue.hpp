#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crcnet/linalg.hpp"

namespace crcnet {

// The nine tissue classes, in canonical (tie-breaking) order.
enum class TissueClass : std::uint8_t { ADI, BACK, DEB, LYM, MUC, MUS, NORM, STR, TUM };

inline constexpr int kNumTissueClasses = 9;
inline constexpr int kFeatureDim = 256;

std::string_view tissue_code(TissueClass c);
std::optional<TissueClass> tissue_from_code(std::string_view code);

// 256-dim tile descriptor (the feature-file contract).
using TileFeatures = std::vector<double>;

// Linear softmax over tile features; the baseline stand-in for an externally
// produced tissue map.
struct SoftmaxClassifier {
  Matrix weights{kNumTissueClasses, kFeatureDim};
  std::array<double, kNumTissueClasses> bias{};
};

struct Classification {
  TissueClass label = TissueClass::ADI;
  std::array<double, kNumTissueClasses> probs{};
};

using LabeledFeatures = std::vector<std::pair<TileFeatures, TissueClass>>;

Classification classify(const TileFeatures& features, const SoftmaxClassifier& model);

// Mean cross-entropy over the batch with optional analytic gradients.
double cross_entropy(const LabeledFeatures& data, const SoftmaxClassifier& model,
                     Matrix* grad_w = nullptr,
                     std::array<double, kNumTissueClasses>* grad_b = nullptr);

// Full-batch gradient descent on the cross-entropy; the step is re-halved
// whenever the loss would increase, so the final loss never exceeds the
// initial one. Deterministic per seed.
SoftmaxClassifier train_classifier(const LabeledFeatures& data, double lr,
                                   int epochs, std::uint64_t seed);

struct TileKey {
  std::string slide_id;
  int x = 0;
  int y = 0;
  auto operator<=>(const TileKey&) const = default;
};

// Reads a tissue map CSV (slide_id,tile_x,tile_y,class); duplicate tiles and
// unknown class codes are rejected.
std::map<TileKey, TissueClass> load_tissue_map(const std::string& path);

}  // namespace crcnet
