#include "crcnet/tissue.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

#include "crcnet/csv.hpp"
#include "crcnet/errors.hpp"
#include "crcnet/rng.hpp"

namespace crcnet {

namespace {

constexpr std::array<std::string_view, kNumTissueClasses> kCodes = {
    "ADI", "BACK", "DEB", "LYM", "MUC", "MUS", "NORM", "STR", "TUM"};

void check_features(const TileFeatures& f) {
  if (f.size() != kFeatureDim)
    throw std::invalid_argument("tile feature vector must have 256 entries");
}

}  // namespace

std::string_view tissue_code(TissueClass c) { return kCodes[static_cast<std::size_t>(c)]; }

std::optional<TissueClass> tissue_from_code(std::string_view code) {
  for (std::size_t i = 0; i < kCodes.size(); ++i)
    if (kCodes[i] == code) return static_cast<TissueClass>(i);
  return std::nullopt;
}

Classification classify(const TileFeatures& features, const SoftmaxClassifier& model) {
  check_features(features);

  std::array<double, kNumTissueClasses> logits{};
  for (int k = 0; k < kNumTissueClasses; ++k) {
    double z = model.bias[k];
    for (int j = 0; j < kFeatureDim; ++j) z += model.weights(k, j) * features[j];
    logits[k] = z;
  }

  Classification out;
  const double max_logit = *std::max_element(logits.begin(), logits.end());
  double denom = 0.0;
  for (int k = 0; k < kNumTissueClasses; ++k) {
    out.probs[k] = std::exp(logits[k] - max_logit);
    denom += out.probs[k];
  }
  int best = 0;
  for (int k = 0; k < kNumTissueClasses; ++k) {
    out.probs[k] /= denom;
    if (out.probs[k] > out.probs[best]) best = k;  // strict: first class wins ties
  }
  out.label = static_cast<TissueClass>(best);
  return out;
}

double cross_entropy(const LabeledFeatures& data, const SoftmaxClassifier& model,
                     Matrix* grad_w, std::array<double, kNumTissueClasses>* grad_b) {
  if (data.empty()) throw std::invalid_argument("empty training data");
  if (grad_w) *grad_w = Matrix(kNumTissueClasses, kFeatureDim);
  if (grad_b) grad_b->fill(0.0);

  const double inv_n = 1.0 / static_cast<double>(data.size());
  double loss = 0.0;
  for (const auto& [features, label] : data) {
    const auto cls = classify(features, model);
    const int y = static_cast<int>(label);
    loss -= std::log(std::max(cls.probs[y], 1e-300));
    if (grad_w || grad_b) {
      for (int k = 0; k < kNumTissueClasses; ++k) {
        const double delta = (cls.probs[k] - (k == y ? 1.0 : 0.0)) * inv_n;
        if (grad_b) (*grad_b)[k] += delta;
        if (grad_w)
          for (int j = 0; j < kFeatureDim; ++j) (*grad_w)(k, j) += delta * features[j];
      }
    }
  }
  return loss * inv_n;
}

SoftmaxClassifier train_classifier(const LabeledFeatures& data, double lr, int epochs,
                                   std::uint64_t seed) {
  if (data.empty()) throw std::invalid_argument("empty training data");
  std::set<TissueClass> seen;
  for (const auto& [features, label] : data) {
    check_features(features);
    seen.insert(label);
  }
  if (seen.size() < 2) throw std::runtime_error("degenerate labels");

  SoftmaxClassifier model;
  CounterRng rng(seed);
  for (double& w : model.weights.a) w = 0.01 * rng.next_normal();

  Matrix grad_w;
  std::array<double, kNumTissueClasses> grad_b{};
  double loss = cross_entropy(data, model, &grad_w, &grad_b);

  for (int epoch = 0; epoch < epochs; ++epoch) {
    SoftmaxClassifier cand;
    double cand_loss = 0.0;
    bool accepted = false;
    while (lr > 1e-30) {
      cand = model;
      for (std::size_t i = 0; i < cand.weights.a.size(); ++i)
        cand.weights.a[i] -= lr * grad_w.a[i];
      for (int k = 0; k < kNumTissueClasses; ++k) cand.bias[k] -= lr * grad_b[k];
      cand_loss = cross_entropy(data, cand, nullptr, nullptr);
      if (std::isfinite(cand_loss) && cand_loss <= loss) {
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    model = cand;
    loss = cross_entropy(data, model, &grad_w, &grad_b);
  }
  return model;
}

std::map<TileKey, TissueClass> load_tissue_map(const std::string& path) {
  const auto rows = csv::read_file(path);
  std::map<TileKey, TissueClass> map;

  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& row = rows[i];
    const std::size_t line = i + 1;
    if (i == 0 && !row.empty() && row[0] == "slide_id") continue;  // optional header
    if (row.size() != 4)
      throw schema_error("malformed tissue map row at line " + std::to_string(line));
    TileKey key;
    key.slide_id = row[0];
    try {
      key.x = std::stoi(row[1]);
      key.y = std::stoi(row[2]);
    } catch (const std::exception&) {
      throw schema_error("malformed tissue map row at line " + std::to_string(line));
    }
    const auto cls = tissue_from_code(row[3]);
    if (!cls) throw schema_error("unknown tissue class at line " + std::to_string(line));
    if (!map.emplace(key, *cls).second)
      throw schema_error("duplicate tile at line " + std::to_string(line));
  }
  return map;
}

}  // namespace crcnet
