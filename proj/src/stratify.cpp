#include "crcnet/stratify.hpp"

#include <algorithm>
#include <stdexcept>

namespace crcnet {

std::string_view binary_risk_label(BinaryRisk r) {
  return r == BinaryRisk::HighBin ? "high" : "low";
}

std::string_view risk_class_label(RiskClass c) {
  switch (c) {
    case RiskClass::Low: return "Low";
    case RiskClass::Medium: return "Medium";
    case RiskClass::High: return "High";
  }
  return "Low";
}

std::optional<RiskClass> risk_class_from_label(std::string_view label) {
  if (label == "Low") return RiskClass::Low;
  if (label == "Medium") return RiskClass::Medium;
  if (label == "High") return RiskClass::High;
  return std::nullopt;
}

BinaryRisk binarize(double score, double train_median) {
  return score > train_median ? BinaryRisk::HighBin : BinaryRisk::LowBin;
}

RiskClass ensemble(BinaryRisk tumor, BinaryRisk stroma) {
  const int highs = (tumor == BinaryRisk::HighBin ? 1 : 0) +
                    (stroma == BinaryRisk::HighBin ? 1 : 0);
  if (highs == 2) return RiskClass::High;
  if (highs == 1) return RiskClass::Medium;
  return RiskClass::Low;
}

std::vector<TissueClass> select_top_tissues(
    const std::vector<std::pair<TissueClass, double>>& models, std::size_t k) {
  if (models.size() < k)
    throw std::invalid_argument("fewer models than requested tissues");
  std::vector<std::pair<TissueClass, double>> sorted = models;
  std::sort(sorted.begin(), sorted.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  std::vector<TissueClass> top;
  for (std::size_t i = 0; i < k; ++i) top.push_back(sorted[i].first);
  return top;
}

}  // namespace crcnet
