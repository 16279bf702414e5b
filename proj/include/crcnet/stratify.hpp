#pragma once

#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "crcnet/tissue.hpp"

namespace crcnet {

enum class BinaryRisk { LowBin, HighBin };
enum class RiskClass { Low, Medium, High };

std::string_view binary_risk_label(BinaryRisk r);    // "low" / "high"
std::string_view risk_class_label(RiskClass c);      // "Low" / "Medium" / "High"
std::optional<RiskClass> risk_class_from_label(std::string_view label);

// HighBin iff score strictly exceeds the training median; ties go low.
BinaryRisk binarize(double score, double train_median);

// Figure-of-merit fusion of the two tissue calls:
// both high -> High, one high -> Medium, both low -> Low.
RiskClass ensemble(BinaryRisk tumor, BinaryRisk stroma);

// The k tissues with the highest cross-validated C-index; ties resolved by
// tissue enumeration order.
std::vector<TissueClass> select_top_tissues(
    const std::vector<std::pair<TissueClass, double>>& models, std::size_t k = 2);

}  // namespace crcnet
