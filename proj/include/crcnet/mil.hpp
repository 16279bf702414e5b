#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "crcnet/survival.hpp"
#include "crcnet/tissue.hpp"

namespace crcnet {

// One patient's tile feature matrix for one tissue compartment,
// n_tiles x 256 row-major.
struct FeatureBag {
  std::string patient_id;
  TissueClass tissue = TissueClass::TUM;
  std::size_t n_tiles = 0;
  std::vector<double> features;

  const double* tile(std::size_t i) const { return features.data() + i * kFeatureDim; }
};

// Per-tile affine scorer (one output channel) plus the training-set median
// used as the high/low risk threshold for validation patients.
struct MILModel {
  std::vector<double> w = std::vector<double>(kFeatureDim, 0.0);
  double b = 0.0;
  TissueClass tissue = TissueClass::TUM;
  double train_median = 0.0;
  std::uint64_t seed = 0;
  int epochs = 0;
};

struct RiskScore {
  std::string patient_id;
  TissueClass tissue = TissueClass::TUM;
  double value = 0.0;
};

// s_i = w . f_i + b for every tile of the bag.
std::vector<double> score_tiles(const FeatureBag& bag, const MILModel& model);

// Mean of the 10 highest and 10 lowest tile scores; bags with at most 20
// tiles contribute every score exactly once. Summation runs over the sorted
// scores, so the result is exactly permutation-invariant.
double aggregate(const std::vector<double>& scores);

RiskScore predict_risk(const FeatureBag& bag, const MILModel& model);

// Training objective: negative Efron partial log-likelihood of the
// aggregated risk scores plus lambda * ||w||^2. Gradients treat each step's
// top/bottom selection as fixed.
double mil_loss(const std::vector<FeatureBag>& bags, const std::vector<Observation>& obs,
                const std::vector<double>& w, double b, double lambda,
                std::vector<double>* grad_w = nullptr, double* grad_b = nullptr);

inline constexpr double kMilLambda = 1e-4;

struct MILTrainTrace {
  std::vector<double> loss;  // objective after each accepted epoch
};

// Full-batch gradient descent; the learning rate is halved whenever a step
// would increase the objective, so the recorded loss sequence is
// non-increasing. Bitwise deterministic for a given seed.
MILModel train_mil(const std::vector<FeatureBag>& bags, const std::vector<Observation>& obs,
                   double lr, int epochs, std::uint64_t seed,
                   MILTrainTrace* trace = nullptr);

// FBAG container: "FBAG" magic, u16 version, then per record a
// length-prefixed patient id, tissue code byte, tile count and the raw
// little-endian f32 feature matrix.
void write_feature_bags(const std::string& path, const std::vector<FeatureBag>& bags);
std::vector<FeatureBag> read_feature_bags(const std::string& path);

// Model files are JSON with fields w, b, tissue, train_median, seed, epochs.
void write_mil_model(const std::string& path, const MILModel& model);
MILModel read_mil_model(const std::string& path);

}  // namespace crcnet
