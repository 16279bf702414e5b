#pragma once

#include <cstdint>
#include <vector>

#include "crcnet/mil.hpp"
#include "crcnet/survival.hpp"
#include "crcnet/tissue.hpp"

namespace crcnet {

// Column distribution for generated covariates.
struct CovariateSpec {
  enum class Kind { Bernoulli, Normal, Uniform };
  Kind kind = Kind::Bernoulli;
  double a = 0.5;  // Bernoulli p | Normal mu | Uniform lower
  double b = 1.0;  // Normal sigma | Uniform upper
};

// Exponential proportional-hazards cohort: event time ~ Exp(baseline_rate *
// exp(x . beta_true)) against an independent Exp(censor_rate) censoring time.
struct CohortSpec {
  std::size_t n = 0;
  std::vector<double> beta_true;
  double baseline_rate = 0.05;
  double censor_rate = 0.03;
  std::vector<CovariateSpec> covariates;
  std::uint64_t seed = 0;
};

struct SyntheticCohort {
  std::vector<Observation> obs;
  std::vector<CovariateRow> rows;
};

SyntheticCohort generate_cohort(const CohortSpec& spec);

// Tile features i.i.d. standard normal; a patient's hazard is proportional
// to exp(mean tile score under w_true + noise). The generating risk is kept
// for evaluation against trained models.
struct BagSpec {
  std::size_t n_patients = 0;
  std::size_t tiles_min = 1;
  std::size_t tiles_max = 1;
  std::vector<double> w_true;  // length 256
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;
  TissueClass tissue = TissueClass::TUM;
  double baseline_rate = 0.05;
  double censor_rate = 0.015;
};

struct SyntheticBags {
  std::vector<FeatureBag> bags;
  std::vector<Observation> obs;
  std::vector<double> true_risk;
};

SyntheticBags generate_bags(const BagSpec& spec);

struct PartialLikelihoodArgmax {
  double beta = 0.0;
  bool at_boundary = false;  // argmax on the grid edge: monotone likelihood
};

// Independent one-covariate oracle for fit_cox: the Efron partial likelihood
// is evaluated directly (risk sets rebuilt per event time, no Newton steps),
// maximized over the supplied grid and then refined by golden section.
PartialLikelihoodArgmax brute_force_partial_likelihood(
    const std::vector<Observation>& obs, const std::vector<double>& x,
    const std::vector<double>& beta_grid);

}  // namespace crcnet
