#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "crcnet/stratify.hpp"
#include "crcnet/survival.hpp"

namespace crcnet {

enum class Sex { Male, Female };
enum class Stage { II, III };
enum class PTStage { T1_3, T4 };
enum class PNStage { N0_1, N2 };
enum class Location { Colon, Rectum };
enum class Treatment { None, Chemo, Fu5, Other };
enum class MsiStatus { MSS, MSI_H };
enum class MutationStatus { Wild, Mutated };

// One patient row of the clinical table. Optional fields are missing values;
// stage is required because fold stratification depends on it.
struct Subject {
  std::string patient_id;
  double os_months = 0.0;
  bool os_event = false;
  Stage stage = Stage::II;
  std::optional<double> age;
  std::optional<Sex> sex;
  std::optional<PTStage> pt;
  std::optional<PNStage> pn;
  std::optional<Location> location;
  std::optional<Treatment> treatment;
  std::optional<MsiStatus> msi;
  std::optional<MutationStatus> kras;
  std::optional<MutationStatus> braf;
  std::optional<bool> lymphovascular;
  std::optional<RiskClass> risk_class;

  Observation observation() const { return {os_months, os_event}; }
};

// The documented clinical CSV header, in order.
extern const std::vector<std::string> kClinicalHeader;

struct IngestResult {
  std::vector<Subject> subjects;
  int cell_warnings = 0;   // unparseable optional cells coerced to missing
  int rejected_rows = 0;   // rows lacking os_months/os_event/stage
};

// Reads the clinical CSV (schema in kClinicalHeader). Duplicate patient ids
// and missing required columns are schema errors.
IngestResult ingest_clinical(const std::string& path);

struct FoldAssignment {
  std::map<std::string, int> fold_of;  // patient_id -> 0..k-1
  int k = 0;
};

// Within each disease stage, a seeded shuffle dealt round-robin; per-fold
// per-stage counts differ by at most one.
FoldAssignment stratified_folds(const std::vector<Subject>& subjects, int k = 5,
                                std::uint64_t seed = 0);

// Stage-stratified train/validation split with per-stage sizes within one of
// fraction * n.
std::pair<std::vector<Subject>, std::vector<Subject>> train_validate_split(
    const std::vector<Subject>& subjects, double fraction = 0.8, std::uint64_t seed = 0);

// A model term: either one continuous column or a categorical expanded to
// indicator columns against a reference level. encode() returns the column
// values for a subject, or nullopt when the underlying field is missing.
struct Predictor {
  std::string name;
  std::vector<std::string> levels;  // column labels; one entry per column
  std::string reference;            // "" for continuous terms
  std::function<std::optional<std::vector<double>>(const Subject&)> encode;
};

std::vector<Predictor> table2_predictors();  // univariate set, incl. UICC stage
std::vector<Predictor> table3_predictors();  // multivariate set

struct PredictorSummary {
  std::string name;
  std::vector<std::string> levels;
  std::string reference;
  bool estimable = false;
  std::string note;  // reason when not estimable
  CoxFit fit;        // valid when estimable
  std::size_t n_used = 0;
  // Across-fold held-out concordance (mean and SD over CV folds).
  double cv_c_index_mean = std::numeric_limits<double>::quiet_NaN();
  double cv_c_index_sd = std::numeric_limits<double>::quiet_NaN();
};

// One single-predictor Cox fit per entry, complete-case per predictor, with
// held-out C-index across stage-stratified folds.
std::vector<PredictorSummary> univariate_table(const std::vector<Subject>& subjects,
                                               const std::vector<Predictor>& predictors,
                                               int cv_folds = 5, std::uint64_t seed = 0);

// Joint fit over all predictors (complete-case across the full set).
// Requires at least 10 complete rows per column; collinear columns are
// reported by name.
PredictorSummary multivariate_table(const std::vector<Subject>& subjects,
                                    const std::vector<Predictor>& predictors);

enum class TreatmentFilter { AnyChemo, Fu5Only };

struct ForestRow {
  std::string stratum;  // "all" or a risk class label
  std::size_t n_treated = 0;
  std::size_t n_untreated = 0;
  bool estimable = false;
  std::string note;
  double hr = std::numeric_limits<double>::quiet_NaN();
  double ci_low = std::numeric_limits<double>::quiet_NaN();
  double ci_high = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  double logrank_p = std::numeric_limits<double>::quiet_NaN();
};

// Treated-vs-untreated Cox fit per risk class plus an "all" row; AnyChemo
// pools chemo/5FU/other against none, Fu5Only restricts treated to 5FU.
std::vector<ForestRow> forest_chemo(const std::vector<Subject>& subjects,
                                    TreatmentFilter filter);

using FactorFn = std::function<std::optional<std::string>(const Subject&)>;

struct KMGroupCurve {
  std::string stratum;  // "" when unstratified
  std::string group;
  std::size_t n = 0;
  KMCurve curve;
};

struct KMTest {
  std::string stratum;
  std::string comparison;  // "all" or "groupA|groupB"
  double chi2 = 0.0;
  int df = 0;
  double p = 1.0;
};

struct KMExport {
  std::vector<KMGroupCurve> curves;
  std::vector<KMTest> tests;
  std::vector<std::string> warnings;
};

// One KM curve per (stratum, group) cell plus overall and pairwise log-rank
// tests within each stratum; groups and strata are ordered by label.
KMExport km_export(const std::vector<Subject>& subjects, const FactorFn& group_by,
                   const FactorFn* stratify_by = nullptr);

struct AssociationRow {
  std::string factor;
  bool computed = false;
  std::string note;
  double rho = std::numeric_limits<double>::quiet_NaN();
  double p = std::numeric_limits<double>::quiet_NaN();
  std::size_t n = 0;
};

// Spearman correlation of the ordinal risk class (Low=0, Medium=1, High=2)
// against each established risk factor.
std::vector<AssociationRow> risk_factor_association(const std::vector<Subject>& subjects);

// risk.csv round trip (patient_id -> risk class) and attachment to subjects.
std::map<std::string, RiskClass> read_risk_csv(const std::string& path);
void attach_risk_classes(std::vector<Subject>& subjects,
                         const std::map<std::string, RiskClass>& classes);

// Factor accessors shared by km_export callers.
FactorFn risk_class_factor();
FactorFn stage_factor();
FactorFn pt_factor();
FactorFn pn_factor();
FactorFn msi_factor();

// CSV writers for the analysis products (RFC-4180, LF endings).
void write_univariate_csv(const std::string& path,
                          const std::vector<PredictorSummary>& table);
void write_multivariate_csv(const std::string& path, const PredictorSummary& summary);
void write_forest_csv(const std::string& path,
                      const std::vector<std::pair<std::string, std::vector<ForestRow>>>& blocks);
void write_km_csv(const std::string& path, const KMExport& exp);
void write_km_tests_csv(const std::string& path, const KMExport& exp);
void write_associations_csv(const std::string& path,
                            const std::vector<AssociationRow>& rows);

}  // namespace crcnet
