#include "crcnet/cohort.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <set>
#include <stdexcept>

#include "crcnet/csv.hpp"
#include "crcnet/errors.hpp"
#include "crcnet/rng.hpp"

namespace crcnet {

const std::vector<std::string> kClinicalHeader = {
    "patient_id", "os_months", "os_event", "age",  "sex",
    "stage",      "pT",        "pN",       "location", "treatment",
    "msi",        "kras",      "braf",     "lymphovascular"};

namespace {

bool is_missing(const std::string& cell) { return cell.empty() || cell == "NA"; }

std::optional<double> parse_double(const std::string& cell) {
  try {
    std::size_t pos = 0;
    const double v = std::stod(cell, &pos);
    if (pos != cell.size() || !std::isfinite(v)) return std::nullopt;
    return v;
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<bool> parse_event(const std::string& cell) {
  if (cell == "1" || cell == "true") return true;
  if (cell == "0" || cell == "false") return false;
  return std::nullopt;
}

std::string fmt(double v) {
  if (std::isnan(v)) return "";
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

}  // namespace

IngestResult ingest_clinical(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw schema_error(path + ": empty clinical file");

  const auto& header = rows[0];
  for (std::size_t i = 0; i < kClinicalHeader.size(); ++i) {
    if (i >= header.size() || header[i] != kClinicalHeader[i])
      throw schema_error(path + ": missing or misplaced column '" + kClinicalHeader[i] + "'");
  }
  if (header.size() != kClinicalHeader.size())
    throw schema_error(path + ": unexpected extra column '" + header[kClinicalHeader.size()] + "'");

  IngestResult result;
  std::set<std::string> seen_ids;

  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;  // trailing blank line
    if (row.size() != kClinicalHeader.size())
      throw schema_error(path + ": wrong field count at line " + std::to_string(r + 1));

    Subject s;
    s.patient_id = row[0];
    if (s.patient_id.empty()) {
      ++result.rejected_rows;
      continue;
    }
    if (!seen_ids.insert(s.patient_id).second)
      throw schema_error(path + ": duplicate patient '" + s.patient_id + "'");

    const auto os_months = parse_double(row[1]);
    const auto os_event = parse_event(row[2]);
    if (!os_months || *os_months < 0.0 || !os_event) {
      ++result.rejected_rows;
      continue;
    }
    s.os_months = *os_months;
    s.os_event = *os_event;

    if (row[5] == "II") s.stage = Stage::II;
    else if (row[5] == "III") s.stage = Stage::III;
    else {
      ++result.rejected_rows;  // stage is required for stratification
      continue;
    }

    auto warn = [&result] { ++result.cell_warnings; };

    if (!is_missing(row[3])) {
      if (const auto age = parse_double(row[3])) s.age = *age;
      else warn();
    }
    if (!is_missing(row[4])) {
      if (row[4] == "M") s.sex = Sex::Male;
      else if (row[4] == "F") s.sex = Sex::Female;
      else warn();
    }
    if (!is_missing(row[6])) {
      if (row[6] == "T1_3") s.pt = PTStage::T1_3;
      else if (row[6] == "T4") s.pt = PTStage::T4;
      else warn();
    }
    if (!is_missing(row[7])) {
      if (row[7] == "N0_1") s.pn = PNStage::N0_1;
      else if (row[7] == "N2") s.pn = PNStage::N2;
      else warn();
    }
    if (!is_missing(row[8])) {
      if (row[8] == "colon") s.location = Location::Colon;
      else if (row[8] == "rectum") s.location = Location::Rectum;
      else warn();
    }
    if (!is_missing(row[9])) {
      if (row[9] == "none") s.treatment = Treatment::None;
      else if (row[9] == "chemo") s.treatment = Treatment::Chemo;
      else if (row[9] == "fu5") s.treatment = Treatment::Fu5;
      else if (row[9] == "other") s.treatment = Treatment::Other;
      else warn();
    }
    if (!is_missing(row[10])) {
      if (row[10] == "MSI_H") s.msi = MsiStatus::MSI_H;
      else if (row[10] == "MSS") s.msi = MsiStatus::MSS;
      else warn();
    }
    auto parse_mutation = [&](const std::string& cell) -> std::optional<MutationStatus> {
      if (cell == "wild") return MutationStatus::Wild;
      if (cell == "mutated") return MutationStatus::Mutated;
      warn();
      return std::nullopt;
    };
    if (!is_missing(row[11])) s.kras = parse_mutation(row[11]);
    if (!is_missing(row[12])) s.braf = parse_mutation(row[12]);
    if (!is_missing(row[13])) {
      if (row[13] == "yes") s.lymphovascular = true;
      else if (row[13] == "no") s.lymphovascular = false;
      else warn();
    }

    result.subjects.push_back(std::move(s));
  }
  return result;
}

FoldAssignment stratified_folds(const std::vector<Subject>& subjects, int k,
                                std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");

  FoldAssignment out;
  out.k = k;
  CounterRng root(seed);
  const Stage stages[] = {Stage::II, Stage::III};
  for (int si = 0; si < 2; ++si) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < subjects.size(); ++i)
      if (subjects[i].stage == stages[si]) members.push_back(i);
    if (members.empty()) continue;
    if (static_cast<int>(members.size()) < k)
      throw std::invalid_argument("fewer subjects than folds in one stage");
    CounterRng rng = root.substream(static_cast<std::uint64_t>(si));
    shuffle(members, rng);
    for (std::size_t i = 0; i < members.size(); ++i)
      out.fold_of[subjects[members[i]].patient_id] = static_cast<int>(i % k);
  }
  return out;
}

std::pair<std::vector<Subject>, std::vector<Subject>> train_validate_split(
    const std::vector<Subject>& subjects, double fraction, std::uint64_t seed) {
  if (!(fraction > 0.0 && fraction < 1.0))
    throw std::invalid_argument("fraction must be in (0,1)");

  std::vector<Subject> train, validation;
  CounterRng root(seed);
  const Stage stages[] = {Stage::II, Stage::III};
  for (int si = 0; si < 2; ++si) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < subjects.size(); ++i)
      if (subjects[i].stage == stages[si]) members.push_back(i);
    if (members.empty()) continue;
    CounterRng rng = root.substream(static_cast<std::uint64_t>(si) + 100);
    shuffle(members, rng);
    const auto n_train = static_cast<std::size_t>(
        std::floor(fraction * static_cast<double>(members.size()) + 0.5));
    for (std::size_t i = 0; i < members.size(); ++i) {
      (i < n_train ? train : validation).push_back(subjects[members[i]]);
    }
  }
  if (train.empty() || validation.empty())
    throw std::runtime_error("empty split side");
  return {std::move(train), std::move(validation)};
}

namespace {

Predictor make_crcnet_predictor() {
  Predictor p;
  p.name = "CRCNet Score";
  p.levels = {"Medium", "High"};
  p.reference = "Low";
  p.encode = [](const Subject& s) -> std::optional<std::vector<double>> {
    if (!s.risk_class) return std::nullopt;
    return std::vector<double>{*s.risk_class == RiskClass::Medium ? 1.0 : 0.0,
                               *s.risk_class == RiskClass::High ? 1.0 : 0.0};
  };
  return p;
}

template <typename Field, typename Level>
Predictor make_binary_predictor(std::string name, std::string level_name,
                                std::string reference, Field field, Level one_level) {
  Predictor p;
  p.name = std::move(name);
  p.levels = {std::move(level_name)};
  p.reference = std::move(reference);
  p.encode = [field, one_level](const Subject& s) -> std::optional<std::vector<double>> {
    const auto& value = field(s);
    if (!value) return std::nullopt;
    return std::vector<double>{*value == one_level ? 1.0 : 0.0};
  };
  return p;
}

Predictor make_age_predictor() {
  Predictor p;
  p.name = "Age";
  p.levels = {"Age"};
  p.reference = "";
  p.encode = [](const Subject& s) -> std::optional<std::vector<double>> {
    if (!s.age) return std::nullopt;
    return std::vector<double>{*s.age};
  };
  return p;
}

Predictor make_stage_predictor() {
  Predictor p;
  p.name = "Stage";
  p.levels = {"Stage III"};
  p.reference = "Stage II";
  p.encode = [](const Subject& s) -> std::optional<std::vector<double>> {
    return std::vector<double>{s.stage == Stage::III ? 1.0 : 0.0};
  };
  return p;
}

std::vector<Predictor> base_predictors() {
  std::vector<Predictor> preds;
  preds.push_back(make_crcnet_predictor());
  preds.push_back(make_binary_predictor(
      "KRAS", "Wild", "Mutated", [](const Subject& s) { return s.kras; },
      MutationStatus::Wild));
  preds.push_back(make_binary_predictor(
      "BRAF", "Wild", "Mutated", [](const Subject& s) { return s.braf; },
      MutationStatus::Wild));
  preds.push_back(make_binary_predictor(
      "MSI Status", "MSI-H", "MSS", [](const Subject& s) { return s.msi; },
      MsiStatus::MSI_H));
  preds.push_back(make_binary_predictor(
      "Sex", "Female", "Male", [](const Subject& s) { return s.sex; }, Sex::Female));
  preds.push_back(make_age_predictor());
  preds.push_back(make_binary_predictor(
      "Lymphovascular Invasion", "Yes", "No",
      [](const Subject& s) { return s.lymphovascular; }, true));
  preds.push_back(make_binary_predictor(
      "pT stage", "T4", "T1-T3", [](const Subject& s) { return s.pt; }, PTStage::T4));
  preds.push_back(make_binary_predictor(
      "pN stage", "N2", "N0-N1", [](const Subject& s) { return s.pn; }, PNStage::N2));
  return preds;
}

// Subjects with a defined encoding for every predictor in the list.
std::vector<std::size_t> complete_rows(const std::vector<Subject>& subjects,
                                       const std::vector<Predictor>& predictors) {
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < subjects.size(); ++i) {
    bool ok = true;
    for (const auto& pred : predictors)
      if (!pred.encode(subjects[i])) {
        ok = false;
        break;
      }
    if (ok) keep.push_back(i);
  }
  return keep;
}

struct DesignBlock {
  std::vector<Observation> obs;
  std::vector<CovariateRow> rows;
  std::vector<std::string> columns;
  std::vector<std::size_t> subject_index;
};

DesignBlock build_design(const std::vector<Subject>& subjects,
                         const std::vector<Predictor>& predictors) {
  DesignBlock block;
  for (const auto& pred : predictors)
    for (const auto& level : pred.levels)
      block.columns.push_back(pred.name == level ? level : pred.name + ": " + level);

  const auto keep = complete_rows(subjects, predictors);
  for (std::size_t idx : keep) {
    const Subject& s = subjects[idx];
    CovariateRow row;
    for (const auto& pred : predictors) {
      const auto values = pred.encode(s);
      for (double v : *values) {
        row.values.push_back(v);
        row.present.push_back(true);
      }
    }
    block.obs.push_back(s.observation());
    block.rows.push_back(std::move(row));
    block.subject_index.push_back(idx);
  }
  return block;
}

double sample_sd(const std::vector<double>& v, double mean) {
  if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

std::vector<Predictor> table2_predictors() {
  auto preds = base_predictors();
  preds.push_back(make_stage_predictor());
  return preds;
}

std::vector<Predictor> table3_predictors() { return base_predictors(); }

std::vector<PredictorSummary> univariate_table(const std::vector<Subject>& subjects,
                                               const std::vector<Predictor>& predictors,
                                               int cv_folds, std::uint64_t seed) {
  std::vector<PredictorSummary> table;

  for (const auto& pred : predictors) {
    PredictorSummary summary;
    summary.name = pred.name;
    summary.levels = pred.levels;
    summary.reference = pred.reference;

    const std::vector<Predictor> single = {pred};
    auto block = build_design(subjects, single);
    summary.n_used = block.obs.size();

    try {
      summary.fit = fit_cox(block.obs, block.rows);
      summary.estimable = true;
    } catch (const std::exception& e) {
      summary.note = e.what();
      table.push_back(std::move(summary));
      continue;
    }

    // Held-out concordance per stage-stratified fold.
    if (cv_folds >= 2) {
      std::vector<Subject> usable;
      for (std::size_t idx : block.subject_index) usable.push_back(subjects[idx]);
      std::vector<double> fold_c;
      try {
        const auto folds = stratified_folds(usable, cv_folds, seed);
        for (int f = 0; f < cv_folds; ++f) {
          std::vector<Subject> train_s, test_s;
          for (const auto& s : usable)
            (folds.fold_of.at(s.patient_id) == f ? test_s : train_s).push_back(s);
          if (train_s.empty() || test_s.empty()) continue;
          auto train_block = build_design(train_s, single);
          auto test_block = build_design(test_s, single);
          try {
            const auto fold_fit = fit_cox(train_block.obs, train_block.rows);
            std::vector<double> lp(test_block.obs.size(), 0.0);
            for (std::size_t i = 0; i < test_block.obs.size(); ++i)
              for (std::size_t j = 0; j < fold_fit.beta.size(); ++j)
                lp[i] += test_block.rows[i].values[j] * fold_fit.beta[j];
            fold_c.push_back(c_index(lp, test_block.obs));
          } catch (const std::exception&) {
            // fold skipped (degenerate fit or no comparable pairs)
          }
        }
      } catch (const std::exception&) {
        // stratified folding impossible (stage too small); SD left undefined
      }
      if (!fold_c.empty()) {
        double mean = 0.0;
        for (double c : fold_c) mean += c;
        mean /= static_cast<double>(fold_c.size());
        summary.cv_c_index_mean = mean;
        summary.cv_c_index_sd = sample_sd(fold_c, mean);
      }
    }
    table.push_back(std::move(summary));
  }
  return table;
}

PredictorSummary multivariate_table(const std::vector<Subject>& subjects,
                                    const std::vector<Predictor>& predictors) {
  PredictorSummary summary;
  summary.name = "multivariate";
  auto block = build_design(subjects, predictors);
  summary.levels = block.columns;
  summary.n_used = block.obs.size();

  std::size_t n_columns = block.columns.size();
  if (block.obs.size() < 10 * n_columns)
    throw std::invalid_argument("too few complete cases for multivariate model (" +
                                std::to_string(block.obs.size()) + " rows, " +
                                std::to_string(n_columns) + " columns)");
  try {
    summary.fit = fit_cox(block.obs, block.rows);
    summary.estimable = true;
  } catch (const collinear_error& e) {
    const std::string column = e.column >= 0 && e.column < static_cast<int>(n_columns)
                                   ? block.columns[e.column]
                                   : "unknown";
    throw std::runtime_error("collinear covariates: " + column);
  }
  return summary;
}

std::vector<ForestRow> forest_chemo(const std::vector<Subject>& subjects,
                                    TreatmentFilter filter) {
  auto arm_of = [filter](const Subject& s) -> std::optional<int> {
    if (!s.treatment) return std::nullopt;
    switch (*s.treatment) {
      case Treatment::None: return 0;
      case Treatment::Fu5: return 1;
      case Treatment::Chemo:
      case Treatment::Other:
        return filter == TreatmentFilter::AnyChemo ? std::optional<int>(1) : std::nullopt;
    }
    return std::nullopt;
  };

  const std::vector<std::optional<RiskClass>> strata = {
      std::nullopt, RiskClass::Low, RiskClass::Medium, RiskClass::High};

  std::vector<ForestRow> rows;
  for (const auto& stratum : strata) {
    ForestRow row;
    row.stratum = stratum ? std::string(risk_class_label(*stratum)) : "all";

    std::vector<Observation> obs;
    std::vector<CovariateRow> design;
    std::vector<Observation> treated_obs, untreated_obs;
    for (const auto& s : subjects) {
      if (stratum && s.risk_class != stratum) continue;
      const auto arm = arm_of(s);
      if (!arm) continue;
      obs.push_back(s.observation());
      design.push_back({{static_cast<double>(*arm)}, {true}});
      (*arm == 1 ? treated_obs : untreated_obs).push_back(s.observation());
    }
    row.n_treated = treated_obs.size();
    row.n_untreated = untreated_obs.size();

    if (treated_obs.empty() || untreated_obs.empty()) {
      row.note = "not estimable: empty arm";
      rows.push_back(std::move(row));
      continue;
    }
    try {
      const auto fit = fit_cox(obs, design);
      row.hr = fit.hr[0];
      row.ci_low = fit.ci_low[0];
      row.ci_high = fit.ci_high[0];
      row.p = fit.p[0];
      row.estimable = true;
    } catch (const std::exception& e) {
      row.note = std::string("not estimable: ") + e.what();
    }
    try {
      row.logrank_p = logrank_test({untreated_obs, treated_obs}).p;
    } catch (const std::exception&) {
      // no events in the stratum; log-rank left undefined
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

KMExport km_export(const std::vector<Subject>& subjects, const FactorFn& group_by,
                   const FactorFn* stratify_by) {
  KMExport out;

  // stratum -> group -> observations, label-ordered for stable output.
  std::map<std::string, std::map<std::string, std::vector<Observation>>> cells;
  for (const auto& s : subjects) {
    const auto group = group_by(s);
    if (!group) continue;
    std::string stratum;
    if (stratify_by) {
      const auto st = (*stratify_by)(s);
      if (!st) continue;
      stratum = *st;
    }
    cells[stratum][*group].push_back(s.observation());
  }

  for (const auto& [stratum, groups] : cells) {
    std::vector<std::pair<std::string, const std::vector<Observation>*>> present;
    for (const auto& [group, obs] : groups) {
      if (obs.empty()) {
        out.warnings.push_back("empty group " + group + " skipped");
        continue;
      }
      KMGroupCurve gc;
      gc.stratum = stratum;
      gc.group = group;
      gc.n = obs.size();
      gc.curve = km_estimate(obs);
      out.curves.push_back(std::move(gc));
      present.emplace_back(group, &obs);
    }
    if (present.size() < 2) continue;

    auto add_test = [&](const std::string& comparison,
                        const std::vector<std::vector<Observation>>& data) {
      try {
        const auto lr = logrank_test(data);
        out.tests.push_back({stratum, comparison, lr.chi2, lr.df, lr.p});
      } catch (const std::exception& e) {
        out.warnings.push_back("log-rank skipped for " + comparison +
                               (stratum.empty() ? "" : " in " + stratum) + ": " + e.what());
      }
    };

    std::vector<std::vector<Observation>> all;
    for (const auto& [group, obs] : present) all.push_back(*obs);
    add_test("all", all);
    for (std::size_t a = 0; a < present.size(); ++a)
      for (std::size_t b = a + 1; b < present.size(); ++b)
        add_test(present[a].first + "|" + present[b].first,
                 {*present[a].second, *present[b].second});
  }
  return out;
}

std::vector<AssociationRow> risk_factor_association(const std::vector<Subject>& subjects) {
  struct Factor {
    std::string name;
    std::function<std::optional<double>(const Subject&)> encode;
  };
  const std::vector<Factor> factors = {
      {"age", [](const Subject& s) { return s.age; }},
      {"sex", [](const Subject& s) -> std::optional<double> {
         if (!s.sex) return std::nullopt;
         return *s.sex == Sex::Female ? 1.0 : 0.0;
       }},
      {"stage", [](const Subject& s) -> std::optional<double> {
         return s.stage == Stage::III ? 1.0 : 0.0;
       }},
      {"pT", [](const Subject& s) -> std::optional<double> {
         if (!s.pt) return std::nullopt;
         return *s.pt == PTStage::T4 ? 1.0 : 0.0;
       }},
      {"pN", [](const Subject& s) -> std::optional<double> {
         if (!s.pn) return std::nullopt;
         return *s.pn == PNStage::N2 ? 1.0 : 0.0;
       }},
      {"location", [](const Subject& s) -> std::optional<double> {
         if (!s.location) return std::nullopt;
         return *s.location == Location::Rectum ? 1.0 : 0.0;
       }},
      {"msi", [](const Subject& s) -> std::optional<double> {
         if (!s.msi) return std::nullopt;
         return *s.msi == MsiStatus::MSI_H ? 1.0 : 0.0;
       }},
      {"kras", [](const Subject& s) -> std::optional<double> {
         if (!s.kras) return std::nullopt;
         return *s.kras == MutationStatus::Mutated ? 1.0 : 0.0;
       }},
      {"braf", [](const Subject& s) -> std::optional<double> {
         if (!s.braf) return std::nullopt;
         return *s.braf == MutationStatus::Mutated ? 1.0 : 0.0;
       }},
      {"lymphovascular", [](const Subject& s) -> std::optional<double> {
         if (!s.lymphovascular) return std::nullopt;
         return *s.lymphovascular ? 1.0 : 0.0;
       }},
  };

  std::vector<AssociationRow> rows;
  for (const auto& factor : factors) {
    AssociationRow row;
    row.factor = factor.name;
    std::vector<double> risk_ord, value;
    for (const auto& s : subjects) {
      if (!s.risk_class) continue;
      const auto v = factor.encode(s);
      if (!v) continue;
      risk_ord.push_back(static_cast<double>(static_cast<int>(*s.risk_class)));
      value.push_back(*v);
    }
    row.n = value.size();
    if (value.size() < 3) {
      row.note = "skipped: fewer than 3 complete pairs";
      rows.push_back(std::move(row));
      continue;
    }
    try {
      const auto res = spearman_test(risk_ord, value);
      row.rho = res.rho;
      row.p = res.p;
      row.computed = true;
    } catch (const std::exception& e) {
      row.note = std::string("skipped: ") + e.what();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

std::map<std::string, RiskClass> read_risk_csv(const std::string& path) {
  const auto rows = csv::read_file(path);
  if (rows.empty()) throw schema_error(path + ": empty risk file");
  const std::vector<std::string> expected = {"patient_id", "tumor_score", "stroma_score",
                                             "tumor_bin",  "stroma_bin",  "risk_class"};
  for (std::size_t i = 0; i < expected.size(); ++i)
    if (i >= rows[0].size() || rows[0][i] != expected[i])
      throw schema_error(path + ": missing or misplaced column '" + expected[i] + "'");

  std::map<std::string, RiskClass> classes;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.size() == 1 && row[0].empty()) continue;
    if (row.size() != expected.size())
      throw schema_error(path + ": wrong field count at line " + std::to_string(r + 1));
    const auto cls = risk_class_from_label(row[5]);
    if (!cls) throw schema_error(path + ": unknown risk class at line " + std::to_string(r + 1));
    if (!classes.emplace(row[0], *cls).second)
      throw schema_error(path + ": duplicate patient '" + row[0] + "'");
  }
  return classes;
}

void attach_risk_classes(std::vector<Subject>& subjects,
                         const std::map<std::string, RiskClass>& classes) {
  for (auto& s : subjects) {
    const auto it = classes.find(s.patient_id);
    if (it != classes.end()) s.risk_class = it->second;
  }
}

FactorFn risk_class_factor() {
  return [](const Subject& s) -> std::optional<std::string> {
    if (!s.risk_class) return std::nullopt;
    return std::string(risk_class_label(*s.risk_class));
  };
}

FactorFn stage_factor() {
  return [](const Subject& s) -> std::optional<std::string> {
    return std::string(s.stage == Stage::II ? "II" : "III");
  };
}

FactorFn pt_factor() {
  return [](const Subject& s) -> std::optional<std::string> {
    if (!s.pt) return std::nullopt;
    return std::string(*s.pt == PTStage::T4 ? "T4" : "T1-T3");
  };
}

FactorFn pn_factor() {
  return [](const Subject& s) -> std::optional<std::string> {
    if (!s.pn) return std::nullopt;
    return std::string(*s.pn == PNStage::N2 ? "N2" : "N0-N1");
  };
}

FactorFn msi_factor() {
  return [](const Subject& s) -> std::optional<std::string> {
    if (!s.msi) return std::nullopt;
    return std::string(*s.msi == MsiStatus::MSI_H ? "MSI-H" : "MSS");
  };
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

}  // namespace

void write_univariate_csv(const std::string& path,
                          const std::vector<PredictorSummary>& table) {
  auto out = open_out(path);
  csv::write_row(out, {"predictor", "level", "reference", "n", "hr_ci", "p",
                       "hr", "ci_low", "ci_high", "p_value", "c_index",
                       "cv_c_index_mean", "cv_c_index_sd", "note"});
  for (const auto& s : table) {
    for (std::size_t j = 0; j < s.levels.size(); ++j) {
      std::vector<std::string> row(14);
      row[0] = s.name;
      row[1] = s.levels[j];
      row[2] = s.reference;
      row[3] = std::to_string(s.n_used);
      if (s.estimable) {
        row[4] = format_hr(s.fit, j);
        row[5] = format_p(s.fit.p[j]);
        row[6] = fmt(s.fit.hr[j]);
        row[7] = fmt(s.fit.ci_low[j]);
        row[8] = fmt(s.fit.ci_high[j]);
        row[9] = fmt(s.fit.p[j]);
        if (j == 0) {
          row[10] = fmt(s.fit.c_index);
          row[11] = fmt(s.cv_c_index_mean);
          row[12] = fmt(s.cv_c_index_sd);
        }
      } else {
        row[4] = "not estimable";
        row[13] = s.note;
      }
      csv::write_row(out, row);
    }
  }
}

void write_multivariate_csv(const std::string& path, const PredictorSummary& summary) {
  auto out = open_out(path);
  csv::write_row(out, {"column", "n", "hr_ci", "p", "hr", "ci_low", "ci_high",
                       "p_value", "model_c_index"});
  for (std::size_t j = 0; j < summary.levels.size(); ++j) {
    std::vector<std::string> row(9);
    row[0] = summary.levels[j];
    row[1] = std::to_string(summary.n_used);
    row[2] = format_hr(summary.fit, j);
    row[3] = format_p(summary.fit.p[j]);
    row[4] = fmt(summary.fit.hr[j]);
    row[5] = fmt(summary.fit.ci_low[j]);
    row[6] = fmt(summary.fit.ci_high[j]);
    row[7] = fmt(summary.fit.p[j]);
    if (j == 0) row[8] = fmt(summary.fit.c_index);
    csv::write_row(out, row);
  }
}

void write_forest_csv(
    const std::string& path,
    const std::vector<std::pair<std::string, std::vector<ForestRow>>>& blocks) {
  auto out = open_out(path);
  csv::write_row(out, {"filter", "stratum", "n_treated", "n_untreated", "hr_ci", "p",
                       "hr", "ci_low", "ci_high", "p_value", "logrank_p", "note"});
  for (const auto& [filter, rows] : blocks) {
    for (const auto& r : rows) {
      std::vector<std::string> row(12);
      row[0] = filter;
      row[1] = r.stratum;
      row[2] = std::to_string(r.n_treated);
      row[3] = std::to_string(r.n_untreated);
      if (r.estimable) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%.2f(%.2f,%.2f)", r.hr, r.ci_low, r.ci_high);
        row[4] = buf;
        row[5] = format_p(r.p);
        row[6] = fmt(r.hr);
        row[7] = fmt(r.ci_low);
        row[8] = fmt(r.ci_high);
        row[9] = fmt(r.p);
      } else {
        row[4] = "not estimable";
      }
      row[10] = fmt(r.logrank_p);
      row[11] = r.note;
      csv::write_row(out, row);
    }
  }
}

void write_km_csv(const std::string& path, const KMExport& exp) {
  auto out = open_out(path);
  csv::write_row(out, {"stratum", "group", "n", "time", "survival", "at_risk", "events"});
  for (const auto& gc : exp.curves) {
    for (std::size_t i = 0; i < gc.curve.times.size(); ++i) {
      csv::write_row(out, {gc.stratum, gc.group, std::to_string(gc.n),
                           fmt(gc.curve.times[i]), fmt(gc.curve.survival[i]),
                           std::to_string(gc.curve.at_risk[i]),
                           std::to_string(gc.curve.events[i])});
    }
  }
}

void write_km_tests_csv(const std::string& path, const KMExport& exp) {
  auto out = open_out(path);
  csv::write_row(out, {"stratum", "comparison", "chi2", "df", "p", "stars"});
  for (const auto& t : exp.tests)
    csv::write_row(out, {t.stratum, t.comparison, fmt(t.chi2), std::to_string(t.df),
                         fmt(t.p), significance_stars(t.p)});
}

void write_associations_csv(const std::string& path,
                            const std::vector<AssociationRow>& rows) {
  auto out = open_out(path);
  csv::write_row(out, {"factor", "n", "rho", "p", "stars", "note"});
  for (const auto& r : rows)
    csv::write_row(out, {r.factor, std::to_string(r.n), fmt(r.rho), fmt(r.p),
                         r.computed ? significance_stars(r.p) : "", r.note});
}

}  // namespace crcnet
