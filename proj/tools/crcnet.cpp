// crcnet: command-line front end for the risk-stratification pipeline.
//
// Subcommands: preprocess, train, stratify, analyze, simulate.
// Exit codes: 0 success, 2 missing input, 3 schema error, 4 invalid
// config/flags, 1 anything else.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "crcnet/cohort.hpp"
#include "crcnet/csv.hpp"
#include "crcnet/errors.hpp"
#include "crcnet/mil.hpp"
#include "crcnet/raster.hpp"
#include "crcnet/rng.hpp"
#include "crcnet/stratify.hpp"
#include "crcnet/synth.hpp"
#include "crcnet/tile_prep.hpp"
#include "crcnet/tissue.hpp"

namespace fs = std::filesystem;
using crcnet::config_error;
using crcnet::missing_input_error;
using crcnet::schema_error;
using json = nlohmann::json;

namespace {

struct RunConfig {
  std::string clinical;
  std::vector<std::string> bags;
  std::string tissue_map;
  std::string out = ".";
  std::uint64_t seed = 0;
  int k_folds = 5;
  double train_fraction = 0.8;
  std::vector<std::string> tissues_for_ensemble;
  double mil_lr = 0.05;
  int mil_epochs = 500;
  int threads = 0;
};

// The config file is JSON with the same field names as the long flags
// (underscores instead of dashes); flags given on the command line win.
void load_config_file(const std::string& path, RunConfig& cfg) {
  std::ifstream in(path);
  if (!in) throw missing_input_error("cannot open config " + path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("bad config JSON: ") + e.what());
  }
  try {
    if (j.contains("clinical")) cfg.clinical = j["clinical"].get<std::string>();
    if (j.contains("bags")) {
      if (j["bags"].is_string()) cfg.bags = {j["bags"].get<std::string>()};
      else cfg.bags = j["bags"].get<std::vector<std::string>>();
    }
    if (j.contains("tissue_map")) cfg.tissue_map = j["tissue_map"].get<std::string>();
    if (j.contains("out")) cfg.out = j["out"].get<std::string>();
    if (j.contains("seed")) cfg.seed = j["seed"].get<std::uint64_t>();
    if (j.contains("k_folds")) cfg.k_folds = j["k_folds"].get<int>();
    if (j.contains("train_fraction")) cfg.train_fraction = j["train_fraction"].get<double>();
    if (j.contains("tissues_for_ensemble"))
      cfg.tissues_for_ensemble = j["tissues_for_ensemble"].get<std::vector<std::string>>();
    if (j.contains("mil_lr")) cfg.mil_lr = j["mil_lr"].get<double>();
    if (j.contains("mil_epochs")) cfg.mil_epochs = j["mil_epochs"].get<int>();
    if (j.contains("threads")) cfg.threads = j["threads"].get<int>();
  } catch (const json::exception& e) {
    throw config_error(std::string("bad config field: ") + e.what());
  }
}

void validate_config(const RunConfig& cfg) {
  if (cfg.k_folds < 2) throw config_error("k_folds must be at least 2");
  if (!(cfg.train_fraction > 0.0 && cfg.train_fraction < 1.0))
    throw config_error("train_fraction must be in (0,1)");
  if (cfg.mil_epochs < 1) throw config_error("mil_epochs must be positive");
  if (!(cfg.mil_lr > 0.0)) throw config_error("mil_lr must be positive");
  if (!cfg.tissues_for_ensemble.empty()) {
    if (cfg.tissues_for_ensemble.size() != 2)
      throw config_error("tissues_for_ensemble needs exactly 2 codes");
    for (const auto& code : cfg.tissues_for_ensemble)
      if (!crcnet::tissue_from_code(code))
        throw config_error("unknown tissue code '" + code + "'");
  }
}

void apply_threads(const RunConfig& cfg) {
#ifdef _OPENMP
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
#else
  (void)cfg;
#endif
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw std::runtime_error("cannot create output directory " + out);
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.6g", v);
  return buf;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  return crcnet::CounterRng(seed).substream(stream).key();
}

// ---------------------------------------------------------------- preprocess

int cmd_preprocess(const RunConfig& cfg, const std::vector<std::string>& slides,
                   const std::string& mask_path, double od_threshold, bool no_normalize) {
  if (slides.empty()) throw config_error("preprocess needs at least one slide PNG");
  if (!mask_path.empty() && slides.size() != 1)
    throw config_error("--mask applies to a single slide");
  ensure_out_dir(cfg.out);

  std::optional<std::map<crcnet::TileKey, crcnet::TissueClass>> tissue_map;
  if (!cfg.tissue_map.empty()) tissue_map = crcnet::load_tissue_map(cfg.tissue_map);

  const auto target = crcnet::reference_he_profile();
  std::ofstream manifest(fs::path(cfg.out) / "manifest.csv", std::ios::binary);
  if (!manifest) throw std::runtime_error("cannot write manifest.csv");
  crcnet::csv::write_row(manifest, {"slide_id", "tile_x", "tile_y", "foreground"});

  for (const auto& slide_path : slides) {
    const std::string slide_id = fs::path(slide_path).stem().string();
    const auto img = crcnet::read_png(slide_path);

    auto mask = crcnet::foreground_mask(img, od_threshold);
    if (!mask_path.empty()) {
      const auto override_img = crcnet::read_png(mask_path);
      const auto override_mask = crcnet::mask_from_raster(override_img);
      if (override_mask.grid_w != mask.grid_w || override_mask.grid_h != mask.grid_h)
        throw schema_error("mask grid is " + std::to_string(override_mask.grid_w) + "x" +
                           std::to_string(override_mask.grid_h) + ", expected " +
                           std::to_string(mask.grid_w) + "x" + std::to_string(mask.grid_h));
      mask = override_mask;
    }

    // A tissue map refines the mask: unmapped or BACK tiles drop out.
    if (tissue_map) {
      for (int cy = 0; cy < mask.grid_h; ++cy)
        for (int cx = 0; cx < mask.grid_w; ++cx) {
          auto& cell = mask.fg[static_cast<std::size_t>(cy) * mask.grid_w + cx];
          if (!cell) continue;
          const auto it = tissue_map->find(
              {slide_id, cx * crcnet::kTileSize, cy * crcnet::kTileSize});
          if (it == tissue_map->end() || it->second == crcnet::TissueClass::BACK) cell = 0;
        }
    }

    crcnet::RasterImage normalized;
    bool have_normalized = false;
    if (!no_normalize) {
      try {
        const auto source = crcnet::estimate_stains(img);
        normalized = crcnet::normalize_to(img, source, target);
        have_normalized = true;
      } catch (const std::runtime_error& e) {
        std::cerr << "warning: " << slide_id << ": " << e.what()
                  << "; tiles written without normalization\n";
      }
    }
    const auto tiles = crcnet::tile_grid(have_normalized ? normalized : img);

    const fs::path tile_dir = fs::path(cfg.out) / "tiles" / slide_id;
    fs::create_directories(tile_dir);
    for (const auto& tile : tiles) {
      const int cx = tile.x / crcnet::kTileSize;
      const int cy = tile.y / crcnet::kTileSize;
      const bool fg = mask.at(cx, cy);
      crcnet::csv::write_row(manifest, {slide_id, std::to_string(tile.x),
                                        std::to_string(tile.y), fg ? "1" : "0"});
      if (fg) {
        const auto name = std::to_string(tile.x) + "_" + std::to_string(tile.y) + ".png";
        crcnet::write_png((tile_dir / name).string(), tile.pixels);
      }
    }
    std::cout << slide_id << ": " << tiles.size() << " tiles\n";
  }
  return 0;
}

// --------------------------------------------------------------------- train

struct TissueCohort {
  std::vector<crcnet::FeatureBag> bags;
  std::vector<crcnet::Observation> obs;
  std::vector<crcnet::Subject> subjects;
};

std::map<crcnet::TissueClass, TissueCohort> collect_cohorts(
    const std::vector<crcnet::FeatureBag>& all_bags,
    const std::map<std::string, crcnet::Subject>& clinical, int* skipped) {
  std::map<crcnet::TissueClass, TissueCohort> cohorts;
  std::set<std::pair<std::string, crcnet::TissueClass>> seen;
  for (const auto& bag : all_bags) {
    if (!seen.insert({bag.patient_id, bag.tissue}).second)
      throw schema_error("duplicate bag for patient '" + bag.patient_id + "' tissue " +
                         std::string(crcnet::tissue_code(bag.tissue)));
    const auto it = clinical.find(bag.patient_id);
    if (it == clinical.end()) {
      ++*skipped;
      continue;
    }
    auto& cohort = cohorts[bag.tissue];
    cohort.bags.push_back(bag);
    cohort.obs.push_back(it->second.observation());
    cohort.subjects.push_back(it->second);
  }
  return cohorts;
}

int cmd_train(const RunConfig& cfg) {
  if (cfg.clinical.empty()) throw config_error("train needs --clinical");
  if (cfg.bags.empty()) throw config_error("train needs --bags");
  ensure_out_dir(cfg.out);

  const auto ingest = crcnet::ingest_clinical(cfg.clinical);
  std::map<std::string, crcnet::Subject> clinical;
  for (const auto& s : ingest.subjects) clinical.emplace(s.patient_id, s);

  std::vector<crcnet::FeatureBag> all_bags;
  for (const auto& path : cfg.bags) {
    auto bags = crcnet::read_feature_bags(path);
    for (auto& b : bags) all_bags.push_back(std::move(b));
  }

  int skipped = 0;
  auto cohorts = collect_cohorts(all_bags, clinical, &skipped);
  if (skipped > 0)
    std::cerr << "warning: " << skipped << " bags without a clinical row skipped\n";
  if (cohorts.empty()) throw std::runtime_error("no usable bags");

  std::ofstream report(fs::path(cfg.out) / "cv_report.csv", std::ios::binary);
  if (!report) throw std::runtime_error("cannot write cv_report.csv");
  crcnet::csv::write_row(report, {"tissue", "fold", "n", "c_index"});

  std::vector<std::pair<crcnet::TissueClass, double>> tissue_scores;
  for (auto& [tissue, cohort] : cohorts) {
    const auto code = std::string(crcnet::tissue_code(tissue));
    const auto tissue_stream = static_cast<std::uint64_t>(tissue);

    // 80/20 internal validation split; CV runs on the training side only.
    auto [train_subjects, val_subjects] =
        crcnet::train_validate_split(cohort.subjects, cfg.train_fraction,
                                     derive_seed(cfg.seed, 900 + tissue_stream));
    std::set<std::string> train_ids;
    for (const auto& s : train_subjects) train_ids.insert(s.patient_id);

    TissueCohort train_cohort, val_cohort;
    for (std::size_t i = 0; i < cohort.bags.size(); ++i) {
      auto& dst = train_ids.count(cohort.bags[i].patient_id) ? train_cohort : val_cohort;
      dst.bags.push_back(cohort.bags[i]);
      dst.obs.push_back(cohort.obs[i]);
      dst.subjects.push_back(cohort.subjects[i]);
    }

    const auto folds = crcnet::stratified_folds(train_cohort.subjects, cfg.k_folds,
                                                derive_seed(cfg.seed, 700 + tissue_stream));
    std::vector<double> fold_c;
    for (int f = 0; f < cfg.k_folds; ++f) {
      std::vector<crcnet::FeatureBag> fit_bags, test_bags;
      std::vector<crcnet::Observation> fit_obs, test_obs;
      for (std::size_t i = 0; i < train_cohort.bags.size(); ++i) {
        const bool held_out =
            folds.fold_of.at(train_cohort.bags[i].patient_id) == f;
        (held_out ? test_bags : fit_bags).push_back(train_cohort.bags[i]);
        (held_out ? test_obs : fit_obs).push_back(train_cohort.obs[i]);
      }
      try {
        const auto model =
            crcnet::train_mil(fit_bags, fit_obs, cfg.mil_lr, cfg.mil_epochs,
                              derive_seed(cfg.seed, tissue_stream * 16 + f));
        std::vector<double> risks;
        for (const auto& bag : test_bags)
          risks.push_back(crcnet::predict_risk(bag, model).value);
        const double c = crcnet::c_index(risks, test_obs);
        fold_c.push_back(c);
        crcnet::csv::write_row(report, {code, std::to_string(f),
                                        std::to_string(test_bags.size()), num(c)});
      } catch (const std::exception& e) {
        std::cerr << "warning: " << code << " fold " << f << " skipped: " << e.what() << "\n";
      }
    }
    if (fold_c.empty()) {
      std::cerr << "warning: tissue " << code << " omitted (no usable folds)\n";
      continue;
    }
    double mean = 0.0;
    for (double c : fold_c) mean += c;
    mean /= static_cast<double>(fold_c.size());
    double sd = 0.0;
    if (fold_c.size() > 1) {
      for (double c : fold_c) sd += (c - mean) * (c - mean);
      sd = std::sqrt(sd / static_cast<double>(fold_c.size() - 1));
    }
    crcnet::csv::write_row(report, {code, "mean", std::to_string(train_cohort.bags.size()), num(mean)});
    crcnet::csv::write_row(report, {code, "sd", std::to_string(train_cohort.bags.size()), num(sd)});

    // Final per-tissue model on the full training side.
    const auto model = crcnet::train_mil(train_cohort.bags, train_cohort.obs, cfg.mil_lr,
                                         cfg.mil_epochs, derive_seed(cfg.seed, tissue_stream));
    crcnet::write_mil_model((fs::path(cfg.out) / ("model_" + code + ".json")).string(), model);

    if (!val_cohort.bags.empty()) {
      try {
        std::vector<double> risks;
        for (const auto& bag : val_cohort.bags)
          risks.push_back(crcnet::predict_risk(bag, model).value);
        crcnet::csv::write_row(report, {code, "validation",
                                        std::to_string(val_cohort.bags.size()),
                                        num(crcnet::c_index(risks, val_cohort.obs))});
      } catch (const std::exception& e) {
        std::cerr << "warning: " << code << " validation skipped: " << e.what() << "\n";
      }
    }
    tissue_scores.emplace_back(tissue, mean);
    std::cout << code << ": cv c-index " << num(mean) << " (sd " << num(sd) << ")\n";
  }

  // Ensemble tissue selection: explicit config wins, otherwise top-2 by CV.
  std::vector<std::string> selected;
  if (!cfg.tissues_for_ensemble.empty()) {
    selected = cfg.tissues_for_ensemble;
  } else if (tissue_scores.size() >= 2) {
    for (const auto t : crcnet::select_top_tissues(tissue_scores, 2))
      selected.emplace_back(crcnet::tissue_code(t));
  } else {
    std::cerr << "warning: fewer than 2 trained tissues; no ensemble selection\n";
  }
  if (!selected.empty()) {
    json sel;
    sel["tissues"] = selected;
    sel["source"] = cfg.tissues_for_ensemble.empty() ? "cv" : "config";
    std::ofstream out(fs::path(cfg.out) / "selection.json", std::ios::binary);
    out << sel.dump(2) << '\n';
    std::cout << "selected tissues: " << selected[0] << " " << selected[1] << "\n";
  }
  return 0;
}

// ------------------------------------------------------------------ stratify

int cmd_stratify(const RunConfig& cfg, const std::vector<std::string>& model_paths) {
  if (model_paths.size() != 2) throw config_error("stratify needs exactly two --model files");
  if (cfg.bags.empty()) throw config_error("stratify needs --bags");
  ensure_out_dir(cfg.out);

  auto first = crcnet::read_mil_model(model_paths[0]);
  auto second = crcnet::read_mil_model(model_paths[1]);
  if (first.tissue == second.tissue)
    throw config_error("the two models must cover different tissues");
  // The tumor/stroma column naming follows the model tissues when possible.
  if (second.tissue == crcnet::TissueClass::TUM || first.tissue == crcnet::TissueClass::STR)
    std::swap(first, second);
  const auto& tumor_model = first;
  const auto& stroma_model = second;

  std::map<std::string, std::map<crcnet::TissueClass, crcnet::FeatureBag>> by_patient;
  bool saw_tumor_tissue = false, saw_stroma_tissue = false;
  for (const auto& path : cfg.bags) {
    for (auto& bag : crcnet::read_feature_bags(path)) {
      if (bag.tissue == tumor_model.tissue) saw_tumor_tissue = true;
      if (bag.tissue == stroma_model.tissue) saw_stroma_tissue = true;
      if (!by_patient[bag.patient_id].emplace(bag.tissue, std::move(bag)).second)
        throw schema_error("duplicate bag for patient '" + bag.patient_id + "'");
    }
  }
  if (!saw_tumor_tissue || !saw_stroma_tissue)
    throw schema_error("bags contain no tissue matching model " +
                       std::string(crcnet::tissue_code(
                           saw_tumor_tissue ? stroma_model.tissue : tumor_model.tissue)));

  std::ofstream risk_out(fs::path(cfg.out) / "risk.csv", std::ios::binary);
  std::ofstream excl_out(fs::path(cfg.out) / "exclusions.csv", std::ios::binary);
  if (!risk_out || !excl_out) throw std::runtime_error("cannot write outputs");
  crcnet::csv::write_row(risk_out, {"patient_id", "tumor_score", "stroma_score",
                                    "tumor_bin", "stroma_bin", "risk_class"});
  crcnet::csv::write_row(excl_out, {"patient_id", "reason"});

  std::map<crcnet::RiskClass, int> counts;
  int excluded = 0;
  for (const auto& [patient, bags] : by_patient) {
    const auto t_it = bags.find(tumor_model.tissue);
    const auto s_it = bags.find(stroma_model.tissue);
    if (t_it == bags.end() || s_it == bags.end()) {
      crcnet::csv::write_row(
          excl_out, {patient, std::string("missing ") +
                                  std::string(crcnet::tissue_code(t_it == bags.end()
                                                                      ? tumor_model.tissue
                                                                      : stroma_model.tissue)) +
                                  " bag"});
      ++excluded;
      continue;
    }
    const double t_score = crcnet::predict_risk(t_it->second, tumor_model).value;
    const double s_score = crcnet::predict_risk(s_it->second, stroma_model).value;
    const auto t_bin = crcnet::binarize(t_score, tumor_model.train_median);
    const auto s_bin = crcnet::binarize(s_score, stroma_model.train_median);
    const auto cls = crcnet::ensemble(t_bin, s_bin);
    ++counts[cls];
    crcnet::csv::write_row(risk_out,
                           {patient, num(t_score), num(s_score),
                            std::string(crcnet::binary_risk_label(t_bin)),
                            std::string(crcnet::binary_risk_label(s_bin)),
                            std::string(crcnet::risk_class_label(cls))});
  }

  std::cout << "risk classes: Low " << counts[crcnet::RiskClass::Low] << ", Medium "
            << counts[crcnet::RiskClass::Medium] << ", High "
            << counts[crcnet::RiskClass::High] << " (" << excluded << " excluded)\n";
  return 0;
}

// ------------------------------------------------------------------- analyze

int cmd_analyze(const RunConfig& cfg, const std::string& risk_path) {
  if (cfg.clinical.empty()) throw config_error("analyze needs --clinical");
  if (risk_path.empty()) throw config_error("analyze needs --risk");
  ensure_out_dir(cfg.out);

  auto ingest = crcnet::ingest_clinical(cfg.clinical);
  const auto classes = crcnet::read_risk_csv(risk_path);
  crcnet::attach_risk_classes(ingest.subjects, classes);
  const auto& subjects = ingest.subjects;

  const fs::path out(cfg.out);

  crcnet::write_univariate_csv((out / "univariate.csv").string(),
                               crcnet::univariate_table(subjects, crcnet::table2_predictors(),
                                                        cfg.k_folds, cfg.seed));

  try {
    crcnet::write_multivariate_csv(
        (out / "multivariate.csv").string(),
        crcnet::multivariate_table(subjects, crcnet::table3_predictors()));
  } catch (const std::exception& e) {
    std::ofstream mv(out / "multivariate.csv", std::ios::binary);
    crcnet::csv::write_row(mv, {"note"});
    crcnet::csv::write_row(mv, {std::string("not estimable: ") + e.what()});
    std::cerr << "warning: multivariate model not estimable: " << e.what() << "\n";
  }

  crcnet::write_forest_csv(
      (out / "forest.csv").string(),
      {{"any_chemo", crcnet::forest_chemo(subjects, crcnet::TreatmentFilter::AnyChemo)},
       {"fu5_only", crcnet::forest_chemo(subjects, crcnet::TreatmentFilter::Fu5Only)}});

  const auto risk_factor = crcnet::risk_class_factor();
  struct StratSpec {
    std::string name;
    crcnet::FactorFn factor;
  };
  const std::vector<StratSpec> strata = {{"stage", crcnet::stage_factor()},
                                         {"pT", crcnet::pt_factor()},
                                         {"pN", crcnet::pn_factor()},
                                         {"msi", crcnet::msi_factor()}};

  auto overall = crcnet::km_export(subjects, risk_factor);
  crcnet::write_km_csv((out / "km_risk_class.csv").string(), overall);
  crcnet::write_km_tests_csv((out / "km_risk_class_tests.csv").string(), overall);
  for (const auto& w : overall.warnings) std::cerr << "warning: " << w << "\n";
  for (const auto& strat : strata) {
    auto exp = crcnet::km_export(subjects, risk_factor, &strat.factor);
    crcnet::write_km_csv((out / ("km_risk_class_by_" + strat.name + ".csv")).string(), exp);
    crcnet::write_km_tests_csv(
        (out / ("km_risk_class_by_" + strat.name + "_tests.csv")).string(), exp);
    for (const auto& w : exp.warnings) std::cerr << "warning: " << w << "\n";
  }

  crcnet::write_associations_csv((out / "associations.csv").string(),
                                 crcnet::risk_factor_association(subjects));

  std::cout << "analysis written to " << cfg.out << "\n";
  return 0;
}

// ------------------------------------------------------------------ simulate

struct TissueSimSpec {
  double signal = 10.0;
  double noise_sigma = 0.1;
};

int cmd_simulate(const RunConfig& cfg, const std::string& spec_path) {
  if (spec_path.empty()) throw config_error("simulate needs --spec");
  std::ifstream in(spec_path);
  if (!in) throw missing_input_error("cannot open spec " + spec_path);
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw config_error(std::string("bad spec JSON: ") + e.what());
  }

  std::size_t n_patients = 0;
  std::uint64_t seed = cfg.seed;
  double baseline_rate = 0.03, censor_rate = 0.01;
  std::size_t tiles_min = 10, tiles_max = 40;
  double p_treated = 0.5, treatment_log_hr = 0.0, fu5_fraction = 0.6;
  double age_mu = 68.0, age_sd = 9.0, p_female = 0.5, p_stage_iii = 0.45;
  double p_t4 = 0.2, p_n2 = 0.15, p_rectum = 0.3, p_msi_h = 0.15;
  double p_kras_mut = 0.3, p_braf_mut = 0.12, p_lvi = 0.35;
  std::map<crcnet::TissueClass, TissueSimSpec> tissues;

  try {
    n_patients = j.at("n_patients").get<std::size_t>();
    if (j.contains("seed")) seed = j["seed"].get<std::uint64_t>();
    if (j.contains("baseline_rate")) baseline_rate = j["baseline_rate"].get<double>();
    if (j.contains("censor_rate")) censor_rate = j["censor_rate"].get<double>();
    if (j.contains("tiles_min")) tiles_min = j["tiles_min"].get<std::size_t>();
    if (j.contains("tiles_max")) tiles_max = j["tiles_max"].get<std::size_t>();
    if (j.contains("treatment")) {
      const auto& t = j["treatment"];
      if (t.contains("p_treated")) p_treated = t["p_treated"].get<double>();
      if (t.contains("log_hr")) treatment_log_hr = t["log_hr"].get<double>();
      if (t.contains("fu5_fraction")) fu5_fraction = t["fu5_fraction"].get<double>();
    }
    if (j.contains("clinical")) {
      const auto& c = j["clinical"];
      auto get = [&](const char* key, double& slot) {
        if (c.contains(key)) slot = c[key].get<double>();
      };
      get("age_mu", age_mu);
      get("age_sd", age_sd);
      get("p_female", p_female);
      get("p_stage_iii", p_stage_iii);
      get("p_t4", p_t4);
      get("p_n2", p_n2);
      get("p_rectum", p_rectum);
      get("p_msi_h", p_msi_h);
      get("p_kras_mut", p_kras_mut);
      get("p_braf_mut", p_braf_mut);
      get("p_lvi", p_lvi);
    }
    if (j.contains("tissues")) {
      for (const auto& [code, spec] : j["tissues"].items()) {
        const auto tissue = crcnet::tissue_from_code(code);
        if (!tissue) throw config_error("unknown tissue code '" + code + "'");
        TissueSimSpec ts;
        if (spec.contains("signal")) ts.signal = spec["signal"].get<double>();
        if (spec.contains("noise_sigma")) ts.noise_sigma = spec["noise_sigma"].get<double>();
        tissues[*tissue] = ts;
      }
    }
  } catch (const json::exception& e) {
    throw config_error(std::string("bad spec field: ") + e.what());
  }
  if (n_patients < 2) throw config_error("n_patients must be at least 2");
  if (tiles_min < 1 || tiles_max < tiles_min) throw config_error("bad tile range");
  if (baseline_rate <= 0.0 || censor_rate <= 0.0) throw config_error("rates must be positive");
  if (tissues.empty())
    tissues = {{crcnet::TissueClass::TUM, {}}, {crcnet::TissueClass::STR, {}}};

  ensure_out_dir(cfg.out);
  crcnet::CounterRng root(seed);

  // Per-tissue ground-truth scoring directions.
  std::map<crcnet::TissueClass, std::vector<double>> w_true;
  for (const auto& [tissue, spec] : tissues) {
    crcnet::CounterRng trng = root.substream(10000 + static_cast<std::uint64_t>(tissue));
    std::vector<double> w(crcnet::kFeatureDim);
    double norm = 0.0;
    for (auto& v : w) {
      v = trng.next_normal();
      norm += v * v;
    }
    norm = std::sqrt(norm);
    for (auto& v : w) v *= spec.signal / norm;
    w_true[tissue] = std::move(w);
  }

  std::ofstream clinical(fs::path(cfg.out) / "clinical.csv", std::ios::binary);
  if (!clinical) throw std::runtime_error("cannot write clinical.csv");
  crcnet::csv::write_row(clinical, crcnet::kClinicalHeader);

  std::vector<crcnet::FeatureBag> bags;
  for (std::size_t p = 0; p < n_patients; ++p) {
    crcnet::CounterRng rng = root.substream(p);
    const std::string id = "SIM" + std::to_string(1000 + p);

    const double age = age_mu + age_sd * rng.next_normal();
    const bool female = rng.next_unit() < p_female;
    const bool stage_iii = rng.next_unit() < p_stage_iii;
    const bool t4 = rng.next_unit() < p_t4;
    const bool n2 = rng.next_unit() < p_n2;
    const bool rectum = rng.next_unit() < p_rectum;
    const bool msi_h = rng.next_unit() < p_msi_h;
    const bool kras_mut = rng.next_unit() < p_kras_mut;
    const bool braf_mut = rng.next_unit() < p_braf_mut;
    const bool lvi = rng.next_unit() < p_lvi;
    const bool treated = rng.next_unit() < p_treated;
    const bool fu5 = treated && rng.next_unit() < fu5_fraction;

    double eta = treated ? treatment_log_hr : 0.0;
    for (const auto& [tissue, spec] : tissues) {
      crcnet::FeatureBag bag;
      bag.patient_id = id;
      bag.tissue = tissue;
      bag.n_tiles = tiles_min + rng.next_below(tiles_max - tiles_min + 1);
      bag.features.resize(bag.n_tiles * crcnet::kFeatureDim);
      const auto& w = w_true[tissue];
      double mean_score = 0.0;
      for (std::size_t t = 0; t < bag.n_tiles; ++t) {
        double* f = bag.features.data() + t * crcnet::kFeatureDim;
        double s = 0.0;
        for (int k = 0; k < crcnet::kFeatureDim; ++k) {
          f[k] = rng.next_normal();
          s += w[k] * f[k];
        }
        mean_score += s;
      }
      eta += mean_score / static_cast<double>(bag.n_tiles) / static_cast<double>(tissues.size());
      eta += spec.noise_sigma * rng.next_normal() / static_cast<double>(tissues.size());
      bags.push_back(std::move(bag));
    }

    const double event_time = rng.next_exponential(baseline_rate * std::exp(eta));
    const double censor_time = rng.next_exponential(censor_rate);
    const double os_months = std::min(event_time, censor_time);
    const bool os_event = event_time <= censor_time;

    crcnet::csv::write_row(
        clinical,
        {id, num(os_months), os_event ? "1" : "0", num(age), female ? "F" : "M",
         stage_iii ? "III" : "II", t4 ? "T4" : "T1_3", n2 ? "N2" : "N0_1",
         rectum ? "rectum" : "colon",
         treated ? (fu5 ? "fu5" : "chemo") : "none", msi_h ? "MSI_H" : "MSS",
         kras_mut ? "mutated" : "wild", braf_mut ? "mutated" : "wild",
         lvi ? "yes" : "no"});
  }

  crcnet::write_feature_bags((fs::path(cfg.out) / "bags.fbag").string(), bags);
  std::cout << "wrote " << n_patients << " patients, " << bags.size() << " bags\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig cfg;

  // The config file must be applied before flag parsing so flags override it.
  for (int i = 1; i + 1 < argc; ++i) {
    if (std::string(argv[i]) == "--config") {
      try {
        load_config_file(argv[i + 1], cfg);
      } catch (const missing_input_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
      } catch (const config_error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 4;
      }
      break;
    }
  }

  CLI::App app{"CRC risk stratification pipeline"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON config file");

  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--out", cfg.out, "output directory");
    sub->add_option("--seed", cfg.seed, "random seed");
    sub->add_option("--threads", cfg.threads, "OpenMP thread count (0 = default)");
  };

  auto* pre = app.add_subcommand("preprocess", "tile, mask and stain-normalize slides");
  std::vector<std::string> slides;
  std::string mask_path;
  double od_threshold = 0.15;
  bool no_normalize = false;
  pre->add_option("slides", slides, "input slide PNGs");
  pre->add_option("--mask", mask_path, "foreground mask override PNG (grid-sized)");
  pre->add_option("--od-threshold", od_threshold, "foreground OD threshold");
  pre->add_flag("--no-normalize", no_normalize, "skip stain normalization");
  pre->add_option("--tissue-map", cfg.tissue_map, "tissue map CSV; BACK tiles drop out");
  add_common(pre);

  auto* train = app.add_subcommand("train", "train per-tissue MIL survival models");
  train->add_option("--clinical", cfg.clinical, "clinical CSV");
  train->add_option("--bags", cfg.bags, "FBAG feature files");
  train->add_option("--k-folds", cfg.k_folds, "cross-validation folds");
  train->add_option("--train-fraction", cfg.train_fraction, "training split fraction");
  train->add_option("--mil-lr", cfg.mil_lr, "MIL learning rate");
  train->add_option("--mil-epochs", cfg.mil_epochs, "MIL training epochs");
  train->add_option("--tissues-for-ensemble", cfg.tissues_for_ensemble,
                    "explicit ensemble tissue pair (overrides CV selection)");
  add_common(train);

  auto* strat = app.add_subcommand("stratify", "assign ensemble risk classes");
  std::vector<std::string> model_paths;
  strat->add_option("--model", model_paths, "MIL model JSON (exactly two)");
  strat->add_option("--bags", cfg.bags, "FBAG feature files");
  add_common(strat);

  auto* analyze = app.add_subcommand("analyze", "survival tables, KM exports, forest plot data");
  std::string risk_path;
  analyze->add_option("--clinical", cfg.clinical, "clinical CSV");
  analyze->add_option("--risk", risk_path, "risk assignment CSV from stratify");
  analyze->add_option("--k-folds", cfg.k_folds, "folds for C-index SD");
  add_common(analyze);

  auto* sim = app.add_subcommand("simulate", "generate synthetic fixture files");
  std::string spec_path;
  sim->add_option("--spec", spec_path, "simulation spec JSON");
  add_common(sim);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 4;
  }

  try {
    validate_config(cfg);
    apply_threads(cfg);
    if (pre->parsed()) return cmd_preprocess(cfg, slides, mask_path, od_threshold, no_normalize);
    if (train->parsed()) return cmd_train(cfg);
    if (strat->parsed()) return cmd_stratify(cfg, model_paths);
    if (analyze->parsed()) return cmd_analyze(cfg, risk_path);
    if (sim->parsed()) return cmd_simulate(cfg, spec_path);
  } catch (const missing_input_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const schema_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
