#include "crcnet/mil.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <type_traits>

#include <nlohmann/json.hpp>

#include "crcnet/errors.hpp"
#include "crcnet/rng.hpp"

namespace crcnet {

namespace {

// Indices of the scores entering the aggregate, under a (value, index) total
// order: everything when n <= 20, else the 10 lowest and 10 highest.
std::vector<std::size_t> selected_indices(const std::vector<double>& scores) {
  const std::size_t n = scores.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a] != scores[b]) return scores[a] < scores[b];
    return a < b;
  });
  if (n <= 20) return idx;
  std::vector<std::size_t> sel;
  sel.reserve(20);
  for (std::size_t i = 0; i < 10; ++i) sel.push_back(idx[i]);
  for (std::size_t i = n - 10; i < n; ++i) sel.push_back(idx[i]);
  return sel;
}

// Efron partial log-likelihood of per-subject linear predictors, with the
// analytic gradient d(pll)/d(eta_p).
double efron_eta_loglik(const std::vector<Observation>& obs, const std::vector<double>& eta,
                        std::vector<double>* grad) {
  const std::size_t n = obs.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return obs[a].time > obs[b].time; });

  std::vector<double> risk(n);
  for (std::size_t i = 0; i < n; ++i) risk[i] = std::exp(eta[i]);

  struct EventTime {
    double time;
    double inv_sum;   // sum_l 1 / D0_l
    double frac_sum;  // sum_l (l/d) / D0_l
  };
  std::vector<EventTime> event_times;

  double ll = 0.0;
  double s0 = 0.0;
  std::size_t i = 0;
  while (i < n) {
    const double t = obs[order[i]].time;
    int deaths = 0;
    double c0 = 0.0;
    std::size_t j = i;
    for (; j < n && obs[order[j]].time == t; ++j) {
      const std::size_t k = order[j];
      s0 += risk[k];
      if (obs[k].event) {
        ++deaths;
        c0 += risk[k];
        ll += eta[k];
      }
    }
    if (deaths > 0) {
      EventTime et{t, 0.0, 0.0};
      for (int l = 0; l < deaths; ++l) {
        const double f = static_cast<double>(l) / deaths;
        const double d0 = s0 - f * c0;
        ll -= std::log(d0);
        et.inv_sum += 1.0 / d0;
        et.frac_sum += f / d0;
      }
      event_times.push_back(et);
    }
    i = j;
  }

  if (grad) {
    // event_times were pushed in descending time order.
    std::reverse(event_times.begin(), event_times.end());
    std::vector<double> cum_inv(event_times.size());
    double acc = 0.0;
    for (std::size_t k = 0; k < event_times.size(); ++k) {
      acc += event_times[k].inv_sum;
      cum_inv[k] = acc;
    }
    grad->assign(n, 0.0);
    for (std::size_t p = 0; p < n; ++p) {
      // All event times at or before this subject's time keep it at risk.
      std::size_t lo = 0, hi = event_times.size();
      while (lo < hi) {
        const std::size_t mid = (lo + hi) / 2;
        if (event_times[mid].time <= obs[p].time) lo = mid + 1;
        else hi = mid;
      }
      double g = -risk[p] * (lo > 0 ? cum_inv[lo - 1] : 0.0);
      if (obs[p].event) {
        g += 1.0;
        // own tied-death correction at this subject's event time
        const auto it = std::lower_bound(
            event_times.begin(), event_times.end(), obs[p].time,
            [](const EventTime& et, double t) { return et.time < t; });
        g += risk[p] * it->frac_sum;
      }
      (*grad)[p] = g;
    }
  }
  return ll;
}

}  // namespace

std::vector<double> score_tiles(const FeatureBag& bag, const MILModel& model) {
  if (bag.tissue != model.tissue) throw std::invalid_argument("bag/model tissue mismatch");
  std::vector<double> scores(bag.n_tiles);
#pragma omp parallel for schedule(static)
  for (long long i = 0; i < static_cast<long long>(bag.n_tiles); ++i) {
    const double* f = bag.tile(static_cast<std::size_t>(i));
    double s = model.b;
    for (int j = 0; j < kFeatureDim; ++j) s += model.w[j] * f[j];
    scores[static_cast<std::size_t>(i)] = s;
  }
  return scores;
}

double aggregate(const std::vector<double>& scores) {
  if (scores.empty()) throw std::invalid_argument("empty score vector");
  std::vector<double> sorted = scores;
  std::sort(sorted.begin(), sorted.end());
  double sum = 0.0;
  std::size_t count = 0;
  if (sorted.size() <= 20) {
    for (double s : sorted) sum += s;
    count = sorted.size();
  } else {
    for (std::size_t i = 0; i < 10; ++i) sum += sorted[i];
    for (std::size_t i = sorted.size() - 10; i < sorted.size(); ++i) sum += sorted[i];
    count = 20;
  }
  return sum / static_cast<double>(count);
}

RiskScore predict_risk(const FeatureBag& bag, const MILModel& model) {
  return {bag.patient_id, bag.tissue, aggregate(score_tiles(bag, model))};
}

double mil_loss(const std::vector<FeatureBag>& bags, const std::vector<Observation>& obs,
                const std::vector<double>& w, double b, double lambda,
                std::vector<double>* grad_w, double* grad_b) {
  const std::size_t n = bags.size();
  if (n == 0) throw std::invalid_argument("no bags");
  if (obs.size() != n) throw std::invalid_argument("bag/observation length mismatch");

  // Per-patient aggregated score and, when gradients are wanted, the mean
  // feature vector of the selected tiles (the selection is held fixed).
  std::vector<double> eta(n);
  std::vector<double> sel_mean;
  if (grad_w) sel_mean.assign(n * kFeatureDim, 0.0);

#pragma omp parallel for schedule(static)
  for (long long pi = 0; pi < static_cast<long long>(n); ++pi) {
    const auto p = static_cast<std::size_t>(pi);
    const FeatureBag& bag = bags[p];
    std::vector<double> scores(bag.n_tiles);
    for (std::size_t i = 0; i < bag.n_tiles; ++i) {
      const double* f = bag.tile(i);
      double s = b;
      for (int j = 0; j < kFeatureDim; ++j) s += w[j] * f[j];
      scores[i] = s;
    }
    eta[p] = aggregate(scores);
    if (grad_w) {
      const auto sel = selected_indices(scores);
      const double inv = 1.0 / static_cast<double>(sel.size());
      double* mean = sel_mean.data() + p * kFeatureDim;
      for (std::size_t s : sel) {
        const double* f = bag.tile(s);
        for (int j = 0; j < kFeatureDim; ++j) mean[j] += f[j];
      }
      for (int j = 0; j < kFeatureDim; ++j) mean[j] *= inv;
    }
  }

  std::vector<double> eta_grad;
  const double pll = efron_eta_loglik(obs, eta, grad_w || grad_b ? &eta_grad : nullptr);

  double penalty = 0.0;
  for (int j = 0; j < kFeatureDim; ++j) penalty += w[j] * w[j];
  const double loss = -pll + lambda * penalty;

  if (grad_w) {
    grad_w->assign(kFeatureDim, 0.0);
    // Coordinate-parallel so the per-patient summation order is fixed.
#pragma omp parallel for schedule(static)
    for (int j = 0; j < kFeatureDim; ++j) {
      double g = 2.0 * lambda * w[j];
      for (std::size_t p = 0; p < n; ++p)
        g -= eta_grad[p] * sel_mean[p * kFeatureDim + j];
      (*grad_w)[j] = g;
    }
  }
  if (grad_b) {
    double g = 0.0;
    for (std::size_t p = 0; p < n; ++p) g -= eta_grad[p];
    *grad_b = g;
  }
  return loss;
}

MILModel train_mil(const std::vector<FeatureBag>& bags, const std::vector<Observation>& obs,
                   double lr, int epochs, std::uint64_t seed, MILTrainTrace* trace) {
  if (bags.size() < 2) throw std::invalid_argument("need at least 2 patients");
  if (obs.size() != bags.size()) throw std::invalid_argument("bag/observation length mismatch");
  const TissueClass tissue = bags.front().tissue;
  for (const auto& bag : bags) {
    if (bag.tissue != tissue) throw std::invalid_argument("mixed tissue types in training bags");
    if (bag.n_tiles == 0 || bag.features.size() != bag.n_tiles * kFeatureDim)
      throw std::invalid_argument("malformed feature bag");
  }
  std::size_t n_events = 0;
  for (const auto& o : obs)
    if (o.event) ++n_events;
  if (n_events == 0) throw std::runtime_error("no events");

  MILModel model;
  model.tissue = tissue;
  model.seed = seed;
  model.epochs = epochs;
  CounterRng rng(seed);
  for (int j = 0; j < kFeatureDim; ++j) model.w[j] = 0.01 * rng.next_normal();

  std::vector<double> grad_w;
  double grad_b = 0.0;
  double loss = mil_loss(bags, obs, model.w, model.b, kMilLambda, &grad_w, &grad_b);
  if (!std::isfinite(loss)) throw std::runtime_error("diverged");

  std::vector<double> cand_w(kFeatureDim);
  for (int epoch = 0; epoch < epochs; ++epoch) {
    bool accepted = false;
    double cand_b = 0.0, cand_loss = 0.0;
    while (lr > 1e-30) {
      for (int j = 0; j < kFeatureDim; ++j) cand_w[j] = model.w[j] - lr * grad_w[j];
      cand_b = model.b - lr * grad_b;
      cand_loss = mil_loss(bags, obs, cand_w, cand_b, kMilLambda, nullptr, nullptr);
      if (std::isfinite(cand_loss) && cand_loss <= loss) {
        accepted = true;
        break;
      }
      lr *= 0.5;
    }
    if (!accepted) break;
    model.w = cand_w;
    model.b = cand_b;
    loss = mil_loss(bags, obs, model.w, model.b, kMilLambda, &grad_w, &grad_b);
    if (!std::isfinite(loss)) throw std::runtime_error("diverged");
    if (trace) trace->loss.push_back(loss);
  }

  // Training-set median, lower central order statistic for even counts, so
  // binarize(score > median) marks exactly half of distinct-scored patients.
  std::vector<double> risks(bags.size());
  for (std::size_t p = 0; p < bags.size(); ++p)
    risks[p] = predict_risk(bags[p], model).value;
  std::sort(risks.begin(), risks.end());
  model.train_median = risks[(risks.size() - 1) / 2];
  return model;
}

namespace {

template <typename T>
void write_le(std::ostream& out, T value) {
  static_assert(std::is_integral_v<T>);
  for (std::size_t i = 0; i < sizeof(T); ++i)
    out.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) & 0xFF));
}

template <typename T>
bool read_le(std::istream& in, T& value) {
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    const int c = in.get();
    if (c == EOF) return false;
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  value = static_cast<T>(v);
  return true;
}

}  // namespace

void write_feature_bags(const std::string& path, const std::vector<FeatureBag>& bags) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.write("FBAG", 4);
  write_le<std::uint16_t>(out, 1);
  for (const auto& bag : bags) {
    if (bag.features.size() != bag.n_tiles * kFeatureDim)
      throw std::invalid_argument("malformed feature bag");
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(bag.patient_id.size()));
    out.write(bag.patient_id.data(), static_cast<std::streamsize>(bag.patient_id.size()));
    out.put(static_cast<char>(bag.tissue));
    write_le<std::uint32_t>(out, static_cast<std::uint32_t>(bag.n_tiles));
    for (double v : bag.features) {
      const float f = static_cast<float>(v);
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      write_le<std::uint32_t>(out, bits);
    }
  }
}

std::vector<FeatureBag> read_feature_bags(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw missing_input_error("cannot open " + path);
  char magic[4];
  if (!in.read(magic, 4) || std::memcmp(magic, "FBAG", 4) != 0)
    throw schema_error(path + ": not an FBAG file");
  std::uint16_t version = 0;
  if (!read_le(in, version) || version != 1)
    throw schema_error(path + ": unsupported FBAG version");

  std::vector<FeatureBag> bags;
  for (;;) {
    std::uint32_t id_len = 0;
    if (!read_le(in, id_len)) break;  // clean EOF
    FeatureBag bag;
    bag.patient_id.resize(id_len);
    if (!in.read(bag.patient_id.data(), id_len))
      throw schema_error(path + ": truncated record");
    const int tissue = in.get();
    if (tissue == EOF || tissue >= kNumTissueClasses)
      throw schema_error(path + ": bad tissue code");
    bag.tissue = static_cast<TissueClass>(tissue);
    std::uint32_t n_tiles = 0;
    if (!read_le(in, n_tiles) || n_tiles == 0)
      throw schema_error(path + ": bad tile count");
    bag.n_tiles = n_tiles;
    bag.features.resize(static_cast<std::size_t>(n_tiles) * kFeatureDim);
    for (double& v : bag.features) {
      std::uint32_t bits = 0;
      if (!read_le(in, bits)) throw schema_error(path + ": truncated features");
      float f;
      std::memcpy(&f, &bits, 4);
      v = static_cast<double>(f);
    }
    bags.push_back(std::move(bag));
  }
  return bags;
}

void write_mil_model(const std::string& path, const MILModel& model) {
  nlohmann::json j;
  j["w"] = model.w;
  j["b"] = model.b;
  j["tissue"] = std::string(tissue_code(model.tissue));
  j["train_median"] = model.train_median;
  j["seed"] = model.seed;
  j["epochs"] = model.epochs;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << j.dump(2) << '\n';
}

MILModel read_mil_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw missing_input_error("cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(path + ": " + e.what());
  }
  MILModel model;
  try {
    model.w = j.at("w").get<std::vector<double>>();
    model.b = j.at("b").get<double>();
    const auto tissue = tissue_from_code(j.at("tissue").get<std::string>());
    if (!tissue) throw schema_error(path + ": unknown tissue code");
    model.tissue = *tissue;
    model.train_median = j.at("train_median").get<double>();
    model.seed = j.at("seed").get<std::uint64_t>();
    model.epochs = j.at("epochs").get<int>();
  } catch (const nlohmann::json::exception& e) {
    throw schema_error(path + ": " + e.what());
  }
  if (model.w.size() != kFeatureDim)
    throw schema_error(path + ": model weight vector must have 256 entries");
  return model;
}

}  // namespace crcnet
