#include "nlsvd/analysis.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>

#include "json.hpp"
#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

using ojson = nlohmann::ordered_json;

double sum_pairwise(std::span<const double> v) {
  if (v.size() <= 8) {
    double s = 0.0;
    for (double x : v) s += x;
    return s;
  }
  const std::size_t half = v.size() / 2;
  return sum_pairwise(v.first(half)) + sum_pairwise(v.subspan(half));
}

ojson number_or_null(double v) { return std::isfinite(v) ? ojson(v) : ojson(nullptr); }

ojson number_or_null(const std::optional<double>& v) {
  return v ? number_or_null(*v) : ojson(nullptr);
}

ojson bias_json(const BiasReport& r) {
  ojson j;
  ojson spectrum = ojson::array();
  for (double s : r.sigma_spectrum) spectrum.push_back(s);
  j["sigma_spectrum"] = spectrum;
  j["sigma_ratio"] = number_or_null(r.sigma_ratio);
  j["null_energy_fraction_minority"] = r.null_energy_fraction_minority;
  j["target_dominance"] = r.target_dominance;
  j["sample_ratio"] = r.sample_ratio;
  j["accuracy"] = r.accuracy;
  return j;
}

std::optional<double> recovery(std::span<const double> estimate, std::span<const double> truth) {
  if (estimate.size() != truth.size()) {
    throw Error(ErrorKind::InvalidInput, "gain reference has the wrong length");
  }
  std::vector<double> ratios;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] > 0.0) ratios.push_back(estimate[i] / truth[i]);
  }
  if (ratios.empty()) return std::nullopt;
  return pairwise_mean(ratios);
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return std::isnan(v) ? "nan" : "inf";
  std::ostringstream os;
  os << std::setprecision(6) << v;
  return os.str();
}

}  // namespace

double pairwise_mean(std::span<const double> values) {
  if (values.empty()) return 0.0;
  return sum_pairwise(values) / static_cast<double>(values.size());
}

ValidationReport validate(const GsvdModel& model, const BlackBox& f, const Dataset& holdout,
                          const std::optional<GainReference>& reference) {
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> recon;
  std::vector<double> left;
  std::vector<double> norms;
  ValidationReport r;
  r.min_gamma = std::numeric_limits<double>::infinity();
  for (const auto& x_orig : holdout.x) {
    const Vector x = f.to_local(x_orig);
    const Vector fx = f.evaluate(x);
    ++r.samples;
    if (norm2(x) > 0.0) {
      const double g = gamma_from_output(model, x, fx);
      r.min_gamma = std::min(r.min_gamma, g);
      if (!(g > 0.0)) {
        ++r.gain_violations;
        continue;
      }
    }
    const LiftedPoint z = lift_from_output(model, x, fx);
    const Vector diff = subtract(fx, apply_u_sigma(model, z));
    recon.push_back(dot(diff, diff));
    left.push_back(norm2(subtract(left_inverse(model, z), x)));
    norms.push_back(std::abs(norm2(z.values()) - norm2(x)));
  }
  r.recon_mse = pairwise_mean(recon);
  r.left_inv_err = pairwise_mean(left);
  r.norm_pres_err = pairwise_mean(norms);
  if (reference) {
    r.gain_recovery_sampled =
        recovery(reference->sampled_alpha.value_or(model.alpha), reference->true_alpha);
    if (reference->searched_alpha) {
      r.gain_recovery_searched = recovery(*reference->searched_alpha, reference->true_alpha);
    }
  }
  r.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

Vector svdnet_gain_truth(const SvdNet& net) {
  Vector alpha(net.classes());
  for (std::size_t c = 0; c < net.classes(); ++c) {
    alpha[c] = net.encoding_scale * norm2(net.head.row(c));
  }
  return alpha;
}

EnergySplit energy_split(const SvdNet& net, const SvdFactors& head, std::span<const double> x) {
  const Vector z = head.vt * encode(net, x);
  EnergySplit e;
  for (std::size_t i = 0; i < z.size(); ++i) {
    (i < net.classes() ? e.row : e.null) += z[i] * z[i];
  }
  e.total = dot(z, z);
  return e;
}

double null_energy_fraction(const SvdNet& net, std::span<const Vector> samples) {
  const SvdFactors head = extract_head_svd(net);
  std::vector<double> fractions;
  for (const auto& x : samples) {
    const EnergySplit e = energy_split(net, head, x);
    if (e.total > 0.0) fractions.push_back(std::clamp(e.null / e.total, 0.0, 1.0));
  }
  return pairwise_mean(fractions);
}

double dominance_ratio(const SvdNet& net, std::span<const Vector> samples) {
  const SvdFactors head = extract_head_svd(net);
  std::vector<double> ratios;
  for (const auto& x : samples) {
    const Vector z = head.vt * encode(net, x);
    double row = 0.0;
    for (std::size_t i = 0; i < net.classes() && i < z.size(); ++i) row += z[i] * z[i];
    if (row > 0.0) ratios.push_back(z[0] * z[0] / row);
  }
  return pairwise_mean(ratios);
}

double sigma_ratio(const SvdNet& net, double rtol) {
  if (net.classes() < 2) throw Error(ErrorKind::InvalidInput, "sigma ratio needs two classes");
  const Vector s = extract_head_svd(net).s;
  if (s.size() < 2 || s[1] <= rtol * s[0]) return std::numeric_limits<double>::infinity();
  return s[0] / s[1];
}

Dataset undersample(const Dataset& data, std::size_t target_class, double ratio,
                    std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio <= 1.0)) {
    throw Error(ErrorKind::InvalidInput, "sampling ratio must lie in (0, 1]");
  }
  if (!data.labeled()) throw Error(ErrorKind::InvalidInput, "undersampling needs labels");
  if (target_class >= data.num_classes) {
    throw Error(ErrorKind::InvalidInput, "target class out of range");
  }
  std::vector<std::vector<std::size_t>> by_class(data.num_classes);
  for (std::size_t i = 0; i < data.size(); ++i) by_class.at(data.label(i)).push_back(i);

  std::mt19937_64 rng(seed);
  std::vector<std::size_t> keep;
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& idx = by_class[c];
    if (idx.empty()) {
      throw Error(ErrorKind::DegenerateDataset, "class " + std::to_string(c) + " is empty");
    }
    if (c != target_class) {
      const auto n = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(idx.size())));
      std::shuffle(idx.begin(), idx.end(), rng);
      idx.resize(std::min(n, idx.size()));
    }
    keep.insert(keep.end(), idx.begin(), idx.end());
  }
  std::sort(keep.begin(), keep.end());
  return data.subset(keep);
}

BiasReport bias_report(const SvdNet& net, const Dataset& eval, std::size_t target_class,
                       double sample_ratio) {
  if (!eval.labeled()) throw Error(ErrorKind::InvalidInput, "bias report needs labels");
  std::vector<Vector> target;
  std::vector<Vector> minority;
  for (std::size_t i = 0; i < eval.size(); ++i) {
    (eval.label(i) == target_class ? target : minority).push_back(eval.x[i]);
  }
  BiasReport r;
  r.sigma_spectrum = extract_head_svd(net).s;
  r.sigma_ratio = sigma_ratio(net);
  r.null_energy_fraction_minority = null_energy_fraction(net, minority);
  r.target_dominance = dominance_ratio(net, target);
  r.sample_ratio = sample_ratio;
  r.accuracy = accuracy(net, eval);
  return r;
}

std::vector<BiasReport> bias_sweep(const Dataset& train_set, const Dataset& eval,
                                   std::size_t target_class, std::span<const double> ratios,
                                   const TrainConfig& cfg) {
  std::vector<BiasReport> series;
  for (double ratio : ratios) {
    const Dataset biased = undersample(train_set, target_class, ratio, cfg.seed);
    const TrainResult trained = train(biased, cfg);
    series.push_back(bias_report(trained.net, eval, target_class, ratio));
  }
  return series;
}

std::string to_json(const ValidationReport& r) {
  ojson j;
  j["recon_mse"] = r.recon_mse;
  j["left_inv_err"] = r.left_inv_err;
  j["norm_pres_err"] = r.norm_pres_err;
  j["gain_recovery_sampled"] = number_or_null(r.gain_recovery_sampled);
  j["gain_recovery_searched"] = number_or_null(r.gain_recovery_searched);
  j["gain_violations"] = r.gain_violations;
  j["min_gamma"] = number_or_null(r.min_gamma);
  j["wall_seconds"] = r.wall_seconds;
  j["samples"] = r.samples;
  return j.dump(2);
}

std::string to_json(const BiasReport& r) { return bias_json(r).dump(2); }

std::string to_json(std::span<const BiasReport> series) {
  ojson arr = ojson::array();
  for (const auto& r : series) arr.push_back(bias_json(r));
  return arr.dump(2);
}

std::string to_text(const ValidationReport& r) {
  std::ostringstream os;
  auto row = [&os](const std::string& name, const std::string& value) {
    os << std::left << std::setw(24) << name << value << '\n';
  };
  row("recon_mse", fmt(r.recon_mse));
  row("left_inv_err", fmt(r.left_inv_err));
  row("norm_pres_err", fmt(r.norm_pres_err));
  row("gain_recovery_sampled", r.gain_recovery_sampled ? fmt(*r.gain_recovery_sampled) : "-");
  row("gain_recovery_searched", r.gain_recovery_searched ? fmt(*r.gain_recovery_searched) : "-");
  row("gain_violations", std::to_string(r.gain_violations));
  row("min_gamma", fmt(r.min_gamma));
  row("wall_seconds", fmt(r.wall_seconds));
  row("samples", std::to_string(r.samples));
  return os.str();
}

std::string to_text(std::span<const BiasReport> series) {
  std::ostringstream os;
  os << std::left << std::setw(14) << "sample_ratio" << std::setw(14) << "sigma_ratio"
     << std::setw(16) << "null_energy" << std::setw(18) << "target_dominance" << "accuracy\n";
  for (const auto& r : series) {
    os << std::left << std::setw(14) << fmt(r.sample_ratio) << std::setw(14) << fmt(r.sigma_ratio)
       << std::setw(16) << fmt(r.null_energy_fraction_minority) << std::setw(18)
       << fmt(r.target_dominance) << fmt(r.accuracy) << '\n';
  }
  return os.str();
}

}  // namespace nlsvd
