#include "nlsvd/runner.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "json.hpp"
#include "nlsvd/analysis.hpp"
#include "nlsvd/attack.hpp"
#include "nlsvd/dataset.hpp"
#include "nlsvd/error.hpp"
#include "nlsvd/gsvd.hpp"
#include "nlsvd/pgm.hpp"
#include "nlsvd/svdnet.hpp"
#include "nlsvd/traversal.hpp"

namespace nlsvd {

namespace fs = std::filesystem;
using ojson = nlohmann::ordered_json;

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!text.empty() && text.back() != '\n') out << '\n';
  if (!out) throw Error(ErrorKind::FormatError, "failed to write " + path.string());
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FormatError, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ojson loss_json(const Loss& l) {
  return {{"total", l.total},
          {"prediction", l.parts.prediction},
          {"bijection", l.parts.bijection},
          {"regularization", l.parts.regularization}};
}

ojson vector_json(std::span<const double> v) {
  ojson a = ojson::array();
  for (double x : v) a.push_back(x);
  return a;
}

std::optional<Vector> optional_vector(const nlohmann::json& j, const char* key) {
  if (!j.contains(key) || j.at(key).is_null()) return std::nullopt;
  return j.at(key).get<Vector>();
}

// Doubles in CSV cells: 17 significant digits, so reruns are byte-identical
// and values round-trip.
std::string cell(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

class Session {
 public:
  Session(const RunConfig& cfg, std::ostream& log) : cfg_(cfg), out_(cfg.output_dir), log_(log) {
    fs::create_directories(out_);
  }

  void train_svdnet() {
    const auto& [train_set, holdout] = data();
    log_ << "training on " << train_set.size() << " points for " << cfg_.train.epochs
         << " epochs\n";
    const TrainResult r = train(train_set, cfg_.train);
    net_ = r.net;
    ojson extra{{"seed", cfg_.seed}, {"config_hash", config_hash()}};
    save_checkpoint(*net_, checkpoint_path().string(), extra.dump());

    ojson m;
    m["initial"] = loss_json(r.initial);
    ojson history = ojson::array();
    for (const auto& e : r.history) {
      ojson row = loss_json(e.loss);
      row["epoch"] = e.epoch;
      row["accuracy"] = e.accuracy;
      history.push_back(row);
    }
    m["history"] = history;
    m["train_accuracy"] = accuracy(*net_, train_set);
    m["holdout_accuracy"] = holdout.size() ? accuracy(*net_, holdout) : 0.0;
    m["head_singular_values"] = vector_json(extract_head_svd(*net_).s);
    write_text(out_ / "train_metrics.json", m.dump(2));
    log_ << "train accuracy " << m["train_accuracy"].get<double>() << ", holdout accuracy "
         << m["holdout_accuracy"].get<double>() << "\n";
  }

  void build_gsvd() {
    const SvdNet& n = net();
    const Dataset& train_set = data().first;
    const BlackBox f = logit_blackbox(n);

    std::optional<Vector> anchor;
    if (cfg_.construction.anchor == "mean") {
      anchor = train_set.mean();
    } else if (cfg_.construction.anchor == "auto") {
      const Vector f0 = f.evaluate(Vector(n.d_in(), 0.0));
      if (std::any_of(f0.begin(), f0.end(), [](double v) { return v != 0.0; })) {
        anchor = train_set.mean();
      }
    }
    const BlackBox box = anchor ? anchored(f, *anchor) : f;
    std::vector<Vector> local;
    local.reserve(train_set.size());
    for (const auto& x : train_set.x) local.push_back(box.to_local(x));

    const GainEstimate est =
        estimate_gains_with_seeds(box, local, cfg_.construction.seeds_per_coordinate);
    std::optional<Vector> searched;
    if (cfg_.construction.gain_search) {
      GainSearchOptions opts;
      opts.steps = cfg_.construction.search_steps;
      searched = gain_search(box, est.alpha, est.seeds, opts);
    }
    model_ = build(box, searched.value_or(est.alpha), cfg_.construction.epsilon);
    write_text(out_ / "gsvd.json", to_json(*model_));

    ojson g;
    g["sampled"] = vector_json(est.alpha);
    g["searched"] = searched ? vector_json(*searched) : ojson(nullptr);
    g["truth"] = vector_json(svdnet_gain_truth(n));
    g["retained"] = est.retained;
    g["queries"] = box.query_count();
    write_text(out_ / "gains.json", g.dump(2));
    log_ << "built GSVD with sigma " << vector_json(model_->sigma).dump() << "\n";
  }

  void validate_model() {
    const GsvdModel& m = model();
    const BlackBox box = black_box();
    GainReference ref{svdnet_gain_truth(net()), std::nullopt, std::nullopt};
    const fs::path gains = out_ / "gains.json";
    if (fs::exists(gains)) {
      const auto j = nlohmann::json::parse(read_text(gains));
      ref.sampled_alpha = optional_vector(j, "sampled");
      ref.searched_alpha = optional_vector(j, "searched");
    }
    ValidationReport r = validate(m, box, data().second, ref);
    if (!cfg_.record_timing) r.wall_seconds = 0.0;
    write_text(out_ / "validation.json", to_json(r));
    write_text(out_ / "validation.txt", to_text(r));
    log_ << to_text(r);
  }

  void attack() {
    const SvdNet& n = net();
    const GsvdModel& m = model();
    const BlackBox box = black_box();
    const Dataset& holdout = data().second;

    std::ostringstream csv;
    csv << "sample_id,source_idx,target_idx,success,eta_norm,probes,queries,wall_ms\n";
    std::size_t attempted = 0;
    std::size_t successes = 0;
    double norm_sum = 0.0;
    std::uint64_t query_sum = 0;
    for (std::size_t i = 0; i < holdout.size() && attempted < cfg_.attack.samples; ++i) {
      if (argmax(logits(n, holdout.x[i])) != holdout.label(i)) continue;
      ++attempted;
      const AttackResult r = run_attack(m, box, holdout.x[i], cfg_.attack.config);
      if (r.success) {
        ++successes;
        norm_sum += r.eta_norm;
      }
      query_sum += r.queries;
      csv << i << ',' << r.source_idx << ',' << r.target_idx << ',' << (r.success ? 1 : 0) << ','
          << cell(r.eta_norm) << ',' << r.probes << ',' << r.queries << ','
          << cell(cfg_.record_timing ? r.wall_ms : 0.0) << '\n';
    }
    const double n_att = static_cast<double>(std::max<std::size_t>(attempted, 1));
    ojson s;
    s["success_percent"] = 100.0 * static_cast<double>(successes) / n_att;
    s["avg_perturbation_norm"] =
        successes ? ojson(norm_sum / static_cast<double>(successes)) : ojson(nullptr);
    s["avg_queries_per_sample"] = static_cast<double>(query_sum) / n_att;
    s["samples"] = attempted;
    s["successes"] = successes;
    write_text(out_ / "attack.csv", csv.str());
    write_text(out_ / "attack_summary.json", s.dump(2));
    log_ << "attack: " << successes << "/" << attempted << " succeeded\n";
  }

  void bias_sweep_run() {
    const auto& [train_set, holdout] = data();
    const std::vector<BiasReport> series =
        bias_sweep(train_set, holdout, cfg_.bias.target_class, cfg_.bias.ratios, cfg_.train);
    write_text(out_ / "bias.json", to_json(series));
    write_text(out_ / "bias.txt", to_text(series));
    std::ostringstream csv;
    csv << "sample_ratio,sigma_ratio,null_energy_fraction_minority,target_dominance,accuracy\n";
    for (const auto& r : series) {
      csv << cell(r.sample_ratio) << ',' << cell(r.sigma_ratio) << ','
          << cell(r.null_energy_fraction_minority) << ',' << cell(r.target_dominance) << ','
          << cell(r.accuracy) << '\n';
    }
    write_text(out_ / "bias.csv", csv.str());
    log_ << to_text(series);
  }

  void traverse() {
    const SvdNet& n = net();
    const auto [rows, cols] = image_shape(n.d_in());
    const double target = cfg_.traverse.scale_by_on_value ? cfg_.train.on_value : 1.0;
    ojson manifest;
    manifest["image_rows"] = rows;
    manifest["image_cols"] = cols;
    manifest["target_scale"] = target;
    ojson strips = ojson::array();

    auto emit = [&](const std::string& file, const std::string& kind,
                    const std::vector<Vector>& images, const std::vector<Vector>& codes,
                    ojson info) {
      std::vector<std::vector<double>> clipped;
      for (const auto& img : images) clipped.push_back(clip_unit(img));
      write_pgm((out_ / file).string(), cols * images.size(), rows,
                hstack_images(clipped, rows, cols));
      info["file"] = file;
      info["kind"] = kind;
      info["count"] = images.size();
      ojson logit_rows = ojson::array();
      for (const auto& c : codes) logit_rows.push_back(vector_json(n.head * c));
      info["logits"] = logit_rows;
      strips.push_back(info);
    };

    for (std::size_t c = 0; c < n.classes(); ++c) {
      std::vector<Vector> images;
      std::vector<Vector> codes;
      for (std::size_t k = 0; k < cfg_.traverse.null_samples; ++k) {
        NullSample s = null_sample(n, c, cfg_.traverse.noise_scale, cfg_.seed + k, target);
        images.push_back(std::move(s.image));
        codes.push_back(std::move(s.code));
      }
      if (!images.empty()) {
        emit("null_class" + std::to_string(c) + ".pgm", "null_samples", images, codes,
             {{"class", c}, {"noise_scale", cfg_.traverse.noise_scale}});
      }
    }
    if (n.classes() >= 2) {
      Vector y1(n.classes(), 0.0);
      Vector y2(n.classes(), 0.0);
      y1[0] = target;
      y2[1] = target;
      const Interpolation path = interpolate(n, y1, y2, cfg_.traverse.steps);
      emit("interp_0_1.pgm", "interpolation", path.images, path.codes, {{"from", 0}, {"to", 1}});
    }
    manifest["strips"] = strips;
    write_text(out_ / "traverse_manifest.json", manifest.dump(2));
    log_ << "wrote " << strips.size() << " image strips\n";
  }

  void stamp(const std::string& subcommand) {
    ojson s;
    s["version"] = kVersion;
    s["subcommand"] = subcommand;
    s["seed"] = cfg_.seed;
    s["config_hash"] = config_hash();
    write_text(out_ / ("stamp_" + subcommand + ".json"), s.dump(2));
    write_text(out_ / "config.json", serialize(cfg_));
  }

 private:
  // The hash ignores where artifacts go, so identical experiments written to
  // different directories carry identical stamps.
  std::string config_hash() const {
    RunConfig c = cfg_;
    c.output_dir = "-";
    return fnv1a_hex(serialize(c));
  }

  fs::path checkpoint_path() const {
    return cfg_.checkpoint.empty() ? out_ / "svdnet.ckpt" : fs::path(cfg_.checkpoint);
  }

  const std::pair<Dataset, Dataset>& data() {
    if (!data_) {
      const DatasetSpec& d = cfg_.dataset;
      Dataset all = d.kind == DatasetKind::Blobs
                        ? synth_blobs(d.classes, d.per_class, d.dim, d.separation, cfg_.seed)
                        : read_idx(d.images, d.labels, d.limit);
      all.validate();
      if (d.holdout >= all.size()) {
        throw Error(ErrorKind::ConfigError, "holdout must be smaller than the dataset (" +
                                                std::to_string(all.size()) + " points)");
      }
      data_ = split(all, all.size() - d.holdout, cfg_.seed + 1);
    }
    return *data_;
  }

  const SvdNet& net() {
    if (!net_) {
      const fs::path p = checkpoint_path();
      if (fs::exists(p)) {
        net_ = load_checkpoint(p.string());
      } else {
        train_svdnet();
      }
    }
    return *net_;
  }

  const GsvdModel& model() {
    if (!model_) {
      const fs::path p = out_ / "gsvd.json";
      if (fs::exists(p)) {
        model_ = gsvd_from_json(read_text(p));
      } else {
        build_gsvd();
      }
    }
    return *model_;
  }

  BlackBox black_box() {
    const BlackBox f = logit_blackbox(net());
    const GsvdModel& m = model();
    return m.anchor ? anchored(f, *m.anchor) : f;
  }

  std::pair<std::size_t, std::size_t> image_shape(std::size_t d_in) const {
    if (cfg_.traverse.image_shape) {
      const auto& s = *cfg_.traverse.image_shape;
      if (s[0] * s[1] != d_in) {
        throw Error(ErrorKind::ConfigError, "traverse.image_shape does not match the input size");
      }
      return {s[0], s[1]};
    }
    std::size_t side = 1;
    while ((side + 1) * (side + 1) <= d_in) ++side;
    if (side * side == d_in) return {side, side};
    return {1, d_in};
  }

  const RunConfig& cfg_;
  fs::path out_;
  std::ostream& log_;
  std::optional<std::pair<Dataset, Dataset>> data_;
  std::optional<SvdNet> net_;
  std::optional<GsvdModel> model_;
};

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"train-svdnet", "build-gsvd", "validate", "attack",
                                              "bias-sweep",   "traverse",   "pipeline"};
  return names;
}

void run(const std::string& subcommand, const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  Session s(cfg, log);
  if (subcommand == "train-svdnet") {
    s.train_svdnet();
  } else if (subcommand == "build-gsvd") {
    s.build_gsvd();
  } else if (subcommand == "validate") {
    s.validate_model();
  } else if (subcommand == "attack") {
    s.attack();
  } else if (subcommand == "bias-sweep") {
    s.bias_sweep_run();
  } else if (subcommand == "traverse") {
    s.traverse();
  } else if (subcommand == "pipeline") {
    s.train_svdnet();
    s.build_gsvd();
    s.validate_model();
    s.attack();
    s.traverse();
  } else {
    throw Error(ErrorKind::ConfigError, "unknown subcommand '" + subcommand + "'");
  }
  s.stamp(subcommand);
}

std::string error_json(const std::exception& e) {
  std::string kind = "InternalError";
  if (const auto* err = dynamic_cast<const Error*>(&e)) kind = std::string(err->name());
  ojson j;
  j["error"] = {{"kind", kind}, {"message", e.what()}};
  if (const auto* gv = dynamic_cast<const GainViolation*>(&e)) {
    j["error"]["gamma"] = gv->gamma();
  }
  return j.dump(2);
}

int run_guarded(const std::string& subcommand, const RunConfig& cfg, std::ostream& log,
                std::ostream& err) {
  try {
    run(subcommand, cfg, log);
    return 0;
  } catch (const std::exception& e) {
    const std::string doc = error_json(e);
    err << doc << '\n';
    std::error_code ec;
    if (!cfg.output_dir.empty() && fs::is_directory(cfg.output_dir, ec)) {
      std::ofstream(fs::path(cfg.output_dir) / "error.json") << doc << '\n';
    }
    return 1;
  }
}

}  // namespace nlsvd
