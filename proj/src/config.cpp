#include "nlsvd/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorKind::ConfigError, msg); }

void require_object(const json& j, const std::string& where) {
  if (!j.is_object()) config_error(where + " must be an object");
}

void check_keys(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  require_object(j, where);
  for (const auto& [key, _] : j.items()) {
    if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; })) {
      config_error("unknown key '" + key + "' in " + where);
    }
  }
}

// Reads j[key] into out when present; type mismatches are ConfigError.
template <typename T>
void read(const json& j, const char* key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    if constexpr (std::is_same_v<T, double>) {
      if (!it->is_number()) throw json::type_error::create(302, "expected a number", nullptr);
    } else if constexpr (std::is_integral_v<T> && !std::is_same_v<T, bool>) {
      if (!it->is_number_unsigned()) {
        throw json::type_error::create(302, "expected a non-negative integer", nullptr);
      }
    }
    out = it->get<T>();
  } catch (const json::exception& e) {
    config_error(where + "." + key + ": " + e.what());
  }
}

template <typename T>
void read_optional(const json& j, const char* key, std::optional<T>& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  if (it->is_null()) {
    out.reset();
    return;
  }
  T v{};
  read(j, key, v, where);
  out = v;
}

void parse_dataset(const json& j, DatasetSpec& d) {
  require_object(j, "dataset");
  std::string kind = "blobs";
  read(j, "kind", kind, "dataset");
  if (kind == "blobs") {
    d.kind = DatasetKind::Blobs;
    check_keys(j, {"kind", "classes", "per_class", "dim", "separation", "holdout"}, "dataset");
    read(j, "classes", d.classes, "dataset");
    read(j, "per_class", d.per_class, "dataset");
    read(j, "dim", d.dim, "dataset");
    read(j, "separation", d.separation, "dataset");
  } else if (kind == "idx") {
    d.kind = DatasetKind::Idx;
    check_keys(j, {"kind", "images", "labels", "limit", "holdout"}, "dataset");
    read(j, "images", d.images, "dataset");
    read(j, "labels", d.labels, "dataset");
    read_optional(j, "limit", d.limit, "dataset");
  } else {
    config_error("dataset.kind must be \"blobs\" or \"idx\"");
  }
  read(j, "holdout", d.holdout, "dataset");
}

void parse_construction(const json& j, ConstructionSpec& c) {
  check_keys(j, {"epsilon", "gain_search", "search_steps", "seeds_per_coordinate", "anchor"},
             "construction");
  read(j, "epsilon", c.epsilon, "construction");
  read(j, "gain_search", c.gain_search, "construction");
  read(j, "search_steps", c.search_steps, "construction");
  read(j, "seeds_per_coordinate", c.seeds_per_coordinate, "construction");
  read(j, "anchor", c.anchor, "construction");
}

void parse_train(const json& j, TrainConfig& t) {
  check_keys(j,
             {"epochs", "batch_size", "learning_rate", "on_value", "off_value", "sv_cutoff",
              "loss_weights", "hidden", "encode_dim", "encoding_scale"},
             "train");
  read(j, "epochs", t.epochs, "train");
  read(j, "batch_size", t.batch_size, "train");
  read(j, "learning_rate", t.learning_rate, "train");
  read(j, "on_value", t.on_value, "train");
  read(j, "off_value", t.off_value, "train");
  read(j, "sv_cutoff", t.sv_cutoff, "train");
  read(j, "hidden", t.hidden, "train");
  read(j, "encode_dim", t.encode_dim, "train");
  read(j, "encoding_scale", t.encoding_scale, "train");
  if (j.contains("loss_weights")) {
    const json& w = j.at("loss_weights");
    check_keys(w, {"prediction", "bijection", "regularization"}, "train.loss_weights");
    read(w, "prediction", t.loss_weights.prediction, "train.loss_weights");
    read(w, "bijection", t.loss_weights.bijection, "train.loss_weights");
    read(w, "regularization", t.loss_weights.regularization, "train.loss_weights");
  }
}

void parse_attack(const json& j, AttackSpec& a) {
  check_keys(j,
             {"step", "budget", "fd_eps", "clip_lo", "clip_hi", "central_differences",
              "fixed_target", "samples"},
             "attack");
  read(j, "step", a.config.step, "attack");
  read(j, "budget", a.config.budget, "attack");
  read(j, "fd_eps", a.config.fd_eps, "attack");
  read(j, "clip_lo", a.config.clip_lo, "attack");
  read(j, "clip_hi", a.config.clip_hi, "attack");
  read(j, "central_differences", a.config.central_differences, "attack");
  read_optional(j, "fixed_target", a.config.fixed_target, "attack");
  read(j, "samples", a.samples, "attack");
}

void parse_traverse(const json& j, TraverseSpec& t) {
  check_keys(j, {"noise_scale", "null_samples", "steps", "scale_by_on_value", "image_shape"},
             "traverse");
  read(j, "noise_scale", t.noise_scale, "traverse");
  read(j, "null_samples", t.null_samples, "traverse");
  read(j, "steps", t.steps, "traverse");
  read(j, "scale_by_on_value", t.scale_by_on_value, "traverse");
  read_optional(j, "image_shape", t.image_shape, "traverse");
}

void parse_bias(const json& j, BiasSpec& b) {
  check_keys(j, {"target_class", "ratios"}, "bias");
  read(j, "target_class", b.target_class, "bias");
  read(j, "ratios", b.ratios, "bias");
}

}  // namespace

void RunConfig::validate() const {
  auto wrap = [](auto&& fn) {
    try {
      fn();
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::ConfigError) throw;
      config_error(e.what());
    }
  };
  if (output_dir.empty()) config_error("output_dir must not be empty");
  if (dataset.kind == DatasetKind::Blobs) {
    if (dataset.classes < 2 || dataset.dim < 2) config_error("blobs need classes >= 2 and dim >= 2");
    if (dataset.per_class == 0) config_error("dataset.per_class must be positive");
    if (!(dataset.separation > 0.0)) config_error("dataset.separation must be positive");
  } else if (dataset.images.empty() || dataset.labels.empty()) {
    config_error("idx datasets need images and labels paths");
  }
  if (!(construction.epsilon > 0.0 && construction.epsilon < 1.0)) {
    config_error("construction.epsilon must lie in (0, 1)");
  }
  if (construction.anchor != "auto" && construction.anchor != "none" &&
      construction.anchor != "mean") {
    config_error("construction.anchor must be auto, none or mean");
  }
  if (construction.seeds_per_coordinate == 0) {
    config_error("construction.seeds_per_coordinate must be positive");
  }
  wrap([&] { train.validate(); });
  if (train.epochs == 0) config_error("train.epochs must be positive");
  wrap([&] { attack.config.validate(); });
  if (!(traverse.noise_scale >= 0.0)) config_error("traverse.noise_scale must be >= 0");
  if (traverse.steps < 2) config_error("traverse.steps must be at least 2");
  if (traverse.image_shape && traverse.image_shape->size() != 2) {
    config_error("traverse.image_shape must be [rows, cols]");
  }
  if (bias.ratios.empty()) config_error("bias.ratios must not be empty");
  for (double r : bias.ratios) {
    if (!(r > 0.0 && r <= 1.0)) config_error("bias.ratios must lie in (0, 1]");
  }
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
  check_keys(j,
             {"seed", "output_dir", "checkpoint", "record_timing", "dataset", "construction",
              "train", "attack", "traverse", "bias"},
             "config");
  RunConfig c;
  read(j, "seed", c.seed, "config");
  read(j, "output_dir", c.output_dir, "config");
  read(j, "checkpoint", c.checkpoint, "config");
  read(j, "record_timing", c.record_timing, "config");
  if (j.contains("dataset")) parse_dataset(j.at("dataset"), c.dataset);
  if (j.contains("construction")) parse_construction(j.at("construction"), c.construction);
  if (j.contains("train")) parse_train(j.at("train"), c.train);
  if (j.contains("attack")) parse_attack(j.at("attack"), c.attack);
  if (j.contains("traverse")) parse_traverse(j.at("traverse"), c.traverse);
  if (j.contains("bias")) parse_bias(j.at("bias"), c.bias);
  c.train.seed = c.seed;
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) config_error("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

std::string serialize(const RunConfig& c) {
  ojson j;
  j["seed"] = c.seed;
  j["output_dir"] = c.output_dir;
  j["checkpoint"] = c.checkpoint;
  j["record_timing"] = c.record_timing;

  ojson d;
  if (c.dataset.kind == DatasetKind::Blobs) {
    d["kind"] = "blobs";
    d["classes"] = c.dataset.classes;
    d["per_class"] = c.dataset.per_class;
    d["dim"] = c.dataset.dim;
    d["separation"] = c.dataset.separation;
  } else {
    d["kind"] = "idx";
    d["images"] = c.dataset.images;
    d["labels"] = c.dataset.labels;
    d["limit"] = c.dataset.limit ? ojson(*c.dataset.limit) : ojson(nullptr);
  }
  d["holdout"] = c.dataset.holdout;
  j["dataset"] = d;

  j["construction"] = {{"epsilon", c.construction.epsilon},
                       {"gain_search", c.construction.gain_search},
                       {"search_steps", c.construction.search_steps},
                       {"seeds_per_coordinate", c.construction.seeds_per_coordinate},
                       {"anchor", c.construction.anchor}};

  const TrainConfig& t = c.train;
  j["train"] = {{"epochs", t.epochs},
                {"batch_size", t.batch_size},
                {"learning_rate", t.learning_rate},
                {"on_value", t.on_value},
                {"off_value", t.off_value},
                {"sv_cutoff", t.sv_cutoff},
                {"loss_weights",
                 {{"prediction", t.loss_weights.prediction},
                  {"bijection", t.loss_weights.bijection},
                  {"regularization", t.loss_weights.regularization}}},
                {"hidden", t.hidden},
                {"encode_dim", t.encode_dim},
                {"encoding_scale", t.encoding_scale}};

  const AttackConfig& a = c.attack.config;
  j["attack"] = {{"step", a.step},
                 {"budget", a.budget},
                 {"fd_eps", a.fd_eps},
                 {"clip_lo", a.clip_lo},
                 {"clip_hi", a.clip_hi},
                 {"central_differences", a.central_differences},
                 {"fixed_target", a.fixed_target ? ojson(*a.fixed_target) : ojson(nullptr)},
                 {"samples", c.attack.samples}};

  j["traverse"] = {{"noise_scale", c.traverse.noise_scale},
                   {"null_samples", c.traverse.null_samples},
                   {"steps", c.traverse.steps},
                   {"scale_by_on_value", c.traverse.scale_by_on_value},
                   {"image_shape", c.traverse.image_shape ? ojson(*c.traverse.image_shape)
                                                          : ojson(nullptr)}};
  j["bias"] = {{"target_class", c.bias.target_class}, {"ratios", c.bias.ratios}};
  return j.dump(2);
}

std::string fnv1a_hex(const std::string& bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

}  // namespace nlsvd
