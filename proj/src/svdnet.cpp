#include "nlsvd/svdnet.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>

#include "json.hpp"
#include "nlsvd/error.hpp"

namespace nlsvd {

namespace {

constexpr char kCheckpointMagic[] = "SVDNET1\n";
constexpr std::size_t kMagicLength = sizeof(kCheckpointMagic) - 1;

// out = W a + b
Vector affine(const DenseLayer& layer, std::span<const double> a) {
  Vector out = layer.w * a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += layer.b[i];
  return out;
}

void activate(Vector& v, Activation act) {
  if (act == Activation::Tanh) {
    for (auto& e : v) e = std::tanh(e);
  }
}

// Activations of every stage; acts[0] is the input, acts.back() the output.
std::vector<Vector> run_stack(const std::vector<DenseLayer>& layers, Activation act,
                              Vector input) {
  std::vector<Vector> acts;
  acts.reserve(layers.size() + 1);
  acts.push_back(std::move(input));
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Vector next = affine(layers[l], acts.back());
    if (l + 1 < layers.size()) activate(next, act);
    acts.push_back(std::move(next));
  }
  return acts;
}

std::size_t layer_size(const DenseLayer& l) { return l.w.rows() * l.w.cols() + l.b.size(); }

// Backpropagates `delta` (gradient w.r.t. the stack output) and accumulates
// parameter gradients starting at grad[offset]. Returns the input gradient.
Vector backprop_stack(const std::vector<DenseLayer>& layers, Activation act,
                      const std::vector<Vector>& acts, Vector delta, std::span<double> grad,
                      std::size_t offset) {
  std::vector<std::size_t> offsets(layers.size());
  for (std::size_t l = 0; l < layers.size(); ++l) {
    offsets[l] = offset;
    offset += layer_size(layers[l]);
  }
  for (std::size_t l = layers.size(); l-- > 0;) {
    const DenseLayer& layer = layers[l];
    if (l + 1 < layers.size() && act == Activation::Tanh) {
      const Vector& a = acts[l + 1];
      for (std::size_t i = 0; i < delta.size(); ++i) delta[i] *= 1.0 - a[i] * a[i];
    }
    const Vector& in = acts[l];
    double* gw = grad.data() + offsets[l];
    double* gb = gw + layer.w.rows() * layer.w.cols();
    Vector back(layer.w.cols(), 0.0);
    for (std::size_t r = 0; r < layer.w.rows(); ++r) {
      const double d = delta[r];
      if (d == 0.0) continue;
      const auto row = layer.w.row(r);
      double* gr = gw + r * layer.w.cols();
      for (std::size_t c = 0; c < in.size(); ++c) {
        gr[c] += d * in[c];
        back[c] += d * row[c];
      }
      gb[r] += d;
    }
    delta = std::move(back);
  }
  return delta;
}

struct Trace {
  std::vector<Vector> enc;
  double x_norm = 0.0;
  double u_norm = 0.0;
  Vector code;
  Vector logits;
  std::vector<Vector> dec;
};

Trace trace(const SvdNet& net, std::span<const double> x) {
  Trace t;
  t.enc = run_stack(net.encoder, net.activation, Vector(x.begin(), x.end()));
  const Vector& u = t.enc.back();
  t.x_norm = norm2(x);
  t.u_norm = norm2(u);
  t.code = norm_wrap(x, u, net.norm_floor);
  for (auto& c : t.code) c *= net.encoding_scale;
  t.logits = net.head * t.code;
  t.dec = run_stack(net.decoder, net.activation, scaled(t.code, net.decoder_input_scale));
  return t;
}

void require_batch(std::span<const Vector> x, std::span<const std::size_t> labels,
                   const SvdNet& net) {
  if (x.empty()) throw Error(ErrorKind::InvalidInput, "empty batch");
  if (labels.size() != x.size()) throw Error(ErrorKind::InvalidInput, "batch label count mismatch");
  for (std::size_t l : labels) {
    if (l >= net.classes()) throw Error(ErrorKind::InvalidInput, "label out of range");
  }
}

double regularization(const SvdNet& net, double cutoff, const SvdFactors* f) {
  const Vector s = f ? f->s : singular_values(net.head);
  double reg = 0.0;
  for (double v : s) {
    if (v > cutoff) reg += (v - cutoff) * (v - cutoff);
  }
  return reg;
}

Loss evaluate_loss(const SvdNet& net, std::span<const Vector> x,
                   std::span<const std::size_t> labels, const TrainConfig& cfg, Vector* gradient) {
  require_batch(x, labels, net);
  const double batch = static_cast<double>(x.size());
  const double classes = static_cast<double>(net.classes());
  const double d_in = static_cast<double>(net.d_in());
  const LossWeights& w = cfg.loss_weights;

  std::size_t head_offset = 0;
  for (const auto& l : net.encoder) head_offset += layer_size(l);
  const std::size_t decoder_offset = head_offset + net.head.rows() * net.head.cols();
  if (gradient) gradient->assign(net.parameter_count(), 0.0);

  Loss out;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const Trace t = trace(net, x[n]);
    Vector dlogits(t.logits.size());
    for (std::size_t c = 0; c < t.logits.size(); ++c) {
      const double target = c == labels[n] ? cfg.on_value : cfg.off_value;
      const double r = t.logits[c] - target;
      out.parts.prediction += r * r;
      dlogits[c] = w.prediction * 2.0 * r / (batch * classes);
    }
    const Vector& recon = t.dec.back();
    Vector drecon(recon.size());
    for (std::size_t j = 0; j < recon.size(); ++j) {
      const double r = recon[j] - x[n][j];
      out.parts.bijection += r * r;
      drecon[j] = w.bijection * 2.0 * r / (batch * d_in);
    }
    if (!gradient) continue;

    std::span<double> g(*gradient);
    // head: logits = K code
    Vector dcode(t.code.size(), 0.0);
    for (std::size_t r = 0; r < net.head.rows(); ++r) {
      const auto row = net.head.row(r);
      double* gk = g.data() + head_offset + r * net.head.cols();
      for (std::size_t c = 0; c < t.code.size(); ++c) {
        gk[c] += dlogits[r] * t.code[c];
        dcode[c] += dlogits[r] * row[c];
      }
    }
    const Vector ddec = backprop_stack(net.decoder, net.activation, t.dec, drecon, g, decoder_offset);
    for (std::size_t c = 0; c < dcode.size(); ++c) dcode[c] += net.decoder_input_scale * ddec[c];

    if (t.u_norm <= net.norm_floor) continue;
    // code = s ||x|| u / ||u||  =>  du = s ||x|| / ||u|| (I - uhat uhat^T) dcode
    const Vector& u = t.enc.back();
    double proj = 0.0;
    for (std::size_t i = 0; i < u.size(); ++i) proj += u[i] * dcode[i];
    proj /= t.u_norm;
    const double scale = net.encoding_scale * t.x_norm / t.u_norm;
    Vector du(u.size());
    for (std::size_t i = 0; i < u.size(); ++i) du[i] = scale * (dcode[i] - u[i] / t.u_norm * proj);
    backprop_stack(net.encoder, net.activation, t.enc, std::move(du), g, 0);
  }
  out.parts.prediction /= batch * classes;
  out.parts.bijection /= batch * d_in;

  if (gradient && w.regularization != 0.0) {
    const SvdFactors f = svd(net.head);
    out.parts.regularization = regularization(net, cfg.sv_cutoff, &f);
    for (std::size_t i = 0; i < f.s.size(); ++i) {
      if (f.s[i] <= cfg.sv_cutoff) continue;
      const double coef = w.regularization * 2.0 * (f.s[i] - cfg.sv_cutoff);
      for (std::size_t r = 0; r < net.head.rows(); ++r) {
        double* gk = gradient->data() + head_offset + r * net.head.cols();
        for (std::size_t c = 0; c < net.head.cols(); ++c) gk[c] += coef * f.u(r, i) * f.vt(i, c);
      }
    }
  } else {
    out.parts.regularization = regularization(net, cfg.sv_cutoff, nullptr);
  }
  out.total = w.prediction * out.parts.prediction + w.bijection * out.parts.bijection +
              w.regularization * out.parts.regularization;
  return out;
}

DenseLayer glorot(std::size_t in, std::size_t out, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> u(-limit, limit);
  DenseLayer l{Matrix(out, in), Vector(out, 0.0)};
  for (auto& v : l.w.data()) v = u(rng);
  return l;
}

std::vector<std::size_t> hidden_widths(const SvdNet& net) {
  std::vector<std::size_t> h;
  for (std::size_t l = 0; l + 1 < net.encoder.size(); ++l) h.push_back(net.encoder[l].w.rows());
  return h;
}

void put_u64(std::ostream& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_u64(std::istream& in) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) {
    const int c = in.get();
    if (c == std::char_traits<char>::eof()) {
      throw Error(ErrorKind::FormatError, "checkpoint is truncated");
    }
    v |= static_cast<std::uint64_t>(static_cast<unsigned char>(c)) << (8 * i);
  }
  return v;
}

}  // namespace

std::size_t SvdNet::parameter_count() const {
  std::size_t n = head.rows() * head.cols();
  for (const auto& l : encoder) n += layer_size(l);
  for (const auto& l : decoder) n += layer_size(l);
  return n;
}

Vector SvdNet::parameters() const {
  Vector p;
  p.reserve(parameter_count());
  auto push = [&p](const DenseLayer& l) {
    p.insert(p.end(), l.w.data().begin(), l.w.data().end());
    p.insert(p.end(), l.b.begin(), l.b.end());
  };
  for (const auto& l : encoder) push(l);
  p.insert(p.end(), head.data().begin(), head.data().end());
  for (const auto& l : decoder) push(l);
  return p;
}

void SvdNet::set_parameters(std::span<const double> p) {
  if (p.size() != parameter_count()) {
    throw Error(ErrorKind::InvalidInput, "parameter vector has the wrong length");
  }
  if (!all_finite(p)) throw Error(ErrorKind::InvalidInput, "non-finite parameters");
  std::size_t at = 0;
  auto take = [&](std::vector<double>& dst) {
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(at), dst.size(), dst.begin());
    at += dst.size();
  };
  for (auto& l : encoder) {
    take(l.w.data());
    take(l.b);
  }
  take(head.data());
  for (auto& l : decoder) {
    take(l.w.data());
    take(l.b);
  }
}

SvdNet make_svdnet(const NetShape& shape, std::uint64_t seed) {
  if (shape.d_in == 0 || shape.classes == 0) {
    throw Error(ErrorKind::InvalidInput, "network needs a positive input size and class count");
  }
  for (std::size_t h : shape.hidden) {
    if (h == 0) throw Error(ErrorKind::InvalidInput, "hidden widths must be positive");
  }
  const std::size_t e = shape.encode_dim == 0 ? shape.d_in + shape.classes : shape.encode_dim;

  std::vector<std::size_t> widths{shape.d_in};
  widths.insert(widths.end(), shape.hidden.begin(), shape.hidden.end());
  widths.push_back(e);

  std::mt19937_64 rng(seed);
  SvdNet net;
  net.activation = shape.activation;
  for (std::size_t l = 0; l + 1 < widths.size(); ++l) {
    net.encoder.push_back(glorot(widths[l], widths[l + 1], rng));
  }
  net.head = glorot(e, shape.classes, rng).w;
  for (std::size_t l = widths.size() - 1; l > 0; --l) {
    net.decoder.push_back(glorot(widths[l], widths[l - 1], rng));
  }
  return net;
}

void TrainConfig::validate() const {
  if (!(on_value > off_value && off_value > 0.0)) {
    throw Error(ErrorKind::InvalidInput, "need on_value > off_value > 0");
  }
  if (!(sv_cutoff > 0.0)) throw Error(ErrorKind::InvalidInput, "sv_cutoff must be positive");
  if (batch_size == 0) throw Error(ErrorKind::InvalidInput, "batch_size must be positive");
  if (!(learning_rate > 0.0)) throw Error(ErrorKind::InvalidInput, "learning_rate must be positive");
  if (!(encoding_scale > 0.0)) throw Error(ErrorKind::InvalidScale, "encoding_scale must be positive");
}

Vector norm_wrap(std::span<const double> x, std::span<const double> u, double floor) {
  const double un = norm2(u);
  if (!(un > floor)) return Vector(u.size(), 0.0);
  return scaled(u, norm2(x) / un);
}

Forward forward(const SvdNet& net, std::span<const double> x) {
  Trace t = trace(net, x);
  return {std::move(t.code), std::move(t.logits), std::move(t.dec.back())};
}

Vector raw_encoding(const SvdNet& net, std::span<const double> x) {
  return run_stack(net.encoder, net.activation, Vector(x.begin(), x.end())).back();
}

Vector encode(const SvdNet& net, std::span<const double> x) {
  Vector code = norm_wrap(x, raw_encoding(net, x), net.norm_floor);
  for (auto& c : code) c *= net.encoding_scale;
  return code;
}

Vector decode(const SvdNet& net, std::span<const double> code) {
  return run_stack(net.decoder, net.activation, scaled(code, net.decoder_input_scale)).back();
}

Vector logits(const SvdNet& net, std::span<const double> x) { return net.head * encode(net, x); }

Loss loss(const SvdNet& net, std::span<const Vector> x, std::span<const std::size_t> labels,
          const TrainConfig& cfg) {
  return evaluate_loss(net, x, labels, cfg, nullptr);
}

Loss loss_and_gradient(const SvdNet& net, std::span<const Vector> x,
                       std::span<const std::size_t> labels, const TrainConfig& cfg,
                       Vector& gradient) {
  return evaluate_loss(net, x, labels, cfg, &gradient);
}

double accuracy(const SvdNet& net, const Dataset& data) {
  if (!data.labeled() || data.size() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (argmax(logits(net, data.x[i])) == data.label(i)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(data.size());
}

TrainResult train(const Dataset& data, const TrainConfig& cfg) {
  cfg.validate();
  if (!data.labeled()) throw Error(ErrorKind::InvalidInput, "training needs labels");
  if (data.size() == 0) throw Error(ErrorKind::DegenerateDataset, "empty training set");
  data.validate();

  NetShape shape{data.dim(), cfg.hidden, cfg.encode_dim, data.num_classes, Activation::Tanh};
  TrainResult result{make_svdnet(shape, cfg.seed), {}, {}};
  SvdNet& net = result.net;
  net.encoding_scale = cfg.encoding_scale;
  const auto& labels = *data.labels;
  result.initial = loss(net, data.x, labels, cfg);

  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double adam_eps = 1e-8;
  Vector params = net.parameters();
  Vector m(params.size(), 0.0);
  Vector v(params.size(), 0.0);
  Vector grad;
  std::uint64_t step = 0;

  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<Vector> bx;
  std::vector<std::size_t> by;

  for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t end = std::min(order.size(), start + cfg.batch_size);
      bx.clear();
      by.clear();
      for (std::size_t k = start; k < end; ++k) {
        bx.push_back(data.x[order[k]]);
        by.push_back(labels[order[k]]);
      }
      const Loss l = loss_and_gradient(net, bx, by, cfg, grad);
      if (!std::isfinite(l.total) || !all_finite(grad)) {
        throw Error(ErrorKind::TrainingDiverged,
                    "loss became non-finite in epoch " + std::to_string(epoch));
      }
      ++step;
      const double c1 = 1.0 - std::pow(beta1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(beta2, static_cast<double>(step));
      for (std::size_t i = 0; i < params.size(); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * grad[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
        params[i] -= cfg.learning_rate * (m[i] / c1) / (std::sqrt(v[i] / c2) + adam_eps);
      }
      if (!all_finite(params)) throw Error(ErrorKind::TrainingDiverged, "parameters diverged");
      net.set_parameters(params);
    }
    const Loss l = loss(net, data.x, labels, cfg);
    if (!std::isfinite(l.total)) throw Error(ErrorKind::TrainingDiverged, "loss became non-finite");
    result.history.push_back({epoch, l, accuracy(net, data)});
  }
  return result;
}

SvdFactors extract_head_svd(const SvdNet& net) { return svd(net.head); }

SvdNet rescale_latent(const SvdNet& net, double c) {
  if (!(c > 0.0) || !std::isfinite(c)) {
    throw Error(ErrorKind::InvalidScale, "latent scale must be positive and finite");
  }
  SvdNet out = net;
  out.encoding_scale *= c;
  out.head *= 1.0 / c;
  out.decoder_input_scale /= c;
  return out;
}

double lipschitz_product_bound(std::span<const Matrix> layers) {
  double bound = 1.0;
  for (const auto& m : layers) {
    const Vector s = singular_values(m);
    bound *= s.empty() ? 0.0 : s.front();
  }
  return bound;
}

double lipschitz_upper_bound(const SvdNet& net) {
  std::vector<Matrix> layers;
  for (const auto& l : net.encoder) layers.push_back(l.w);
  layers.push_back(net.head);
  return net.encoding_scale * lipschitz_product_bound(layers);
}

Vector raw_logits(const SvdNet& net, std::span<const double> x) {
  return scaled(net.head * raw_encoding(net, x), net.encoding_scale);
}

BlackBox logit_blackbox(const SvdNet& net) {
  auto frozen = std::make_shared<const SvdNet>(net);
  return BlackBox(net.d_in(), net.classes(),
                  [frozen](std::span<const double> x) { return logits(*frozen, x); }, true);
}

void save_checkpoint(const SvdNet& net, std::ostream& out, const std::string& extra_json) {
  nlohmann::ordered_json h;
  h["format"] = "SVDNET1";
  h["d_in"] = net.d_in();
  h["hidden"] = hidden_widths(net);
  h["encode_dim"] = net.encode_dim();
  h["classes"] = net.classes();
  h["activation"] = net.activation == Activation::Tanh ? "tanh" : "identity";
  h["norm_floor"] = net.norm_floor;
  h["encoding_scale"] = net.encoding_scale;
  h["decoder_input_scale"] = net.decoder_input_scale;
  h["parameter_count"] = net.parameter_count();
  h["extra"] = nlohmann::ordered_json::parse(extra_json);
  const std::string header = h.dump();

  out.write(kCheckpointMagic, kMagicLength);
  put_u64(out, header.size());
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  for (double p : net.parameters()) put_u64(out, std::bit_cast<std::uint64_t>(p));
  if (!out) throw Error(ErrorKind::FormatError, "failed to write checkpoint");
}

SvdNet load_checkpoint(std::istream& in) {
  char magic[kMagicLength];
  if (!in.read(magic, kMagicLength) || !std::equal(magic, magic + kMagicLength, kCheckpointMagic)) {
    throw Error(ErrorKind::FormatError, "not an SVDNET1 checkpoint");
  }
  const std::uint64_t header_len = get_u64(in);
  if (header_len > (1u << 24)) throw Error(ErrorKind::FormatError, "checkpoint header too large");
  std::string header(header_len, '\0');
  if (!in.read(header.data(), static_cast<std::streamsize>(header_len))) {
    throw Error(ErrorKind::FormatError, "checkpoint is truncated");
  }
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(header);
    NetShape shape;
    shape.d_in = h.at("d_in").get<std::size_t>();
    shape.hidden = h.at("hidden").get<std::vector<std::size_t>>();
    shape.encode_dim = h.at("encode_dim").get<std::size_t>();
    shape.classes = h.at("classes").get<std::size_t>();
    const std::string act = h.at("activation").get<std::string>();
    if (act != "tanh" && act != "identity") throw Error(ErrorKind::FormatError, "unknown activation");
    shape.activation = act == "tanh" ? Activation::Tanh : Activation::Identity;
    SvdNet net = make_svdnet(shape, 0);
    net.norm_floor = h.at("norm_floor").get<double>();
    net.encoding_scale = h.at("encoding_scale").get<double>();
    net.decoder_input_scale = h.at("decoder_input_scale").get<double>();
    if (h.at("parameter_count").get<std::size_t>() != net.parameter_count()) {
      throw Error(ErrorKind::FormatError, "checkpoint parameter count does not match its shape");
    }
    Vector p(net.parameter_count());
    for (auto& v : p) v = std::bit_cast<double>(get_u64(in));
    net.set_parameters(p);
    return net;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::FormatError, std::string("bad checkpoint header: ") + e.what());
  }
}

void save_checkpoint(const SvdNet& net, const std::string& path, const std::string& extra_json) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::FormatError, "cannot open " + path);
  save_checkpoint(net, out, extra_json);
}

SvdNet load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::FormatError, "cannot open " + path);
  return load_checkpoint(in);
}

}  // namespace nlsvd
