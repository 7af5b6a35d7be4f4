#include "cgrkit/decision/model.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <ostream>
#include <random>

#include "cgrkit/binary_io.hpp"

namespace cgrkit {

namespace {

constexpr io::Magic kModelMagic = io::make_magic("CGRKNN1");
constexpr io::Magic kBankMagic = io::make_magic("CGRKBK1");

double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

template <typename T>
struct Tape {
  using Matrix = typename BasicMlp<T>::Matrix;
  using Vector = typename BasicMlp<T>::Vector;
  std::vector<Matrix> input;  // what each layer multiplies, after the skip add
  std::vector<Matrix> xhat;   // normalized pre-activations of hidden layers
  std::vector<Matrix> out;    // post-ReLU outputs of hidden layers
  std::vector<Vector> inv_std, mean, var;
  Vector p;
};

template <typename T>
void run(const BasicMlp<T>& model, const typename BasicMlp<T>::Matrix& x, NormMode mode, Tape<T>& tape) {
  using Matrix = typename BasicMlp<T>::Matrix;
  using Vector = typename BasicMlp<T>::Vector;
  const auto& shape = model.shape;
  if (x.rows() != shape.input) throw Error("forward: expected " + std::to_string(shape.input) + " inputs");
  if (x.cols() == 0) throw Error("forward: empty batch");
  if (!x.allFinite()) throw Error("forward: non-finite input");
  const auto n = static_cast<T>(x.cols());
  const auto hidden = static_cast<std::size_t>(shape.layers - 1);
  tape.input.resize(shape.layers);
  tape.xhat.resize(hidden);
  tape.out.resize(hidden);
  tape.inv_std.resize(hidden);
  tape.mean.resize(hidden);
  tape.var.resize(hidden);
  Matrix a = x;
  for (int l = 0; l < shape.layers; ++l) {
    const auto& layer = model.layers[l];
    if (l == shape.skip_to - 1) a += tape.out[shape.skip_from - 1];
    tape.input[l] = a;
    Matrix z = layer.w * a;
    z.colwise() += layer.b;
    if (l == shape.layers - 1) {
      tape.p = (T(1) / (T(1) + (-z.row(0).array()).exp())).matrix().transpose();
      return;
    }
    Vector mean, var;
    if (mode == NormMode::batch) {
      mean = z.rowwise().mean();
      var = (z.colwise() - mean).array().square().rowwise().sum().matrix() / n;
    } else {
      mean = layer.mean;
      var = layer.var;
    }
    const Vector inv_std = (var.array() + T(kNormEps)).rsqrt().matrix();
    Matrix xhat = (z.colwise() - mean).array().colwise() * inv_std.array();
    Matrix y = xhat.array().colwise() * layer.gamma.array();
    y.colwise() += layer.beta;
    a = y.cwiseMax(T(0));
    tape.xhat[l] = std::move(xhat);
    tape.out[l] = a;
    tape.inv_std[l] = inv_std;
    tape.mean[l] = std::move(mean);
    tape.var[l] = std::move(var);
  }
}

template <typename T>
BasicMlp<T> zeros_like(const BasicMlp<T>& m) {
  BasicMlp<T> z = m;
  for (auto& l : z.layers) {
    l.w.setZero();
    l.b.setZero();
    l.gamma.setZero();
    l.beta.setZero();
    l.mean.setZero();
    l.var.setZero();
  }
  return z;
}

double clamp_prob(double p) { return std::clamp(p, kProbClamp, 1.0 - kProbClamp); }

template <typename T>
Gradients<T> backprop(const BasicMlp<T>& model, const Tape<T>& tape, std::span<const std::uint8_t> y, NormMode mode) {
  using Matrix = typename BasicMlp<T>::Matrix;
  using Vector = typename BasicMlp<T>::Vector;
  const auto& shape = model.shape;
  const auto cols = tape.p.size();
  if (static_cast<std::size_t>(cols) != y.size()) throw Error("gradients: label count does not match batch");
  const T n = static_cast<T>(cols);
  Gradients<T> g;
  g.grad = zeros_like(model);
  std::vector<double> p(cols);
  for (Eigen::Index i = 0; i < cols; ++i) p[i] = static_cast<double>(tape.p[i]);
  g.loss = bce_loss(p, y);

  // d loss / d logit; the clamp is flat outside its range
  Matrix dz(1, cols);
  for (Eigen::Index i = 0; i < cols; ++i) {
    const double pi = p[i];
    dz(0, i) = (pi < kProbClamp || pi > 1.0 - kProbClamp) ? T(0) : (tape.p[i] - T(y[i])) / n;
  }
  std::vector<Matrix> d_out(shape.layers - 1);
  for (int l = shape.layers - 1; l >= 0; --l) {
    const auto& layer = model.layers[l];
    auto& gl = g.grad.layers[l];
    if (l < shape.layers - 1) {
      const Matrix dy = d_out[l].cwiseProduct((tape.out[l].array() > T(0)).matrix().template cast<T>());
      const Matrix& xhat = tape.xhat[l];
      gl.gamma = dy.cwiseProduct(xhat).rowwise().sum();
      gl.beta = dy.rowwise().sum();
      const Matrix dxhat = dy.array().colwise() * layer.gamma.array();
      if (mode == NormMode::batch) {
        const Vector sum_d = dxhat.rowwise().sum();
        const Vector sum_dx = dxhat.cwiseProduct(xhat).rowwise().sum();
        Matrix t = n * dxhat;
        t.colwise() -= sum_d;
        t -= (xhat.array().colwise() * sum_dx.array()).matrix();
        dz = (t.array().colwise() * (tape.inv_std[l].array() / n)).matrix();
      } else {
        dz = (dxhat.array().colwise() * tape.inv_std[l].array()).matrix();
      }
    }
    gl.w = dz * tape.input[l].transpose();
    gl.b = dz.rowwise().sum();
    if (l == 0) break;
    const Matrix din = layer.w.transpose() * dz;
    if (l == shape.skip_to - 1) {
      auto& s = d_out[shape.skip_from - 1];
      if (s.size() == 0) s = din;
      else s += din;
    }
    auto& prev = d_out[l - 1];
    if (prev.size() == 0) prev = din;
    else prev += din;
  }
  return g;
}

void check_model(const ModelShape& shape, const auto& model) {
  if (static_cast<int>(model.layers.size()) != shape.layers) throw Error("model: layer count mismatch");
  for (int l = 0; l < shape.layers; ++l) {
    const auto& layer = model.layers[l];
    const int in = l == 0 ? shape.input : shape.width;
    const int out = l == shape.layers - 1 ? 1 : shape.width;
    const bool hidden = l < shape.layers - 1;
    const int nf = hidden ? out : 0;
    if (layer.w.rows() != out || layer.w.cols() != in || layer.b.size() != out || layer.gamma.size() != nf ||
        layer.beta.size() != nf || layer.mean.size() != nf || layer.var.size() != nf)
      throw Error("model: layer " + std::to_string(l + 1) + " has inconsistent dimensions");
  }
}

}  // namespace

void ModelShape::validate() const {
  if (input < 1 || width < 1) throw Error("model shape: dimensions must be positive");
  if (layers < 2) throw Error("model shape: need at least two layers");
  const int hidden = layers - 1;
  if (skip_from != 0 || skip_to != 0) {
    // skip_to names the layer whose input receives hidden layer skip_from's output
    if (skip_from < 1 || skip_from > hidden || skip_to <= skip_from + 1 || skip_to > layers - 1)
      throw Error("model shape: skip must join a hidden output to a later hidden layer's input");
  }
}

Mlp init_model(const ModelShape& shape, std::uint64_t seed) {
  shape.validate();
  std::mt19937_64 rng(seed);
  Mlp m;
  m.shape = shape;
  for (int l = 0; l < shape.layers; ++l) {
    const int in = l == 0 ? shape.input : shape.width;
    const int out = l == shape.layers - 1 ? 1 : shape.width;
    Mlp::Layer layer;
    const double bound = 1.0 / std::sqrt(static_cast<double>(in));
    layer.w.resize(out, in);
    // row-major draw order, matching the file layout
    for (int r = 0; r < out; ++r)
      for (int c = 0; c < in; ++c) layer.w(r, c) = static_cast<float>((2.0 * unit(rng) - 1.0) * bound);
    layer.b = Mlp::Vector::Zero(out);
    if (l < shape.layers - 1) {
      layer.gamma = Mlp::Vector::Ones(out);
      layer.beta = Mlp::Vector::Zero(out);
      layer.mean = Mlp::Vector::Zero(out);
      layer.var = Mlp::Vector::Ones(out);
    }
    m.layers.push_back(std::move(layer));
  }
  return m;
}

template <typename T>
void for_each_trainable(BasicMlp<T>& model, const std::function<void(int, T&)>& fn) {
  for (int l = 0; l < static_cast<int>(model.layers.size()); ++l) {
    auto& layer = model.layers[l];
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) fn(l, layer.w(r, c));
    for (Eigen::Index i = 0; i < layer.b.size(); ++i) fn(l, layer.b[i]);
    for (Eigen::Index i = 0; i < layer.gamma.size(); ++i) fn(l, layer.gamma[i]);
    for (Eigen::Index i = 0; i < layer.beta.size(); ++i) fn(l, layer.beta[i]);
  }
}

template <typename T>
typename BasicMlp<T>::Vector forward(const BasicMlp<T>& model, const typename BasicMlp<T>::Matrix& x, NormMode mode) {
  check_model(model.shape, model);
  Tape<T> tape;
  run(model, x, mode, tape);
  return tape.p;
}

double forward(const Mlp& model, std::span<const float> x) {
  const Mlp::Matrix m = Eigen::Map<const Eigen::MatrixXf>(x.data(), static_cast<Eigen::Index>(x.size()), 1);
  return static_cast<double>(forward(model, m, NormMode::running)[0]);
}

double bce_loss(std::span<const double> p, std::span<const std::uint8_t> y) {
  if (p.size() != y.size()) throw Error("loss: prediction and label counts differ");
  if (p.empty()) throw Error("loss: empty batch");
  double sum = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double q = clamp_prob(p[i]);
    sum += y[i] ? std::log(q) : std::log(1.0 - q);
  }
  return -sum / static_cast<double>(p.size());
}

template <typename T>
Gradients<T> gradients(const BasicMlp<T>& model, const typename BasicMlp<T>::Matrix& x,
                       std::span<const std::uint8_t> y, NormMode mode) {
  check_model(model.shape, model);
  Tape<T> tape;
  run(model, x, mode, tape);
  return backprop(model, tape, y, mode);
}

template void for_each_trainable<float>(Mlp&, const std::function<void(int, float&)>&);
template void for_each_trainable<double>(BasicMlp<double>&, const std::function<void(int, double&)>&);
template Mlp::Vector forward<float>(const Mlp&, const Mlp::Matrix&, NormMode);
template BasicMlp<double>::Vector forward<double>(const BasicMlp<double>&, const BasicMlp<double>::Matrix&, NormMode);
template Gradients<float> gradients<float>(const Mlp&, const Mlp::Matrix&, std::span<const std::uint8_t>, NormMode);
template Gradients<double> gradients<double>(const BasicMlp<double>&, const BasicMlp<double>::Matrix&,
                                             std::span<const std::uint8_t>, NormMode);

void TrainConfig::validate() const {
  shape.validate();
  if (epochs < 1) throw Error("train config: epochs must be positive");
  if (batch_size < 2) throw Error("train config: batch size must be at least 2");
  if (!(learning_rate > 0)) throw Error("train config: learning rate must be positive");
  if (!(decay_factor > 0)) throw Error("train config: decay factor must be positive");
  if (!(beta1 >= 0 && beta1 < 1 && beta2 >= 0 && beta2 < 1)) throw Error("train config: moment decays must lie in [0, 1)");
  if (!(adam_eps > 0)) throw Error("train config: epsilon must be positive");
}

void LabeledSet::append(std::span<const float> sample, bool label) {
  if (static_cast<int>(sample.size()) != dim)
    throw Error("labeled set: sample has " + std::to_string(sample.size()) + " values, expected " + std::to_string(dim));
  values.insert(values.end(), sample.begin(), sample.end());
  y.push_back(label ? 1 : 0);
}

double accuracy(const Mlp& model, const LabeledSet& data) {
  if (data.size() == 0) return std::numeric_limits<double>::quiet_NaN();
  const auto x = data.matrix();
  std::size_t right = 0;
  constexpr Eigen::Index kChunk = 1024;
  for (Eigen::Index c = 0; c < x.cols(); c += kChunk) {
    const auto k = std::min(kChunk, x.cols() - c);
    const Mlp::Matrix block = x.middleCols(c, k);
    const auto p = forward(model, block, NormMode::running);
    for (Eigen::Index i = 0; i < k; ++i) right += (p[i] >= 0.5f) == (data.y[c + i] == 1);
  }
  return static_cast<double>(right) / static_cast<double>(data.size());
}

TrainResult train(const LabeledSet& data, const TrainConfig& config, const LabeledSet* heldout) {
  config.validate();
  if (data.dim != config.shape.input) throw Error("train: sample dimension does not match the model input");
  if (data.size() < 2) throw Error("train: need at least two samples");
  TrainResult result;
  const auto positives = std::count(data.y.begin(), data.y.end(), 1);
  if (positives == 0 || positives == static_cast<long>(data.size()))
    result.warnings.push_back("training set has a single class");
  Mlp model = init_model(config.shape, config.seed);
  Mlp m1 = zeros_like(model), m2 = zeros_like(model);
  std::mt19937_64 rng(config.seed ^ 0x5851F42D4C957F2Dull);
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  const auto x = data.matrix();
  const auto bs = static_cast<std::size_t>(config.batch_size);
  long step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double lr = config.learning_rate;
    for (int d : config.decay_epochs)
      if (epoch >= d) lr *= config.decay_factor;
    // Fisher-Yates with the kit's own uniform draw, so shuffles match across
    // standard libraries
    for (std::size_t i = order.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(unit(rng) * static_cast<double>(i));
      std::swap(order[i - 1], order[std::min(j, i - 1)]);
    }
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + bs);
      if (order.size() - end == 1) ++end;
      const auto n = static_cast<Eigen::Index>(end - start);
      Mlp::Matrix xb(x.rows(), n);
      std::vector<std::uint8_t> yb(static_cast<std::size_t>(n));
      for (Eigen::Index i = 0; i < n; ++i) {
        xb.col(i) = x.col(static_cast<Eigen::Index>(order[start + i]));
        yb[i] = data.y[order[start + i]];
      }
      Tape<float> tape;
      run(model, xb, NormMode::batch, tape);
      const auto g = backprop(model, tape, yb, NormMode::batch);
      loss_sum += g.loss * static_cast<double>(n);
      ++step;
      const float b1 = static_cast<float>(config.beta1), b2 = static_cast<float>(config.beta2);
      const float c1 = static_cast<float>(1.0 - std::pow(config.beta1, static_cast<double>(step)));
      const float c2 = static_cast<float>(1.0 - std::pow(config.beta2, static_cast<double>(step)));
      const float rate = static_cast<float>(lr), eps = static_cast<float>(config.adam_eps);
      const auto adam = [&](auto& param, auto& mom1, auto& mom2, const auto& grad) {
        mom1 = b1 * mom1 + (1.0f - b1) * grad;
        mom2 = b2 * mom2 + (1.0f - b2) * grad.cwiseProduct(grad);
        param.array() -= rate * (mom1.array() / c1) / ((mom2.array() / c2).sqrt() + eps);
      };
      const float unbiased = n > 1 ? static_cast<float>(n) / static_cast<float>(n - 1) : 1.0f;
      const auto mom = static_cast<float>(kNormMomentum);
      for (std::size_t l = 0; l < model.layers.size(); ++l) {
        auto& L = model.layers[l];
        const auto& G = g.grad.layers[l];
        adam(L.w, m1.layers[l].w, m2.layers[l].w, G.w);
        adam(L.b, m1.layers[l].b, m2.layers[l].b, G.b);
        if (l + 1 < model.layers.size()) {
          adam(L.gamma, m1.layers[l].gamma, m2.layers[l].gamma, G.gamma);
          adam(L.beta, m1.layers[l].beta, m2.layers[l].beta, G.beta);
          L.mean = (1.0f - mom) * L.mean + mom * tape.mean[l];
          L.var = (1.0f - mom) * L.var + mom * unbiased * tape.var[l];
        }
      }
      start = end;
    }
    EpochLog entry;
    entry.epoch = epoch + 1;
    entry.mean_loss = loss_sum / static_cast<double>(data.size());
    entry.heldout_accuracy = heldout ? accuracy(model, *heldout) : std::numeric_limits<double>::quiet_NaN();
    result.log.push_back(entry);
  }
  result.model = std::move(model);
  return result;
}

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log) {
  os << "epoch,mean_loss,heldout_accuracy\n";
  for (const auto& e : log) {
    os << e.epoch << ',' << e.mean_loss << ',';
    if (std::isnan(e.heldout_accuracy)) os << "n/a";
    else os << e.heldout_accuracy;
    os << '\n';
  }
}

namespace {

void put(io::Writer& w, const Mlp::Vector& v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) w.f32_raw(v[i]);
}

void get(io::Reader& r, Mlp::Vector& v, Eigen::Index n) {
  v.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) v[i] = r.f32();
}

}  // namespace

void write_model(std::ostream& os, const Mlp& model) {
  check_model(model.shape, model);
  io::Writer w(os);
  w.magic(kModelMagic);
  const auto& s = model.shape;
  for (int v : {s.input, s.width, s.layers, s.skip_from, s.skip_to}) w.u32(static_cast<std::uint32_t>(v));
  for (const auto& layer : model.layers) {
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r)
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) w.f32_raw(layer.w(r, c));
    put(w, layer.b);
    put(w, layer.gamma);
    put(w, layer.beta);
    put(w, layer.mean);
    put(w, layer.var);
  }
  w.check();
}

Mlp read_model(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kModelMagic);
  Mlp m;
  auto& s = m.shape;
  // cap sizes before allocating so a corrupt header cannot ask for gigabytes
  for (int* v : {&s.input, &s.width, &s.layers, &s.skip_from, &s.skip_to}) {
    const auto u = r.u32();
    if (u > (1u << 16)) throw Error("model: implausible dimension " + std::to_string(u));
    *v = static_cast<int>(u);
  }
  s.validate();
  for (int l = 0; l < s.layers; ++l) {
    const int in = l == 0 ? s.input : s.width;
    const int out = l == s.layers - 1 ? 1 : s.width;
    const int nf = l < s.layers - 1 ? out : 0;
    Mlp::Layer layer;
    layer.w.resize(out, in);
    for (int rr = 0; rr < out; ++rr)
      for (int c = 0; c < in; ++c) layer.w(rr, c) = r.f32();
    get(r, layer.b, out);
    get(r, layer.gamma, nf);
    get(r, layer.beta, nf);
    get(r, layer.mean, nf);
    get(r, layer.var, nf);
    if (!layer.w.allFinite() || !layer.b.allFinite() || !layer.gamma.allFinite() || !layer.beta.allFinite() ||
        !layer.mean.allFinite() || !layer.var.allFinite())
      throw Error("model: non-finite parameter in layer " + std::to_string(l + 1));
    m.layers.push_back(std::move(layer));
  }
  return m;
}

void write_model(const std::filesystem::path& path, const Mlp& model) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_model(os, model);
}

Mlp read_model(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_model(is);
}

void write_bank(std::ostream& os, const DecisionBank& bank) {
  io::Writer w(os);
  w.magic(kBankMagic);
  w.u32(static_cast<std::uint32_t>(bank.hand.size()));
  w.bytes(bank.hand);
  w.u32(static_cast<std::uint32_t>(bank.models.size()));
  for (const auto& [type, model] : bank.models) {
    w.u32(static_cast<std::uint32_t>(type));
    write_model(os, model);
  }
  w.check();
}

DecisionBank read_bank(std::istream& is) {
  io::Reader r(is);
  r.expect_magic(kBankMagic);
  DecisionBank bank;
  const auto name_len = r.u32();
  if (name_len > 4096) throw Error("bank: implausible hand name length");
  bank.hand = r.bytes(name_len);
  const auto count = r.u32();
  for (std::uint32_t k = 0; k < count; ++k) {
    const auto type = static_cast<int>(r.u32());
    if (!bank.models.emplace(type, read_model(is)).second)
      throw Error("bank: duplicate grasp type " + std::to_string(type));
  }
  return bank;
}

void write_bank(const std::filesystem::path& path, const DecisionBank& bank) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  write_bank(os, bank);
}

DecisionBank read_bank(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot open " + path.string());
  return read_bank(is);
}

namespace {

const Mlp& sub_model(const DecisionBank& bank, int grasp_type) {
  const auto it = bank.models.find(grasp_type);
  if (it == bank.models.end())
    throw Error("decision bank has no sub-model for grasp type " + std::to_string(grasp_type));
  return it->second;
}

}  // namespace

double decide(const DecisionBank& bank, const GraspCandidate& candidate, const Cgr& cgr) {
  const auto flat = cgr.flatten();
  return forward(sub_model(bank, candidate.grasp_type), flat);
}

std::vector<double> decide_batch(const DecisionBank& bank, int grasp_type, std::span<const Cgr* const> cgrs) {
  const Mlp& model = sub_model(bank, grasp_type);
  if (cgrs.empty()) return {};
  Mlp::Matrix x(model.shape.input, static_cast<Eigen::Index>(cgrs.size()));
  for (std::size_t i = 0; i < cgrs.size(); ++i) {
    const auto flat = cgrs[i]->flatten();
    if (static_cast<int>(flat.size()) != model.shape.input) throw Error("decide: CGR size does not match the model input");
    x.col(static_cast<Eigen::Index>(i)) = Eigen::Map<const Eigen::VectorXf>(flat.data(), model.shape.input);
  }
  const auto p = forward(model, x, NormMode::running);
  return std::vector<double>(p.data(), p.data() + p.size());
}

DecisionBank train_bank(const std::string& hand, const std::map<int, LabeledSet>& per_type, const TrainConfig& config,
                        std::map<int, TrainResult>* results) {
  std::vector<int> types;
  std::vector<const LabeledSet*> sets;
  for (const auto& [type, set] : per_type) {
    types.push_back(type);
    sets.push_back(&set);
  }
  std::vector<TrainResult> trained(types.size());
  parallel_for(types.size(), [&](std::size_t i) {
    TrainConfig c = config;
    c.seed = config.seed + static_cast<std::uint64_t>(types[i]);
    trained[i] = train(*sets[i], c);
  });
  DecisionBank bank;
  bank.hand = hand;
  for (std::size_t i = 0; i < types.size(); ++i) {
    bank.models.emplace(types[i], trained[i].model);
    if (results) (*results)[types[i]] = std::move(trained[i]);
  }
  return bank;
}

}  // namespace cgrkit
