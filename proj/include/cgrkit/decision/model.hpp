#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cgrkit/cgr/cgr.hpp"
#include "cgrkit/common.hpp"
#include "cgrkit/hand/hand.hpp"

namespace cgrkit {

/// Layer sizes of the decision network. Layers 1..layers-1 are hidden
/// (affine, normalization, ReLU); the output of hidden layer skip_from is
/// added to the input of layer skip_to; the last layer is one logistic unit.
struct ModelShape {
  int input = 480;
  int width = 1024;
  int layers = 7;
  int skip_from = 2;
  int skip_to = 5;

  void validate() const;
  bool operator==(const ModelShape&) const = default;
};

template <typename T>
struct BasicMlp {
  using Matrix = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
  using Vector = Eigen::Matrix<T, Eigen::Dynamic, 1>;

  struct Layer {
    Matrix w;  // out x in
    Vector b;
    // per-feature normalization, empty on the output layer
    Vector gamma, beta, mean, var;
  };

  ModelShape shape;
  std::vector<Layer> layers;

  template <typename U>
  BasicMlp<U> cast() const {
    BasicMlp<U> out;
    out.shape = shape;
    for (const auto& l : layers)
      out.layers.push_back({l.w.template cast<U>(), l.b.template cast<U>(), l.gamma.template cast<U>(),
                            l.beta.template cast<U>(), l.mean.template cast<U>(), l.var.template cast<U>()});
    return out;
  }
};

using Mlp = BasicMlp<float>;

/// Batch statistics (training) or running statistics (inference).
enum class NormMode { batch, running };

inline constexpr double kNormEps = 1e-5;
inline constexpr double kNormMomentum = 0.1;
inline constexpr double kProbClamp = 1e-7;

/// Uniform weights in +-1/sqrt(fan_in), zero biases, unit scale, zero shift,
/// running mean 0 and variance 1.
Mlp init_model(const ModelShape& shape, std::uint64_t seed);

/// Every parameter the optimizer touches, in file order:
/// per layer w (row-major), b, then gamma and beta on hidden layers.
template <typename T>
void for_each_trainable(BasicMlp<T>& model, const std::function<void(int layer, T& value)>& fn);

/// Columns of x are samples; returns one probability per column.
template <typename T>
typename BasicMlp<T>::Vector forward(const BasicMlp<T>& model,
                                     const typename BasicMlp<T>::Matrix& x, NormMode mode);
double forward(const Mlp& model, std::span<const float> x);

/// Mean binary cross-entropy with p clamped to [1e-7, 1 - 1e-7].
double bce_loss(std::span<const double> p, std::span<const std::uint8_t> y);

template <typename T>
struct Gradients {
  BasicMlp<T> grad;  // same layout as the model; mean and var unused
  double loss = 0.0;
};

/// Exact gradients of bce_loss(forward(model, x, mode), y).
template <typename T>
Gradients<T> gradients(const BasicMlp<T>& model, const typename BasicMlp<T>::Matrix& x,
                       std::span<const std::uint8_t> y, NormMode mode);

struct TrainConfig {
  ModelShape shape;
  int epochs = 20;
  int batch_size = 128;
  double learning_rate = 1e-4;
  std::vector<int> decay_epochs = {10, 15};  // lr halves once this many epochs are done
  double decay_factor = 0.5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 0;

  void validate() const;
};

/// Flattened CGRs stored column by column, with binary labels.
struct LabeledSet {
  int dim = 480;
  std::vector<float> values;
  std::vector<std::uint8_t> y;

  std::size_t size() const { return y.size(); }
  void append(std::span<const float> sample, bool label);
  Eigen::Map<const Eigen::MatrixXf> matrix() const {
    return {values.data(), dim, static_cast<Eigen::Index>(y.size())};
  }
};

struct EpochLog {
  int epoch = 0;
  double mean_loss = 0.0;
  double heldout_accuracy = 0.0;  // NaN without a held-out set
};

struct TrainResult {
  Mlp model;
  std::vector<EpochLog> log;
  std::vector<std::string> warnings;
};

/// Adam over seeded shuffles; batches of one sample join the previous batch
/// since their normalization statistics are degenerate.
TrainResult train(const LabeledSet& data, const TrainConfig& config, const LabeledSet* heldout = nullptr);

/// Fraction of samples whose inference-mode probability lands on the label's
/// side of 0.5.
double accuracy(const Mlp& model, const LabeledSet& data);

void write_train_log_csv(std::ostream& os, const std::vector<EpochLog>& log);

void write_model(std::ostream& os, const Mlp& model);
Mlp read_model(std::istream& is);
void write_model(const std::filesystem::path& path, const Mlp& model);
Mlp read_model(const std::filesystem::path& path);

/// One sub-model per grasp type of a hand.
struct DecisionBank {
  std::string hand;
  std::map<int, Mlp> models;
};

void write_bank(std::ostream& os, const DecisionBank& bank);
DecisionBank read_bank(std::istream& is);
void write_bank(const std::filesystem::path& path, const DecisionBank& bank);
DecisionBank read_bank(const std::filesystem::path& path);

/// Success probability of the candidate's grasp type on this CGR.
double decide(const DecisionBank& bank, const GraspCandidate& candidate, const Cgr& cgr);
/// Same as decide, for many CGRs scored by one sub-model in a single pass.
std::vector<double> decide_batch(const DecisionBank& bank, int grasp_type, std::span<const Cgr* const> cgrs);

/// Trains each grasp type's sub-model on its own slice, in parallel. Seeds
/// are config.seed + type id.
DecisionBank train_bank(const std::string& hand, const std::map<int, LabeledSet>& per_type, const TrainConfig& config,
                        std::map<int, TrainResult>* results = nullptr);

}  // namespace cgrkit
