#pragma once

#include <rfl/fl/data.hpp>

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

namespace rfl::fl {

enum class ModelKind { logistic, small_mlp, cnn6 };

ModelKind model_kind_from_string(const std::string& s);
std::string to_string(ModelKind k);

/// Classifier with a flat parameter vector and mean cross-entropy loss.
class Model {
 public:
  virtual ~Model() = default;
  [[nodiscard]] virtual ModelKind kind() const = 0;
  [[nodiscard]] virtual int num_params() const = 0;
  [[nodiscard]] virtual RVec initial_params(std::uint64_t seed) const = 0;
  /// Logits, one row per sample of x.
  [[nodiscard]] virtual RMat logits(const RVec& q, const RMat& x) const = 0;
  /// Mean cross-entropy over the rows of x; fills grad when non-null.
  virtual double loss_grad(const RVec& q, const RMat& x, const std::vector<int>& y, RVec* grad) const = 0;
};

/// hidden is used by small_mlp only; cnn6 expects square single-channel
/// images whose side is a multiple of 4 (28 x 28 gives 1,663,370 parameters).
std::unique_ptr<Model> make_model(ModelKind kind, int num_features, int num_classes, int hidden = 32);

/// Mean cross-entropy of softmax(logits) and its gradient w.r.t. the logits.
double softmax_cross_entropy(const RMat& logits, const std::vector<int>& y, RMat* dlogits);

struct EvalResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

EvalResult evaluate(const Model& m, const RVec& q, const Dataset& data);

struct LocalUpdate {
  RVec q;
  int steps = 0;
  bool empty_data = false;  // nothing to train on; q is the input unchanged
};

/// Minibatch SGD: `epochs` passes over shuffled data (or exactly `max_steps`
/// steps when positive), q <- q - lr * grad.
LocalUpdate local_update(const Model& m, const RVec& q_init, const Dataset& data, double lr, int epochs,
                         int batch_size, std::uint64_t seed, int max_steps = 0);

}  // namespace rfl::fl
