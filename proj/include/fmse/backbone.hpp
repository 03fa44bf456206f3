#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "fmse/types.hpp"

namespace fmse {

/// Activations a backbone keeps from a forward pass for its backward pass.
struct BackboneCache {
  virtual ~BackboneCache() = default;
};

/// Network contract F(x_in, y_in, t) -> output with the shape of x_in.
/// Parameters live in one flat vector so optimizers, EMA and checkpoints
/// can treat every backbone alike. Forward evaluation is const and
/// reentrant; only the trainer mutates parameters.
class Backbone {
 public:
  virtual ~Backbone() = default;

  CMatrix apply(const CMatrix& x_in, const CMatrix& y_in, double t) const {
    return forward(x_in, y_in, t, nullptr);
  }

  /// When `cache` is non-null it receives what backward() needs.
  virtual CMatrix forward(const CMatrix& x_in, const CMatrix& y_in, double t,
                          std::unique_ptr<BackboneCache>* cache) const = 0;

  /// Accumulates d(loss)/d(params) into grad_params given d(loss)/d(output)
  /// in the (d/dRe + i d/dIm) convention.
  virtual void backward(const BackboneCache& cache, const CMatrix& grad_out,
                        std::span<double> grad_params) const = 0;

  /// Architecture description sufficient to rebuild the network.
  virtual nlohmann::json architecture() const = 0;
  virtual std::unique_ptr<Backbone> clone() const = 0;

  std::size_t parameter_count() const noexcept { return params_.size(); }
  std::span<double> parameters() noexcept { return params_; }
  std::span<const double> parameters() const noexcept { return params_; }
  void set_parameters(std::span<const double> values);

 protected:
  std::vector<double> params_;
};

/// Sinusoidal embedding of a scalar time: [sin(w_k t), cos(w_k t)] with
/// frequencies geometrically spaced from 1 to 1000 rad per unit time.
struct TimeEmbedding {
  int dim = 16;

  std::vector<double> encode(double t) const;
};

/// Small convolutional encoder-decoder over stacked real/imaginary channels
/// of (x_in, y_in): 4 input channels, 2 output channels, stride-2 3x3
/// downsampling per level, nearest upsampling with additive skips, a time
/// bias at every stage and a 1x1 linear path from input to output whose
/// weights also depend on t (the flow targets scale x_t by functions of t,
/// which additive biases cannot express).
class ReferenceNet final : public Backbone {
 public:
  struct Options {
    int channels = 16;
    int depth = 2;
    int embedding_dim = 16;
    std::uint64_t seed = 0;
  };

  explicit ReferenceNet(const Options& options);

  CMatrix forward(const CMatrix& x_in, const CMatrix& y_in, double t,
                  std::unique_ptr<BackboneCache>* cache) const override;
  void backward(const BackboneCache& cache, const CMatrix& grad_out,
                std::span<double> grad_params) const override;
  nlohmann::json architecture() const override;
  std::unique_ptr<Backbone> clone() const override;

  const Options& options() const noexcept { return options_; }

  struct Layout;

 private:
  Options options_;
  std::shared_ptr<const Layout> layout_;
};

std::unique_ptr<Backbone> reference_net(int channels, int depth);

/// out = w0 * x_in + w1 * y_in. Two parameters; used for gradient checks.
class LinearBackbone final : public Backbone {
 public:
  LinearBackbone(double w_x = 0.0, double w_y = 0.0);

  CMatrix forward(const CMatrix& x_in, const CMatrix& y_in, double t,
                  std::unique_ptr<BackboneCache>* cache) const override;
  void backward(const BackboneCache& cache, const CMatrix& grad_out,
                std::span<double> grad_params) const override;
  nlohmann::json architecture() const override;
  std::unique_ptr<Backbone> clone() const override;
};

/// Parameter-free backbone wrapping an arbitrary callable (oracles, adapters
/// to external networks). Not differentiable.
class FunctionBackbone final : public Backbone {
 public:
  using Fn = std::function<CMatrix(const CMatrix& x_in, const CMatrix& y_in, double t)>;

  explicit FunctionBackbone(Fn fn) : fn_(std::move(fn)) {}

  CMatrix forward(const CMatrix& x_in, const CMatrix& y_in, double t,
                  std::unique_ptr<BackboneCache>* cache) const override;
  void backward(const BackboneCache& cache, const CMatrix& grad_out,
                std::span<double> grad_params) const override;
  nlohmann::json architecture() const override;
  std::unique_ptr<Backbone> clone() const override;

 private:
  Fn fn_;
};

using BackboneFactory = std::function<std::unique_ptr<Backbone>(const nlohmann::json&)>;

/// Makes make_backbone() build `type` (the "type" field of architecture())
/// with `factory`. Built-in types cannot be replaced.
void register_backbone(const std::string& type, BackboneFactory factory);

/// Rebuilds a backbone from architecture(); parameters are left at their
/// seeded initial values.
std::unique_ptr<Backbone> make_backbone(const nlohmann::json& architecture);

}  // namespace fmse
