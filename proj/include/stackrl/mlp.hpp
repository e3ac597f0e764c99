#pragma once

#include <cstdint>
#include <vector>

namespace stackrl {

/// One-hidden-layer tanh network with a flat parameter vector, laid out as
/// [W1 (hidden x in, row major), b1, W2 (out x hidden, row major), b2].
/// The functions are stateless so several owners can share the math.
struct MlpShape {
  int in = 0;
  int hidden = 0;
  int out = 0;

  int param_count() const { return hidden * in + hidden + out * hidden + out; }
};

/// Zero biases, Gaussian weights scaled by the square root of the fan-in.
void mlp_init(const MlpShape& shape, std::vector<double>& params,
              std::uint64_t seed);

/// Forward pass; hidden_buf receives the post-activation hidden layer so the
/// backward pass can reuse it.
void mlp_forward(const MlpShape& shape, const std::vector<double>& params,
                 const double* x, std::vector<double>& hidden_buf,
                 std::vector<double>& out);

/// Accumulates d(loss)/d(params) into dparams given d(loss)/d(out).
void mlp_backward(const MlpShape& shape, const std::vector<double>& params,
                  const double* x, const std::vector<double>& hidden_buf,
                  const std::vector<double>& dout, std::vector<double>& dparams);

/// Standard Adam in minimization form.
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  void step(std::vector<double>& params, const std::vector<double>& grad,
            double learning_rate);

 private:
  std::vector<double> m_;
  std::vector<double> v_;
  long t_ = 0;
};

}  // namespace stackrl
