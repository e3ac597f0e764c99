#include "stackrl/mlp.hpp"

#include <cmath>
#include <stdexcept>

#include "stackrl/rng.hpp"

namespace stackrl {

void mlp_init(const MlpShape& shape, std::vector<double>& params,
              std::uint64_t seed) {
  params.assign(static_cast<std::size_t>(shape.param_count()), 0.0);
  Rng rng(seed);
  auto gaussian = [&rng]() {
    double u1 = 1.0 - rng.uniform01();
    double u2 = rng.uniform01();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  };
  double w1_scale = 1.0 / std::sqrt(static_cast<double>(shape.in));
  double w2_scale = 1.0 / std::sqrt(static_cast<double>(shape.hidden));
  std::size_t idx = 0;
  for (int i = 0; i < shape.hidden * shape.in; ++i)
    params[idx++] = w1_scale * gaussian();
  idx += static_cast<std::size_t>(shape.hidden);
  for (int i = 0; i < shape.out * shape.hidden; ++i)
    params[idx++] = w2_scale * gaussian();
}

void mlp_forward(const MlpShape& shape, const std::vector<double>& params,
                 const double* x, std::vector<double>& hidden_buf,
                 std::vector<double>& out) {
  const double* w1 = params.data();
  const double* b1 = w1 + shape.hidden * shape.in;
  const double* w2 = b1 + shape.hidden;
  const double* b2 = w2 + shape.out * shape.hidden;

  hidden_buf.assign(static_cast<std::size_t>(shape.hidden), 0.0);
  for (int h = 0; h < shape.hidden; ++h) {
    double acc = b1[h];
    const double* row = w1 + static_cast<std::size_t>(h) * shape.in;
    for (int i = 0; i < shape.in; ++i) acc += row[i] * x[i];
    hidden_buf[static_cast<std::size_t>(h)] = std::tanh(acc);
  }
  out.assign(static_cast<std::size_t>(shape.out), 0.0);
  for (int o = 0; o < shape.out; ++o) {
    double acc = b2[o];
    const double* row = w2 + static_cast<std::size_t>(o) * shape.hidden;
    for (int h = 0; h < shape.hidden; ++h)
      acc += row[h] * hidden_buf[static_cast<std::size_t>(h)];
    out[static_cast<std::size_t>(o)] = acc;
  }
}

void mlp_backward(const MlpShape& shape, const std::vector<double>& params,
                  const double* x, const std::vector<double>& hidden_buf,
                  const std::vector<double>& dout,
                  std::vector<double>& dparams) {
  if (dparams.size() != params.size())
    throw std::invalid_argument("mlp_backward: gradient buffer size mismatch");
  const double* w2 = params.data() + shape.hidden * shape.in + shape.hidden;
  double* dw1 = dparams.data();
  double* db1 = dw1 + shape.hidden * shape.in;
  double* dw2 = db1 + shape.hidden;
  double* db2 = dw2 + shape.out * shape.hidden;

  std::vector<double> dhidden(static_cast<std::size_t>(shape.hidden), 0.0);
  for (int o = 0; o < shape.out; ++o) {
    double g = dout[static_cast<std::size_t>(o)];
    if (g == 0.0) continue;
    db2[o] += g;
    const double* row = w2 + static_cast<std::size_t>(o) * shape.hidden;
    double* drow = dw2 + static_cast<std::size_t>(o) * shape.hidden;
    for (int h = 0; h < shape.hidden; ++h) {
      drow[h] += g * hidden_buf[static_cast<std::size_t>(h)];
      dhidden[static_cast<std::size_t>(h)] += g * row[h];
    }
  }
  for (int h = 0; h < shape.hidden; ++h) {
    double hv = hidden_buf[static_cast<std::size_t>(h)];
    double g = dhidden[static_cast<std::size_t>(h)] * (1.0 - hv * hv);
    if (g == 0.0) continue;
    db1[h] += g;
    double* drow = dw1 + static_cast<std::size_t>(h) * shape.in;
    for (int i = 0; i < shape.in; ++i) drow[i] += g * x[i];
  }
}

void Adam::step(std::vector<double>& params, const std::vector<double>& grad,
                double learning_rate) {
  if (grad.size() != params.size())
    throw std::invalid_argument("Adam::step: gradient size mismatch");
  if (m_.size() != params.size()) {
    m_.assign(params.size(), 0.0);
    v_.assign(params.size(), 0.0);
    t_ = 0;
  }
  ++t_;
  double bc1 = 1.0 - std::pow(beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params.size(); ++i) {
    m_[i] = beta1 * m_[i] + (1.0 - beta1) * grad[i];
    v_[i] = beta2 * v_[i] + (1.0 - beta2) * grad[i] * grad[i];
    double mhat = m_[i] / bc1;
    double vhat = v_[i] / bc2;
    params[i] -= learning_rate * mhat / (std::sqrt(vhat) + epsilon);
  }
}

}  // namespace stackrl
