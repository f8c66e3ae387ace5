#include "dctrain/activation.hpp"

#include <array>
#include <cmath>

namespace dctrain {

namespace {

constexpr std::array<const char*, 6> kNames = {"Tanh",     "Relu", "IRelu",
                                               "Softplus", "ShiftedSoftplus", "Silu"};

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

const char* activation_name(Activation a) { return kNames[static_cast<std::size_t>(a)]; }

std::optional<Activation> activation_from_name(const std::string& name) {
  for (std::size_t i = 0; i < kNames.size(); ++i)
    if (name == kNames[i]) return static_cast<Activation>(i);
  return std::nullopt;
}

Op activation_op(Activation a) {
  switch (a) {
    case Activation::Tanh: return Op::Tanh;
    case Activation::Relu: return Op::Relu;
    case Activation::IRelu: return Op::IRelu;
    case Activation::Softplus: return Op::Softplus;
    case Activation::ShiftedSoftplus: return Op::ShiftedSoftplus;
    case Activation::Silu: return Op::Silu;
  }
  throw GraphError("bad activation");
}

double activation_apply(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: return std::tanh(x);
    case Activation::Relu: return x > 0.0 ? x : 0.0;
    case Activation::IRelu: return x > 0.0 ? 0.5 * x * x : 0.0;
    case Activation::Softplus:
      return x > 0.0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x));
    case Activation::ShiftedSoftplus:
      return activation_apply(Activation::Softplus, x) - 0.6931471805599453094172321214582;
    case Activation::Silu: return x * sigmoid(x);
  }
  return 0.0;
}

double activation_d1(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: {
      double t = std::tanh(x);
      return 1.0 - t * t;
    }
    case Activation::Relu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::IRelu: return x > 0.0 ? x : 0.0;
    case Activation::Softplus:
    case Activation::ShiftedSoftplus: return sigmoid(x);
    case Activation::Silu: {
      double s = sigmoid(x);
      return s * (1.0 + x * (1.0 - s));
    }
  }
  return 0.0;
}

double activation_d2(Activation a, double x) {
  switch (a) {
    case Activation::Tanh: {
      double t = std::tanh(x);
      return -2.0 * t * (1.0 - t * t);
    }
    case Activation::Relu: return 0.0;
    case Activation::IRelu: return x > 0.0 ? 1.0 : 0.0;
    case Activation::Softplus:
    case Activation::ShiftedSoftplus: {
      double s = sigmoid(x);
      return s * (1.0 - s);
    }
    case Activation::Silu: {
      double s = sigmoid(x);
      double sp = s * (1.0 - s);
      return 2.0 * sp + x * sp * (1.0 - 2.0 * s);
    }
  }
  return 0.0;
}

double update_ratio(Activation a, double z, double g) {
  double d1 = activation_d1(a, z);
  if (d1 == 0.0)
    throw UndefinedRatioError(std::string("update_ratio undefined: ") + activation_name(a) +
                              "'(z) = 0 at z = " + std::to_string(z));
  return 1.0 / (2.0 + activation_d2(a, z) / d1 * g);
}

}  // namespace dctrain
