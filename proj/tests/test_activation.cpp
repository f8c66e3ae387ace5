#include <doctest.h>

#include <cmath>

#include "dctrain/activation.hpp"
#include "dctrain/eval.hpp"
#include "dctrain/grad.hpp"

using namespace dctrain;

namespace {

// Composite-Simpson quadrature of ReLU over [0, x] (sign-aware), the
// independent oracle for the integral definition of IRelu.
double simpson_irelu(double x, int panels = 10000) {
  double h = x / panels;
  double acc = 0.0;
  auto relu = [](double t) { return t > 0.0 ? t : 0.0; };
  for (int i = 0; i < panels; ++i) {
    double a = i * h, b = a + h;
    acc += (b - a) / 6.0 * (relu(a) + 4.0 * relu(0.5 * (a + b)) + relu(b));
  }
  return acc;
}

}  // namespace

TEST_CASE("IRelu values") {
  CHECK(activation_apply(Activation::IRelu, 2.0) == 2.0);
  CHECK(activation_apply(Activation::IRelu, -3.0) == 0.0);
  CHECK(activation_apply(Activation::IRelu, 0.0) == 0.0);
}

TEST_CASE("IRelu matches Simpson quadrature of Relu") {
  for (double x : {-1.0, 0.5, 1.7, -10.0, 3.3, 10.0})
    CHECK(activation_apply(Activation::IRelu, x) == doctest::Approx(simpson_irelu(x)).epsilon(1e-8));
}

TEST_CASE("closed-form derivatives match finite differences") {
  const Activation all[] = {Activation::Tanh,     Activation::Relu,
                            Activation::IRelu,    Activation::Softplus,
                            Activation::ShiftedSoftplus, Activation::Silu};
  for (Activation a : all) {
    for (double x : {-1.7, -0.4, 0.3, 1.1, 2.6}) {
      double h = 1e-6;
      double fd1 = (activation_apply(a, x + h) - activation_apply(a, x - h)) / (2 * h);
      double fd2 =
          (activation_d1(a, x + h) - activation_d1(a, x - h)) / (2 * h);
      CHECK(activation_d1(a, x) == doctest::Approx(fd1).epsilon(1e-6));
      CHECK(activation_d2(a, x) == doctest::Approx(fd2).epsilon(1e-5));
    }
  }
}

TEST_CASE("graph IRelu derivative is exactly Relu, second exactly Heaviside") {
  Graph g;
  NodeId x = g.var("x", {2001});
  g.mark_output("y", g.sum_all(g.irelu(x)));
  Graph d1 = grad(g, "y", {"x"});
  d1.mark_output("y1", d1.sum_all(d1.output("dy/dx")));
  Graph d2 = grad(d1, "y1", {"x"});

  Tensor grid({2001});
  for (int i = 0; i <= 2000; ++i) grid.data[i] = -10.0 + 0.01 * i;
  Bindings p{{"x", grid}};
  auto r1 = eval(d1, p).at("dy/dx");
  auto r2 = eval(d2, p).at("dy1/dx");
  for (int i = 0; i <= 2000; ++i) {
    double x0 = grid.data[i];
    CHECK(r1.data[i] == activation_apply(Activation::Relu, x0));
    CHECK(r2.data[i] == (x0 > 0.0 ? 1.0 : 0.0));
  }
  // The x=0 convention: flat from the left.
  CHECK(r1.data[1000] == 0.0);
  CHECK(r2.data[1000] == 0.0);
}

TEST_CASE("update ratio") {
  CHECK(update_ratio(Activation::Relu, 1.0, 7.3) == 0.5);
  CHECK(update_ratio(Activation::IRelu, 1.0, 1.0) == doctest::Approx(1.0 / 3.0));
  CHECK(update_ratio(Activation::Tanh, 0.0, 5.0) == 0.5);
  CHECK_THROWS_AS(update_ratio(Activation::Relu, -1.0, 1.0), UndefinedRatioError);
}
