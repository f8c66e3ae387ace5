#include <doctest.h>

#include <cmath>

#include "dctrain/eval.hpp"
#include "dctrain/grad.hpp"
#include "dctrain/graph_io.hpp"
#include "dctrain/rng.hpp"

using namespace dctrain;

namespace {

Tensor random_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(std::move(s));
  for (auto& x : t.data) x = rng.uniform(lo, hi);
  return t;
}

}  // namespace

TEST_CASE("eval basics") {
  SUBCASE("y = x^2 at x=3 is 9") {
    Graph g;
    g.mark_output("y", g.square(g.var("x", {})));
    CHECK(eval(g, {{"x", Tensor::scalar(3.0)}}).at("y").data[0] == 9.0);
  }
  SUBCASE("IRelu of a negative input is 0") {
    Graph g;
    g.mark_output("y", g.irelu(g.var("x", {})));
    CHECK(eval(g, {{"x", Tensor::scalar(-3.0)}}).at("y").data[0] == 0.0);
  }
  SUBCASE("identity matmul") {
    Graph g;
    NodeId w = g.constant(Tensor({2, 2}, {1, 0, 0, 1}));
    NodeId x = g.var("x", {2, 1});
    g.mark_output("y", g.matmul(w, x));
    auto y = eval(g, {{"x", Tensor({2, 1}, {2, 5})}}).at("y");
    CHECK(y.data == std::vector<double>{2, 5});
  }
}

TEST_CASE("eval error reporting") {
  Graph g;
  NodeId x = g.var("x", {2});
  g.mark_output("y", g.sum_all(g.square(x)));

  CHECK_THROWS_AS(eval(g, {}), EvalError);
  CHECK_THROWS_AS(eval(g, {{"x", Tensor::scalar(1.0)}}), EvalError);

  Graph h;
  h.mark_output("y", h.reciprocal(h.var("x", {})));
  try {
    eval(h, {{"x", Tensor::scalar(0.0)}});
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(e.node_id == 1);
  }
}

TEST_CASE("grad basics") {
  SUBCASE("d(x^2)/dx at 3 is 6") {
    Graph g;
    g.mark_output("y", g.square(g.var("x", {})));
    Graph dg = grad(g, "y", {"x"});
    CHECK(eval(dg, {{"x", Tensor::scalar(3.0)}}).at("dy/dx").data[0] == 6.0);
  }
  SUBCASE("IRelu twice differentiated is Heaviside") {
    Graph g;
    g.mark_output("y", g.irelu(g.var("x", {})));
    Graph d1 = grad(g, "y", {"x"});
    Graph d2 = grad(d1, "dy/dx", {"x"});
    CHECK(eval(d2, {{"x", Tensor::scalar(2.0)}}).at("ddy/dx/dx").data[0] == 1.0);
    CHECK(eval(d2, {{"x", Tensor::scalar(-2.0)}}).at("ddy/dx/dx").data[0] == 0.0);
  }
  SUBCASE("grad of non-scalar output is rejected") {
    Graph g;
    g.mark_output("y", g.square(g.var("x", {3})));
    CHECK_THROWS_AS(grad(g, "y", {"x"}), GraphError);
  }
  SUBCASE("unknown wrt variable is rejected") {
    Graph g;
    g.mark_output("y", g.sum_all(g.var("x", {3})));
    CHECK_THROWS_AS(grad(g, "y", {"z"}), GraphError);
  }
  SUBCASE("variable not on the path gets a zero gradient") {
    Graph g;
    g.var("z", {2});
    g.mark_output("y", g.sum_all(g.var("x", {3})));
    auto r = eval(grad(g, "y", {"z"}), {{"x", Tensor({3}, {1, 2, 3})}, {"z", Tensor({2})}});
    CHECK(r.at("dy/dz").data == std::vector<double>{0, 0});
  }
}

TEST_CASE("check_grad on simple functions") {
  SUBCASE("x^3 at 2") {
    Graph g;
    g.mark_output("y", g.pow_const(g.var("x", {}), 3.0));
    CHECK(check_grad(g, "y", "x", {{"x", Tensor::scalar(2.0)}}, 1e-5) < 1e-8);
  }
  SUBCASE("Relu away from the kink") {
    Graph g;
    g.mark_output("y", g.relu(g.var("x", {})));
    CHECK(check_grad(g, "y", "x", {{"x", Tensor::scalar(0.5)}}, 1e-6) < 1e-9);
  }
}

TEST_CASE("tanh MLP gradient w.r.t. weights matches finite differences") {
  Rng rng(11);
  for (int trial = 0; trial < 10; ++trial) {
    Graph g;
    NodeId w = g.var("W", {4, 3});
    NodeId x = g.var("x", {3, 2});
    g.mark_output("y", g.sum_all(g.tanh(g.matmul(w, x))));
    Bindings p{{"W", random_tensor({4, 3}, rng)}, {"x", random_tensor({3, 2}, rng)}};
    CHECK(check_grad(g, "y", "W", p, 1e-5) < 1e-5);
  }
}

TEST_CASE("matmul transpose variants differentiate correctly") {
  Rng rng(13);
  for (bool ta : {false, true})
    for (bool tb : {false, true}) {
      Graph g;
      NodeId a = g.var("A", ta ? Shape{3, 4} : Shape{4, 3});
      NodeId b = g.var("B", tb ? Shape{5, 3} : Shape{3, 5});
      g.mark_output("y", g.sum_all(g.square(g.matmul(a, b, ta, tb))));
      Bindings p{{"A", random_tensor(g.node(a).shape, rng)},
                 {"B", random_tensor(g.node(b).shape, rng)}};
      CHECK(check_grad(g, "y", "A", p, 1e-6) < 1e-6);
      CHECK(check_grad(g, "y", "B", p, 1e-6) < 1e-6);
    }
}

TEST_CASE("nested differentiation of tanh to third order") {
  // Build y = tanh(x), then scalarize each derivative order and compare the
  // next grad against finite differences of the previous-order graph.
  Graph g;
  g.mark_output("y", g.tanh(g.var("x", {})));
  Bindings p{{"x", Tensor::scalar(0.3)}};

  Graph d1 = grad(g, "y", {"x"});
  CHECK(check_grad(g, "y", "x", p, 1e-5) < 1e-8);
  Graph d2 = grad(d1, "dy/dx", {"x"});
  CHECK(check_grad(d1, "dy/dx", "x", p, 1e-5) < 1e-7);
  CHECK(check_grad(d2, "ddy/dx/dx", "x", p, 1e-4) < 1e-3);

  // Spot value: tanh'''(0.3) = -2 + 8*t^2 - 6*t^4 with t = tanh(0.3),
  // via differentiating 1 - t(x)^2 twice.
  Graph d3 = grad(d2, "ddy/dx/dx", {"x"});
  double t = std::tanh(0.3);
  double expect = -2.0 + 8.0 * t * t - 6.0 * t * t * t * t;
  double got = eval(d3, p).at("dddy/dx/dx/dx").data[0];
  CHECK(got == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("per-op derivative correctness at orders 1..3") {
  // Property: for each unary op, nested grad of sum(op(x)) matches central
  // finite differences of the previous-order graph at 100 random points.
  struct Case {
    Op op;
    double lo, hi;
    double tol1, tol2, tol3;
  };
  const Case cases[] = {
      {Op::Tanh, -2.0, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Square, -2.0, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Relu, 0.2, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::IRelu, 0.2, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Softplus, -2.0, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::ShiftedSoftplus, -2.0, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Silu, -2.0, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Reciprocal, 0.5, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Sqrt, 0.5, 2.0, 1e-5, 1e-4, 1e-3},
      {Op::Heaviside, 0.2, 2.0, 1e-5, 1e-4, 1e-3},
  };
  Rng rng(101);
  for (const Case& c : cases) {
    CAPTURE(op_name(c.op));
    Graph g;
    NodeId x = g.var("x", {100});
    g.mark_output("y", g.sum_all(g.unary(c.op, x)));
    Bindings p{{"x", random_tensor({100}, rng, c.lo, c.hi)}};

    CHECK(check_grad(g, "y", "x", p, 1e-6) < c.tol1);

    Graph d1 = grad(g, "y", {"x"});
    d1.mark_output("y1", d1.sum_all(d1.output("dy/dx")));
    CHECK(check_grad(d1, "y1", "x", p, 1e-5) < c.tol2);

    Graph d2 = grad(d1, "y1", {"x"});
    d2.mark_output("y2", d2.sum_all(d2.output("dy1/dx")));
    CHECK(check_grad(d2, "y2", "x", p, 1e-4) < c.tol3);
  }
}

TEST_CASE("closure: grad emits only ops from the node set") {
  Graph g;
  NodeId x = g.var("x", {4, 1});
  NodeId w = g.var("W", {3, 4});
  NodeId h = g.tanh(g.matmul(w, x));
  NodeId s = g.add(g.irelu(h), g.unary(Op::Silu, g.unary(Op::Softplus, h)));
  g.mark_output("y", g.sum_all(g.mul(s, g.sqrt(g.add(g.square(s), g.scalar(1.0))))));

  Graph d1 = grad(g, "y", {"x", "W"});
  d1.mark_output("y1", d1.sum_all(d1.output("dy/dx")));
  Graph d2 = grad(d1, "y1", {"x", "W"});
  for (std::size_t i = 0; i < d2.num_nodes(); ++i) {
    auto op = d2.node(static_cast<NodeId>(i)).op;
    CHECK(op_from_name(op_name(op)).has_value());
  }
}

TEST_CASE("linearity of grad") {
  // grad(a*f + b*g) == a*grad(f) + b*grad(g) pointwise.
  const double a = 2.5, b = -1.25;
  Rng rng(77);
  Graph gf;
  NodeId x = gf.var("x", {8});
  NodeId f = gf.sum_all(gf.tanh(x));
  NodeId gq = gf.sum_all(gf.square(x));
  gf.mark_output("f", f);
  gf.mark_output("g", gq);
  gf.mark_output("combo", gf.add(gf.scale(f, a), gf.scale(gq, b)));

  Graph d = grad(grad(grad(gf, "combo", {"x"}), "f", {"x"}), "g", {"x"});
  Bindings p{{"x", random_tensor({8}, rng)}};
  auto r = eval(d, p);
  for (std::size_t i = 0; i < 8; ++i) {
    double lhs = r.at("dcombo/dx").data[i];
    double rhs = a * r.at("df/dx").data[i] + b * r.at("dg/dx").data[i];
    CHECK(std::fabs(lhs - rhs) <= 1e-12 * std::max(1.0, std::fabs(rhs)));
  }
}

TEST_CASE("batch gradient equals stacked per-sample gradients") {
  Rng rng(5);
  Tensor w = random_tensor({4, 3}, rng);
  Tensor batch = random_tensor({6, 3}, rng);

  Graph g;
  NodeId xb = g.var("X", {6, 3});
  NodeId wv = g.var("W", {4, 3});
  g.mark_output("y", g.sum_all(g.tanh(g.matmul(xb, wv, false, true))));
  auto full = eval(grad(g, "y", {"X"}), {{"X", batch}, {"W", w}}).at("dy/dX");

  for (std::size_t i = 0; i < 6; ++i) {
    Graph s;
    NodeId xs = s.var("x", {1, 3});
    NodeId ws = s.var("W", {4, 3});
    s.mark_output("y", s.sum_all(s.tanh(s.matmul(xs, ws, false, true))));
    Tensor xi({1, 3}, {batch.at2(i, 0), batch.at2(i, 1), batch.at2(i, 2)});
    auto gi = eval(grad(s, "y", {"x"}), {{"x", xi}, {"W", w}}).at("dy/dx");
    for (std::size_t j = 0; j < 3; ++j) CHECK(full.at2(i, j) == gi.data[j]);
  }
}

TEST_CASE("evaluation is deterministic") {
  Rng rng(9);
  Graph g;
  NodeId x = g.var("x", {50, 7});
  NodeId w = g.var("W", {7, 7});
  g.mark_output("y", g.sum_all(g.irelu(g.matmul(x, w))));
  Graph d = grad(g, "y", {"W"});
  Bindings p{{"x", random_tensor({50, 7}, rng)}, {"W", random_tensor({7, 7}, rng)}};
  auto r1 = eval(d, p);
  auto r2 = eval(d, p);
  CHECK(r1.at("dy/dW").data == r2.at("dy/dW").data);
  CHECK(r1.at("y").data == r2.at("y").data);
}

TEST_CASE("graph JSON round-trip") {
  Graph g;
  NodeId x = g.var("x", {3, 1});
  NodeId w = g.var("W", {2, 3});
  NodeId y = g.sum_all(g.irelu(g.matmul(w, x)));
  g.mark_output("y", g.add(y, g.pow_const(g.sum_all(x), 3.0)));
  Graph d = grad(g, "y", {"x"});

  std::string j1 = graph_to_json(d);
  Graph back = graph_from_json(j1);
  CHECK(graph_to_json(back) == j1);

  Bindings p{{"x", Tensor({3, 1}, {0.3, -0.2, 0.9})}, {"W", Tensor({2, 3}, {1, 2, 3, 4, 5, 6})}};
  CHECK(eval(back, p).at("dy/dx").data == eval(d, p).at("dy/dx").data);
}
