#include <doctest.h>

#include "common/grad_suite.hpp"

TEST_CASE("op gradients match central differences") {
  for (const auto& c : grad_suite::op_cases()) {
    CAPTURE(c.name);
    const auto r = c.run();
    CAPTURE(r.worst);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("layer gradients match central differences") {
  for (const auto& c : grad_suite::layer_cases()) {
    CAPTURE(c.name);
    const auto r = c.run();
    CAPTURE(r.worst);
    CHECK(r.max_rel_error < 1e-5);
  }
}

TEST_CASE("composed model gradients match central differences (sampled)") {
  const auto r = grad_suite::model_check(4);
  CAPTURE(r.worst);
  CHECK(r.checked > 0);
  CHECK(r.max_rel_error < 1e-4);
}

TEST_CASE("tape rejects reuse after backward") {
  using namespace pancraft;
  Param<double> p("p", Tensor<double>(Shape{2}, 1.0));
  Tape<double> tape;
  Var<double> s = sum(tape.param(p));
  tape.backward(s);
  CHECK(p.grad[0] == 1.0);
  CHECK_THROWS(tape.backward(s));
  tape.reset();
  tape.backward(sum(scale(tape.param(p), 3.0)));
  CHECK(p.grad[1] == 4.0);
}
