#include <doctest.h>

#include <cmath>

#include "signlab/neuron_flow.hpp"

using namespace signlab;

TEST_CASE("canonical teacher") {
  const Teacher t = Teacher::canonical(3, 2.0);
  CHECK(t.w == std::vector<double>{0.5, 0.0, 0.0});
  CHECK_THROWS(Teacher::canonical(0));
  CHECK_THROWS(Teacher::canonical(2, -1.0));
}

TEST_CASE("empirical gradients match finite differences") {
  const Teacher t = Teacher::canonical(3);
  const TeacherData data = sample_teacher_data(40, 3, t, 5);
  NeuronState s{0.7, {0.3, -0.4, 0.9}};
  double loss = 0.0;
  const NeuronGrad g = empirical_grads(s, data, &loss);
  CHECK(loss == doctest::Approx(neuron_loss(s, data)));
  const double h = 1e-6;
  NeuronState p = s, q = s;
  p.a += h;
  q.a -= h;
  CHECK(g.a == doctest::Approx((neuron_loss(p, data) - neuron_loss(q, data)) / (2 * h)).epsilon(1e-7));
  for (std::size_t j = 0; j < 3; ++j) {
    p = s;
    q = s;
    p.w[j] += h;
    q.w[j] -= h;
    CHECK(g.w[j] == doctest::Approx((neuron_loss(p, data) - neuron_loss(q, data)) / (2 * h)).epsilon(1e-7));
  }
}

TEST_CASE("loss is zero at the teacher") {
  const Teacher t = Teacher::canonical(2);
  const TeacherData data = sample_teacher_data(30, 2, t, 1);
  CHECK(neuron_loss({t.a, t.w}, data) == doctest::Approx(0.0));
}

TEST_CASE("population field scaling") {
  const PopulationField f{0.5, 1.0};
  const FieldValue std_f = population_field(-0.5, 0.8, f, 2.0, 1.0, FlowMethod::standard);
  CHECK(std_f.da == doctest::Approx(-0.5 * 0.8 * (-0.4 - 1.0)));
  CHECK(std_f.dw == doctest::Approx(-0.5 * -0.5 * (-0.4 - 1.0)));
  const FieldValue si = population_field(-0.5, 0.8, f, 2.0, 1.0, FlowMethod::sign_in);
  CHECK(si.da == doctest::Approx(std_f.da * std::sqrt(0.25 + 2.0)));
  CHECK(si.dw == doctest::Approx(std_f.dw * std::sqrt(0.64 + 1.0)));
  CHECK_THROWS(population_field(1.0, -0.1, f, 2.0, 1.0, FlowMethod::standard));
  CHECK(population_loss(1.0, 1.0, f) == doctest::Approx(0.0));
  CHECK(population_loss(1.0, -1.0, f) == doctest::Approx(0.5 * 0.5 * 2.0));
}

TEST_CASE("balanced init respects the quadrant and the balance") {
  for (Quadrant q : kQuadrants) {
    const NeuronState s = balanced_init(4, q, 17, 1.0);
    double norm = 0.0;
    for (double w : s.w) norm += w * w;
    CHECK(std::abs(s.a) == doctest::Approx(std::sqrt(norm)));
    const bool a_pos = q == Quadrant::pos_pos || q == Quadrant::pos_neg;
    const bool w_pos = q == Quadrant::pos_pos || q == Quadrant::neg_pos;
    CHECK((s.a > 0) == a_pos);
    CHECK((s.w[0] > 0) == w_pos);
  }
}

TEST_CASE("stable manifold direction is a unit vector") {
  const auto v = stable_manifold_direction(4.0, 1.0);
  CHECK(std::hypot(v[0], v[1]) == doctest::Approx(1.0));
  CHECK(v[0] / v[1] == doctest::Approx(-2.0));
  CHECK_THROWS(stable_manifold_direction(0.0, 1.0));
}

TEST_CASE("flows from representative quadrants") {
  NeuronFlowConfig c;
  c.d = 1;
  c.teacher = Teacher::canonical(1);
  c.max_time = 200.0;
  c.init = balanced_init(1, Quadrant::pos_pos, 3);
  CHECK(flow_integrate(c).outcome == Outcome::success);

  c.init = balanced_init(1, Quadrant::neg_pos, 3);
  CHECK(flow_integrate(c).outcome != Outcome::success);
  c.method = FlowMethod::sign_in;
  CHECK(flow_integrate(c).outcome == Outcome::success);

  c.init = balanced_init(1, Quadrant::pos_neg, 3);
  const FlowTrace t = flow_integrate(c);
  CHECK(t.outcome != Outcome::success);
  CHECK(t.final_state.w[0] <= 0.0);
}

TEST_CASE("flow trace recording") {
  NeuronFlowConfig c;
  c.init = balanced_init(1, Quadrant::pos_pos, 1);
  c.record_every = 10;
  c.max_time = 1.0;
  c.step = 0.01;
  const FlowTrace t = flow_integrate(c);
  CHECK(t.times.front() == 0.0);
  CHECK(t.times.size() == t.a.size());
  CHECK(t.times.size() == t.loss.size());
  CHECK(t.times.size() >= 10);
}

TEST_CASE("euler and rk4 agree for small steps") {
  NeuronFlowConfig c;
  c.n_samples.reset();
  c.init = {0.5, {0.4}};
  c.balanced_init = false;
  c.max_time = 2.0;
  c.step = 1e-4;
  c.integrator = Integrator::euler;
  const FlowTrace e = flow_integrate(c);
  c.integrator = Integrator::rk4;
  const FlowTrace r = flow_integrate(c);
  CHECK(e.final_state.a == doctest::Approx(r.final_state.a).epsilon(1e-3));
}

TEST_CASE("quadrant sweep is schedule independent") {
  QuadrantSweepConfig c;
  c.runs = 6;
  c.steps = 3000;
  const QuadrantResult s = quadrant_sweep(SweepMethod::sign_in, c, Execution::serial);
  const QuadrantResult p = quadrant_sweep(SweepMethod::sign_in, c, Execution::parallel);
  REQUIRE(s.runs.size() == p.runs.size());
  for (std::size_t i = 0; i < s.runs.size(); ++i) {
    CHECK(s.runs[i].a_final == p.runs[i].a_final);
    CHECK(s.runs[i].steps == p.runs[i].steps);
  }
  CHECK(s.success_fraction == p.success_fraction);
}

TEST_CASE("parsers") {
  CHECK(parse_flow_method("sign-in") == FlowMethod::sign_in);
  CHECK(parse_sweep_method("overparam+sign-in") == SweepMethod::overparam_sign_in);
  CHECK(parse_integrator("euler") == Integrator::euler);
  CHECK_THROWS(parse_flow_method("adam"));
  CHECK(to_string(Outcome::origin_collapse) == "origin-collapse");
  CHECK(to_string(Quadrant::neg_pos) == "a-w+");
}
