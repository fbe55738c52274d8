#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shelltrack/simulate.hpp"

using namespace shelltrack;

namespace {

ReferenceField flat_ref() {
  return ReferenceField::from_analytic(
      AnalyticChart{AnalyticChart::Kind::kFlatRectangle, ChartRect{0, 1, 0, 1}});
}

MaterialModel thick_sheet() {
  MaterialModel m;
  m.young = 1e4;
  m.poisson = 0.25;
  m.thickness = 0.01;
  m.density = 150.0;
  return m;
}

}  // namespace

TEST_CASE("force field validation", "[simulate]") {
  ForceField f;
  f.body_force = {0, 0, -1e-3};
  CHECK_THROWS_AS(f.validate(), ValidationError);
  f.pinned_edges = 0xF;
  CHECK_NOTHROW(f.validate());
  ForceField zero;
  CHECK_NOTHROW(zero.validate());
}

TEST_CASE("zero force, free boundary stays near the reference", "[simulate][slow]") {
  const auto ref = flat_ref();
  ForceField force;  // no load, no pins
  QuasistaticOptions opt;
  opt.field_config.hidden_layers = 2;
  opt.field_config.width = 16;
  opt.field_config.omega = 5.0;
  opt.field_config.seed = 5;
  opt.field_config.output_scale = 1e-4;
  opt.iterations = 300;
  opt.mc_samples = 64;
  opt.lr = 1e-4;
  const auto res = quasistatic_simulate(ref, thick_sheet(), force, opt);
  double max_u = 0.0;
  for (int i = 0; i <= 10; ++i)
    for (int j = 0; j <= 10; ++j) {
      const V3<double> u = res.field.displacement(V2<double>{i / 10.0, j / 10.0}, 1);
      max_u = std::max(max_u, norm(Vec3d{u.x, u.y, u.z}));
    }
  CHECK(max_u <= 1e-4);
}

TEST_CASE("pinned sheet sag is monotone in the load", "[simulate][slow]") {
  const auto ref = flat_ref();
  const MaterialModel mat = thick_sheet();
  double sags[3];
  const double loads[3] = {2e-5, 6e-5, 1.8e-4};
  for (int k = 0; k < 3; ++k) {
    ForceField force;
    force.body_force = {0, 0, -loads[k]};
    force.pinned_edges = 0xF;
    force.pin_full = true;
    QuasistaticOptions opt;
    opt.field_config.hidden_layers = 2;
    opt.field_config.width = 24;
    opt.field_config.omega = 5.0;
    opt.field_config.seed = 7;
    opt.field_config.output_scale = 0.0;
    opt.iterations = 500;
    opt.mc_samples = 96;
    opt.lr = 1e-5;
    const auto res = quasistatic_simulate(ref, mat, force, opt);
    const V3<double> uc = res.field.displacement(V2<double>{0.5, 0.5}, 1);
    sags[k] = -uc.z;
    CHECK(sags[k] > 0.0);
  }
  CHECK(sags[0] < sags[1]);
  CHECK(sags[1] < sags[2]);
}

TEST_CASE("energy log is non-increasing within the transient tolerance", "[simulate][slow]") {
  const auto ref = flat_ref();
  const MaterialModel mat = thick_sheet();
  ForceField force;
  force.body_force = {0, 0, -8e-5};
  force.pinned_edges = 0xF;
  QuasistaticOptions opt;
  opt.field_config.hidden_layers = 2;
  opt.field_config.width = 24;
  opt.field_config.omega = 5.0;
  opt.field_config.seed = 11;
  opt.field_config.output_scale = 0.0;
  opt.iterations = 600;
  opt.mc_samples = 96;
  opt.lr = 1e-5;
  opt.log_every = 50;
  const auto res = quasistatic_simulate(ref, mat, force, opt);
  REQUIRE(res.energy_log.size() >= 3);
  for (std::size_t i = 1; i < res.energy_log.size(); ++i) {
    const double prev = res.energy_log[i - 1].energy;
    const double cur = res.energy_log[i].energy;
    const double allowance = 0.01 * (std::abs(prev) + 1e-18);
    CHECK(cur <= prev + allowance);
  }
  CHECK(res.energy_log.back().energy < res.energy_log.front().energy);
}

TEST_CASE("runaway step size aborts with a divergence error", "[simulate][slow]") {
  const auto ref = flat_ref();
  MaterialModel mat = thick_sheet();
  mat.young = 1e9;  // stiff system plus a huge step size blows up quickly
  ForceField force;
  force.body_force = {0, 0, -10.0};
  force.pinned_edges = 0xF;
  QuasistaticOptions opt;
  opt.field_config.hidden_layers = 2;
  opt.field_config.width = 16;
  opt.field_config.omega = 30.0;
  opt.field_config.seed = 13;
  opt.field_config.output_scale = 1.0;
  opt.iterations = 400;
  opt.mc_samples = 16;
  opt.lr = 10.0;
  opt.log_every = 20;
  CHECK_THROWS_AS(quasistatic_simulate(ref, mat, force, opt), DivergenceError);
}
