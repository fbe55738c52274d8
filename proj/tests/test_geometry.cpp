#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "shelltrack/geometry.hpp"
#include "shelltrack/jets.hpp"
#include "shelltrack/rng.hpp"
#include "test_charts.hpp"

using namespace shelltrack;
namespace charts = shelltrack::testcharts;

TEST_CASE("covariant basis: flat, cylinder, scaled charts", "[geometry]") {
  {
    const auto jet = jet_eval(charts::flat(), {0.2, 0.7}, 1);
    const auto b = covariant_basis(jet.d1_col(0), jet.d1_col(1));
    CHECK(b.a1.x == 1.0);
    CHECK(b.a2.y == 1.0);
    CHECK(b.a3.z == Catch::Approx(1.0).margin(1e-15));
  }
  {
    const auto jet = jet_eval(charts::cylinder(), {0.0, 0.3}, 1);
    const auto b = covariant_basis(jet.d1_col(0), jet.d1_col(1));
    CHECK(b.a1.x == Catch::Approx(0.0).margin(1e-15));
    CHECK(b.a1.y == Catch::Approx(1.0).margin(1e-15));
    CHECK(b.a2.z == Catch::Approx(1.0).margin(1e-15));
    CHECK(b.a3.x == Catch::Approx(1.0).margin(1e-15));
  }
  {
    const auto jet = jet_eval(charts::scaled(2.0), {0.5, 0.5}, 1);
    const auto b = covariant_basis(jet.d1_col(0), jet.d1_col(1));
    CHECK(b.a1.x == 2.0);
  }
}

TEST_CASE("degenerate chart raises", "[geometry]") {
  auto collapsed = [](const auto& xi) {
    using S = std::decay_t<decltype(xi.x)>;
    return V3<S>{xi.x, xi.x, S(0.0)};  // a1 parallel to a2
  };
  const auto jet = jet_eval(collapsed, {0.1, 0.1}, 1);
  CHECK_THROWS_AS(covariant_basis(jet.d1_col(0), jet.d1_col(1)), DegenerateChartError);
}

TEST_CASE("metric and inverse: flat, scaled, cylinder", "[geometry]") {
  {
    const auto g = make_reference_geometry(jet_eval(charts::flat(), {0.3, 0.4}, 2));
    CHECK(g.a_lo.m11 == Catch::Approx(1.0).margin(1e-14));
    CHECK(g.a_lo.m12 == Catch::Approx(0.0).margin(1e-14));
    CHECK(g.a_lo.m22 == Catch::Approx(1.0).margin(1e-14));
    CHECK(g.sqrt_a == Catch::Approx(1.0).margin(1e-14));
  }
  {
    const auto g = make_reference_geometry(jet_eval(charts::scaled(2.0), {0.3, 0.4}, 2));
    CHECK(g.a_lo.m11 == Catch::Approx(4.0).margin(1e-14));
    CHECK(g.a_lo.m22 == Catch::Approx(1.0).margin(1e-14));
    CHECK(g.a_up.m11 == Catch::Approx(0.25).margin(1e-14));
    CHECK(g.a_up.m22 == Catch::Approx(1.0).margin(1e-14));
    CHECK(g.sqrt_a == Catch::Approx(2.0).margin(1e-14));
  }
  {
    const auto g = make_reference_geometry(jet_eval(charts::cylinder(), {0.8, -0.2}, 2));
    CHECK(g.a_lo.m11 == Catch::Approx(1.0).margin(1e-13));
    CHECK(g.a_lo.m12 == Catch::Approx(0.0).margin(1e-13));
    CHECK(g.a_lo.m22 == Catch::Approx(1.0).margin(1e-13));
  }
}

TEST_CASE("metric inverse identity and normal orthogonality", "[geometry]") {
  Rng rng(5);
  for (int trial = 0; trial < 50; ++trial) {
    const Vec2d xi{rng.uniform(-1, 1), rng.uniform(-1, 1)};
    const auto g = make_reference_geometry(jet_eval(charts::wavy(), xi, 2));
    // a_up * a_lo == identity
    const double i11 = g.a_up.m11 * g.a_lo.m11 + g.a_up.m12 * g.a_lo.m12;
    const double i12 = g.a_up.m11 * g.a_lo.m12 + g.a_up.m12 * g.a_lo.m22;
    const double i22 = g.a_up.m12 * g.a_lo.m12 + g.a_up.m22 * g.a_lo.m22;
    CHECK(i11 == Catch::Approx(1.0).margin(1e-12));
    CHECK(i12 == Catch::Approx(0.0).margin(1e-12));
    CHECK(i22 == Catch::Approx(1.0).margin(1e-12));
    CHECK(norm(g.a3) == Catch::Approx(1.0).margin(1e-12));
    CHECK(dot(g.a3, g.a1) == Catch::Approx(0.0).margin(1e-12));
    CHECK(dot(g.a3, g.a2) == Catch::Approx(0.0).margin(1e-12));
    CHECK(g.sqrt_a > 0.0);
    // contravariant basis duality a^a . a_b = delta
    CHECK(dot(g.a1_up, g.a1) == Catch::Approx(1.0).margin(1e-12));
    CHECK(dot(g.a1_up, g.a2) == Catch::Approx(0.0).margin(1e-12));
    CHECK(dot(g.a2_up, g.a2) == Catch::Approx(1.0).margin(1e-12));
  }
}

TEST_CASE("second fundamental form: flat, cylinder, paraboloid", "[geometry]") {
  {
    const auto g = make_reference_geometry(jet_eval(charts::flat(), {0.3, 0.4}, 2));
    CHECK(g.b_lo.m11 == 0.0);
    CHECK(g.b_lo.m12 == 0.0);
    CHECK(g.b_lo.m22 == 0.0);
  }
  {
    const auto g = make_reference_geometry(jet_eval(charts::cylinder(), {0.9, 0.1}, 2));
    CHECK(g.b_lo.m11 == Catch::Approx(-1.0).margin(1e-13));
    CHECK(g.b_lo.m12 == Catch::Approx(0.0).margin(1e-13));
    CHECK(g.b_lo.m22 == Catch::Approx(0.0).margin(1e-13));
  }
  {
    const double k = 0.37;
    const auto g = make_reference_geometry(jet_eval(charts::paraboloid(k), {0.0, 0.0}, 2));
    CHECK(g.b_lo.m11 == Catch::Approx(k).margin(1e-13));
    CHECK(g.b_lo.m12 == Catch::Approx(0.0).margin(1e-13));
    CHECK(g.b_lo.m22 == Catch::Approx(k).margin(1e-13));
  }
}

TEST_CASE("christoffel symbols: flat and polar charts", "[geometry]") {
  {
    const auto g = make_reference_geometry(jet_eval(charts::flat(), {0.3, 0.4}, 2));
    for (int l = 0; l < 2; ++l)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) CHECK(g.gamma(l, a, b) == Catch::Approx(0.0).margin(1e-14));
  }
  {
    const double r = 1.7;
    const auto g = make_reference_geometry(jet_eval(charts::polar(), {r, 0.6}, 2));
    CHECK(g.gamma(0, 1, 1) == Catch::Approx(-r).margin(1e-12));       // G^1_22 = -r
    CHECK(g.gamma(1, 0, 1) == Catch::Approx(1.0 / r).margin(1e-12));  // G^2_12 = 1/r
    // Symmetry in the lower indices is exact by construction (Sym2 storage).
    CHECK(g.gamma(0, 0, 1) == g.gamma(0, 1, 0));
    CHECK(g.gamma(1, 0, 1) == g.gamma(1, 1, 0));
  }
}

TEST_CASE("covariant derivative of a covector", "[geometry]") {
  {
    // Flat chart: reduces to plain partials.
    const auto g = make_reference_geometry(jet_eval(charts::flat(), {0.3, 0.4}, 2));
    Mat2d du;
    du(0, 0) = 1.0;
    du(0, 1) = 2.0;
    du(1, 0) = 3.0;
    du(1, 1) = 4.0;
    const Mat2d r = covariant_derivative_vector(V2<double>{0.5, -0.75}, du, g.gamma);
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 1) == 2.0);
    CHECK(r(1, 0) == 3.0);
    CHECK(r(1, 1) == 4.0);
  }
  {
    // Constant covector (1, 0) on the polar chart at r = 2:
    // u_2|_2 = -u_l G^l_22 = -1 * (-2) = 2.
    const auto g = make_reference_geometry(jet_eval(charts::polar(), {2.0, 0.3}, 2));
    Mat2d du{};  // constant field
    const Mat2d r = covariant_derivative_vector(V2<double>{1.0, 0.0}, du, g.gamma);
    CHECK(r(1, 1) == Catch::Approx(2.0).margin(1e-12));
  }
  {
    // Linear field u_a = xi^a on a flat chart: u_a|_b = delta_ab.
    const auto g = make_reference_geometry(jet_eval(charts::flat(), {0.1, 0.9}, 2));
    Mat2d du{};
    du(0, 0) = 1.0;
    du(1, 1) = 1.0;
    const Mat2d r = covariant_derivative_vector(V2<double>{0.1, 0.9}, du, g.gamma);
    CHECK(r(0, 0) == 1.0);
    CHECK(r(0, 1) == 0.0);
    CHECK(r(1, 0) == 0.0);
    CHECK(r(1, 1) == 1.0);
  }
}

TEST_CASE("covariant derivative of a 2-tensor", "[geometry]") {
  {
    // Flat chart: reduces to partials.
    const auto g = make_reference_geometry(jet_eval(charts::flat(), {0.5, 0.5}, 2));
    Mat2d phi;
    phi(0, 0) = 1.0;
    phi(0, 1) = -2.0;
    phi(1, 0) = 0.5;
    phi(1, 1) = 3.0;
    Mat2d dphi[2];
    dphi[0](0, 0) = 7.0;
    dphi[1](1, 1) = -4.0;
    Mat2d out[2];
    covariant_derivative_tensor(phi, dphi, g.gamma, out);
    CHECK(out[0](0, 0) == 7.0);
    CHECK(out[1](1, 1) == -4.0);
    CHECK(out[0](0, 1) == 0.0);
  }
  {
    // Constant phi on the polar chart: output equals the -phi*Gamma terms.
    const auto g = make_reference_geometry(jet_eval(charts::polar(), {1.5, 0.2}, 2));
    Mat2d phi;
    phi(0, 0) = 1.0;
    phi(0, 1) = 2.0;
    phi(1, 0) = -1.0;
    phi(1, 1) = 0.5;
    Mat2d dphi[2]{};
    Mat2d out[2];
    covariant_derivative_tensor(phi, dphi, g.gamma, out);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) {
          double expect = 0.0;
          for (int l = 0; l < 2; ++l)
            expect -= phi(l, b) * g.gamma(l, a, c) + phi(a, l) * g.gamma(l, b, c);
          CHECK(out[c](a, b) == Catch::Approx(expect).margin(1e-13));
        }
  }
}

TEST_CASE("covariant tensor derivative agrees with finite differences", "[geometry]") {
  // phi = curvature tensor field of a wavy chart; analytic partials come
  // from the ring geometry, the oracle differentiates b numerically.
  auto chart = charts::wavy();
  auto b_at = [&](const Vec2d& xi) {
    return make_reference_geometry(jet_eval(chart, xi, 2)).b_lo;
  };
  Rng rng(9);
  const double h = 1e-5;
  for (int trial = 0; trial < 20; ++trial) {
    const Vec2d xi{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    const auto g = make_reference_geometry(jet_eval(chart, xi, 2));

    // Analytic partials of b via the Tay3 ring package.
    V2<Tay3> seeded{Tay3::variable(xi.x, 0), Tay3::variable(xi.y, 1)};
    const auto ring = make_ring_geometry(chart(seeded));
    Mat2d dphi[2];
    for (int c = 0; c < 2; ++c) {
      dphi[c](0, 0) = tay_deriv(ring.b_lo.m11, c).value();
      dphi[c](0, 1) = tay_deriv(ring.b_lo.m12, c).value();
      dphi[c](1, 0) = dphi[c](0, 1);
      dphi[c](1, 1) = tay_deriv(ring.b_lo.m22, c).value();
    }
    Mat2d phi;
    phi(0, 0) = g.b_lo.m11;
    phi(0, 1) = phi(1, 0) = g.b_lo.m12;
    phi(1, 1) = g.b_lo.m22;
    Mat2d analytic[2];
    covariant_derivative_tensor(phi, dphi, g.gamma, analytic);

    // Finite-difference partials, same covariant rule.
    Mat2d dphi_fd[2];
    for (int c = 0; c < 2; ++c) {
      Vec2d xp = xi, xm = xi;
      xp[c] += h;
      xm[c] -= h;
      const Sym2d bp = b_at(xp), bm = b_at(xm);
      dphi_fd[c](0, 0) = (bp.m11 - bm.m11) / (2 * h);
      dphi_fd[c](0, 1) = dphi_fd[c](1, 0) = (bp.m12 - bm.m12) / (2 * h);
      dphi_fd[c](1, 1) = (bp.m22 - bm.m22) / (2 * h);
    }
    Mat2d oracle[2];
    covariant_derivative_tensor(phi, dphi_fd, g.gamma, oracle);

    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b)
          CHECK(analytic[c](a, b) == Catch::Approx(oracle[c](a, b)).margin(1e-6));
  }
}

TEST_CASE("metric compatibility: a_lo under the tensor rule vanishes", "[geometry]") {
  auto chart = charts::wavy(0.4);
  Rng rng(13);
  for (int trial = 0; trial < 30; ++trial) {
    const Vec2d xi{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    V2<Tay3> seeded{Tay3::variable(xi.x, 0), Tay3::variable(xi.y, 1)};
    const auto ring = make_ring_geometry(chart(seeded));
    Mat2d phi;
    phi(0, 0) = ring.a_lo.m11.value();
    phi(0, 1) = phi(1, 0) = ring.a_lo.m12.value();
    phi(1, 1) = ring.a_lo.m22.value();
    Mat2d dphi[2];
    for (int c = 0; c < 2; ++c) {
      dphi[c](0, 0) = tay_deriv(ring.a_lo.m11, c).value();
      dphi[c](0, 1) = dphi[c](1, 0) = tay_deriv(ring.a_lo.m12, c).value();
      dphi[c](1, 1) = tay_deriv(ring.a_lo.m22, c).value();
    }
    Christoffel<double> gamma;
    gamma.g[0] = {ring.gamma.g[0].m11.value(), ring.gamma.g[0].m12.value(),
                  ring.gamma.g[0].m22.value()};
    gamma.g[1] = {ring.gamma.g[1].m11.value(), ring.gamma.g[1].m12.value(),
                  ring.gamma.g[1].m22.value()};
    Mat2d out[2];
    covariant_derivative_tensor(phi, dphi, gamma, out);
    for (int c = 0; c < 2; ++c)
      for (int a = 0; a < 2; ++a)
        for (int b = 0; b < 2; ++b) CHECK(std::abs(out[c](a, b)) <= 1e-8);
  }
}

TEST_CASE("raising then lowering an index returns the original tensor", "[geometry]") {
  auto chart = charts::wavy(0.3);
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    const Vec2d xi{rng.uniform(-0.8, 0.8), rng.uniform(-0.8, 0.8)};
    const auto g = make_reference_geometry(jet_eval(chart, xi, 2));
    const Sym2d t{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1)};
    // raise both indices then lower both: T'' = a_lo a_lo T_up
    Sym2d up{};
    // T^{ab} = a^{ac} a^{bd} T_{cd}
    auto comp_up = [&](int a, int b) {
      double acc = 0;
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) acc += g.a_up(a, c) * g.a_up(b, d) * t(c, d);
      return acc;
    };
    up = {comp_up(0, 0), comp_up(0, 1), comp_up(1, 1)};
    auto comp_dn = [&](int a, int b) {
      double acc = 0;
      for (int c = 0; c < 2; ++c)
        for (int d = 0; d < 2; ++d) acc += g.a_lo(a, c) * g.a_lo(b, d) * up(c, d);
      return acc;
    };
    CHECK(comp_dn(0, 0) == Catch::Approx(t.m11).margin(1e-12));
    CHECK(comp_dn(0, 1) == Catch::Approx(t.m12).margin(1e-12));
    CHECK(comp_dn(1, 1) == Catch::Approx(t.m22).margin(1e-12));
  }
}
