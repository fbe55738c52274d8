#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>

#include "shelltrack/splat.hpp"
#include "shelltrack/splat_grad.hpp"

using namespace shelltrack;

namespace {

Camera test_camera(int size = 32, double fx = 40.0, double dist = 2.0) {
  return make_topdown_camera(size, size, fx, 0.5, 0.5, dist);
}

GaussianCloud single_gaussian(const Vec3d& pos, double s = 0.05, double opacity = 1.0,
                              const Vec3d& color = {1, 1, 1}) {
  GaussianCloud c;
  c.positions = {pos};
  c.rotations = {Mat3d::identity()};
  c.scales = {{s, s, 1e-5}};
  c.opacities = {opacity};
  c.colors = {color};
  return c;
}

GaussianCloud random_cloud(Rng& rng, int n, double opacity_max = 0.9) {
  GaussianCloud c;
  for (int i = 0; i < n; ++i) {
    c.positions.push_back({rng.uniform(0.2, 0.8), rng.uniform(0.2, 0.8), rng.uniform(-0.1, 0.1)});
    const double a1 = rng.uniform(0, 6.28), a2 = rng.uniform(-1, 1);
    // Random rotation from two Givens-style factors (orthonormal by construction).
    Mat3d r = Mat3d::identity();
    r(0, 0) = std::cos(a1);
    r(0, 1) = -std::sin(a1);
    r(1, 0) = std::sin(a1);
    r(1, 1) = std::cos(a1);
    Mat3d r2 = Mat3d::identity();
    r2(1, 1) = std::cos(a2);
    r2(1, 2) = -std::sin(a2);
    r2(2, 1) = std::sin(a2);
    r2(2, 2) = std::cos(a2);
    c.rotations.push_back(r * r2);
    c.scales.push_back({rng.uniform(0.02, 0.08), rng.uniform(0.02, 0.08), 1e-5});
    c.opacities.push_back(rng.uniform(0.2, opacity_max));
    c.colors.push_back({rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});
  }
  return c;
}

}  // namespace

TEST_CASE("anchor sampling: single, blue-noise spacing, determinism", "[splat]") {
  const ChartRect bounds{0, 1, 0, 1};
  {
    Rng rng(3);
    const SurfaceBinding b = sample_template_gaussians(bounds, 1, rng);
    REQUIRE(b.size() == 1);
    CHECK(bounds.contains(b.anchors[0]));
  }
  {
    Rng rng(5);
    const SurfaceBinding b = sample_template_gaussians(bounds, 1000, rng);
    REQUIRE(b.size() == 1000);
    const double min_dist = 0.5 / std::sqrt(1000.0);
    long long violations = 0, pairs = 0;
    for (std::size_t i = 0; i < b.size(); ++i)
      for (std::size_t j = i + 1; j < b.size(); ++j) {
        const double dx = b.anchors[i].x - b.anchors[j].x;
        const double dy = b.anchors[i].y - b.anchors[j].y;
        ++pairs;
        if (dx * dx + dy * dy < min_dist * min_dist) ++violations;
      }
    INFO("violations " << violations << " of " << pairs);
    CHECK(static_cast<double>(violations) <= 0.01 * static_cast<double>(pairs));
  }
  {
    Rng a(7), b(7);
    const SurfaceBinding ba = sample_template_gaussians(bounds, 200, a);
    const SurfaceBinding bb = sample_template_gaussians(bounds, 200, b);
    REQUIRE(ba.size() == bb.size());
    for (std::size_t i = 0; i < ba.size(); ++i) {
      CHECK(ba.anchors[i].x == bb.anchors[i].x);
      CHECK(ba.anchors[i].y == bb.anchors[i].y);
    }
  }
}

TEST_CASE("binding: identity frames on the flat chart, translation at t=2", "[splat]") {
  const auto ref = ReferenceField::from_analytic(
      AnalyticChart{AnalyticChart::Kind::kFlatRectangle, ChartRect{0, 1, 0, 1}});
  Rng rng(11);
  SurfaceBinding binding = sample_template_gaussians(ref.bounds, 50, rng);
  binding.normal_scale = 1e-5;
  bind_reference(binding, ref);

  SirenConfig cfg;
  cfg.hidden_layers = 1;
  cfg.width = 8;
  cfg.input_dim = 3;
  cfg.seed = 1;
  cfg.output_scale = 0.0;
  DeformationField field{siren_init(cfg), 2, TemporalMode::kOffsetVelocity, 0.4,
                         ref.bounds};
  // Plant a constant translation in the final bias.
  const Vec3d shift{0.07, -0.02, 0.11};
  const std::size_t n = field.net.params.size();
  field.net.params[n - 3] = shift.x;
  field.net.params[n - 2] = shift.y;
  field.net.params[n - 1] = shift.z;

  const GaussianCloud c1 = bind_gaussians(binding, ref, field, 1);
  for (std::size_t i = 0; i < c1.size(); ++i) {
    CHECK(c1.positions[i].z == Catch::Approx(shift.z).margin(1e-12));
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc)
        CHECK(c1.rotations[i](r, cc) == Catch::Approx(r == cc ? 1.0 : 0.0).margin(1e-12));
    CHECK(c1.scales[i].z == 1e-5);
  }

  // Momentum mode: t=1 sits on the template plane, t=2 shifts, frames share rotations.
  DeformationField momentum = field;
  momentum.mode = TemporalMode::kMomentum;
  const GaussianCloud m1 = bind_gaussians(binding, ref, momentum, 1);
  const GaussianCloud m2 = bind_gaussians(binding, ref, momentum, 2);
  for (std::size_t i = 0; i < m1.size(); ++i) {
    CHECK(m1.positions[i].z == 0.0);
    CHECK(norm(m2.positions[i] - m1.positions[i] - shift) <= 1e-12);
    for (int r = 0; r < 3; ++r)
      for (int cc = 0; cc < 3; ++cc) CHECK(m2.rotations[i](r, cc) == m1.rotations[i](r, cc));
  }
}

TEST_CASE("projection: on-axis mean, depth scaling, culling", "[splat]") {
  const Camera cam = test_camera(64, 80.0, 2.0);
  {
    const auto p = project_gaussian({0.5, 0.5, 0.0}, Mat3d::identity(), {0.03, 0.03, 0.03}, cam);
    REQUIRE_FALSE(p.culled);
    CHECK(p.mean.x == Catch::Approx(cam.cx).margin(1e-12));
    CHECK(p.mean.y == Catch::Approx(cam.cy).margin(1e-12));
  }
  {
    // Doubling the depth halves the projected standard deviation.
    const auto pa = project_gaussian({0.5, 0.5, 0.0}, Mat3d::identity(), {0.03, 0.03, 0.03}, cam);
    const auto pb = project_gaussian({0.5, 0.5, -2.0}, Mat3d::identity(), {0.03, 0.03, 0.03}, cam);
    const double sa = std::sqrt(pa.cov[0] - kCovRegularization);
    const double sb = std::sqrt(pb.cov[0] - kCovRegularization);
    CHECK(sb / sa == Catch::Approx(0.5).margin(1e-6));
  }
  {
    const auto p = project_gaussian({0.5, 0.5, 3.0}, Mat3d::identity(), {0.03, 0.03, 0.03}, cam);
    CHECK(p.culled);  // behind the camera (z_cam = -1)
  }
}

TEST_CASE("render: empty cloud, opaque center, painter order", "[splat]") {
  const Camera cam = test_camera();
  const Vec3d bg{0.1, 0.2, 0.3};
  {
    const RenderOutput out = render(GaussianCloud{}, cam, bg);
    for (int i = 0; i < out.image.pixels(); ++i) {
      CHECK(out.image.at(i).x == Catch::Approx(bg.x).margin(1e-12));
      CHECK(out.image.at(i).y == Catch::Approx(bg.y).margin(1e-12));
    }
    for (float a : out.alpha.data) CHECK(a == 0.0f);
  }
  {
    // Wide enough that the half-pixel offset of the center pixel is
    // negligible against the footprint.
    const GaussianCloud c = single_gaussian({0.5, 0.5, 0.0}, 1.2, 1.0, {1, 1, 1});
    const RenderOutput out = render(c, cam, {0, 0, 0});
    const int cxp = cam.width / 2, cyp = cam.height / 2;
    CHECK(out.image.at(cxp, cyp).x >= 0.999);
    CHECK(out.alpha.at(cxp, cyp) >= 0.999f);
  }
  {
    GaussianCloud c = single_gaussian({0.5, 0.5, 0.5}, 1.2, 1.0, {1, 0, 0});  // red, nearer
    const GaussianCloud blue = single_gaussian({0.5, 0.5, 0.0}, 1.2, 1.0, {0, 0, 1});
    c.positions.push_back(blue.positions[0]);
    c.rotations.push_back(blue.rotations[0]);
    c.scales.push_back(blue.scales[0]);
    c.opacities.push_back(blue.opacities[0]);
    c.colors.push_back(blue.colors[0]);
    const RenderOutput out = render(c, cam, {0, 0, 0});
    const Vec3d center = out.image.at(cam.width / 2, cam.height / 2);
    CHECK(center.x >= 0.999);
    CHECK(center.z <= 1e-3);
  }
}

TEST_CASE("render: non-finite parameters name the offending index", "[splat]") {
  GaussianCloud c = single_gaussian({0.5, 0.5, 0.0});
  c.positions.push_back({0.5, 0.5, std::nan("")});
  c.rotations.push_back(Mat3d::identity());
  c.scales.push_back({0.01, 0.01, 1e-5});
  c.opacities.push_back(0.5);
  c.colors.push_back({1, 1, 1});
  try {
    render(c, test_camera(), {0, 0, 0});
    FAIL("expected NonFiniteError");
  } catch (const NonFiniteError& e) {
    CHECK(std::string(e.what()).find("1") != std::string::npos);
  }
}

TEST_CASE("render: invariant to Gaussian input order", "[splat]") {
  Rng rng(17);
  const Camera cam = test_camera(48);
  GaussianCloud c = random_cloud(rng, 20);
  const RenderOutput a = render(c, cam, {0.2, 0.2, 0.2});

  // Reverse the storage order; depths are generic so the internal sort
  // restores the same composite sequence.
  GaussianCloud r;
  for (int i = static_cast<int>(c.size()) - 1; i >= 0; --i) {
    r.positions.push_back(c.positions[i]);
    r.rotations.push_back(c.rotations[i]);
    r.scales.push_back(c.scales[i]);
    r.opacities.push_back(c.opacities[i]);
    r.colors.push_back(c.colors[i]);
  }
  const RenderOutput b = render(r, cam, {0.2, 0.2, 0.2});
  CHECK(a.image.data == b.image.data);
  CHECK(a.alpha.data == b.alpha.data);
}

TEST_CASE("render: alpha in range, adding a Gaussian never lowers alpha", "[splat][slow]") {
  Rng rng(23);
  const Camera cam = test_camera(16);
  for (int scene = 0; scene < 10000; ++scene) {
    GaussianCloud c = random_cloud(rng, 1 + static_cast<int>(rng.index(6)), 0.8);
    const RenderOutput out = render(c, cam, {0, 0, 0});
    for (float a : out.alpha.data) {
      CHECK(a >= 0.0f);
      CHECK(a <= 1.0f);
    }
    if (scene % 100 == 0) {
      GaussianCloud bigger = c;
      bigger.positions.push_back({0.5, 0.5, 0.05});
      bigger.rotations.push_back(Mat3d::identity());
      bigger.scales.push_back({0.05, 0.05, 1e-5});
      bigger.opacities.push_back(0.6);
      bigger.colors.push_back({1, 0, 0});
      const RenderOutput out2 = render(bigger, cam, {0, 0, 0});
      for (int i = 0; i < out.alpha.pixels(); ++i) CHECK(out2.alpha.data[i] >= out.alpha.data[i]);
    }
  }
}

TEST_CASE("normal-scale pinning bounds the support along the frame normal", "[splat]") {
  const double eps = 1e-5;
  GaussianCloud c = single_gaussian({0.5, 0.5, 0.0}, 0.05, 0.9);
  c.scales[0].z = eps;
  // Quadratic form of Sigma3D along the normal column equals eps^2.
  const Vec3d n = c.rotations[0].col(2);
  double extent = 0.0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      double sig = 0.0;
      for (int k = 0; k < 3; ++k)
        sig += c.rotations[0](a, k) * c.scales[0][k] * c.scales[0][k] * c.rotations[0](b, k);
      extent += n[a] * sig * n[b];
    }
  CHECK(3.0 * std::sqrt(extent) <= 3.0 * eps + 1e-15);
}

TEST_CASE("renderer gradients match finite differences", "[splat][slow]") {
  Rng rng(31);
  const Camera cam = test_camera(32, 40.0, 2.0);
  const Vec3d bg{0.15, 0.1, 0.2};
  GaussianCloud cloud = random_cloud(rng, 8, 0.85);

  // A fixed random target image.
  ImageRGB target(cam.width, cam.height);
  for (int i = 0; i < target.pixels(); ++i)
    target.set(i, {rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 1)});

  GaussianGrads grads;
  const double loss0 = render_l1_backward(cloud, cam, bg, target, grads);
  CHECK(loss0 == Catch::Approx(render_l1(cloud, cam, bg, target)).margin(1e-6));

  // The finite-difference oracle needs the double-precision loss path;
  // render_l1 goes through float image storage, which h = 1e-6 probing
  // cannot tolerate.
  const double h = 1e-6;
  GaussianGrads scratch;
  auto loss_of = [&](const GaussianCloud& c) {
    return render_l1_backward(c, cam, bg, target, scratch);
  };

  int probes = 0;
  for (int g = 0; g < 8 && probes < 40; ++g) {
    // Positions.
    for (int k = 0; k < 3; ++k) {
      GaussianCloud cp = cloud, cm = cloud;
      cp.positions[g][k] += h;
      cm.positions[g][k] -= h;
      const double fd = (loss_of(cp) - loss_of(cm)) / (2 * h);
      const double an = grads.d_position[g][k];
      if (std::abs(fd) < 1e-7) continue;  // skip vanishing directions
      const double rel = std::abs(an - fd) / (std::abs(fd) + 1e-12);
      INFO("gaussian " << g << " pos axis " << k << " an " << an << " fd " << fd);
      CHECK(rel <= 1e-3);
      ++probes;
    }
    // Tangent scales via the covariance chain.
    for (int k = 0; k < 2; ++k) {
      GaussianCloud cp = cloud, cm = cloud;
      cp.scales[g][k] += h;
      cm.scales[g][k] -= h;
      const double fd = (loss_of(cp) - loss_of(cm)) / (2 * h);
      const double an = chain_scale_grad(&grads.d_cov3d[6 * g], cloud.rotations[g],
                                         cloud.scales[g], k);
      if (std::abs(fd) < 1e-7) continue;
      const double rel = std::abs(an - fd) / (std::abs(fd) + 1e-12);
      INFO("gaussian " << g << " scale axis " << k << " an " << an << " fd " << fd);
      CHECK(rel <= 1e-3);
      ++probes;
    }
    // Opacity and color.
    {
      GaussianCloud cp = cloud, cm = cloud;
      cp.opacities[g] += h;
      cm.opacities[g] -= h;
      const double fd = (loss_of(cp) - loss_of(cm)) / (2 * h);
      if (std::abs(fd) >= 1e-7) {
        const double rel = std::abs(grads.d_opacity[g] - fd) / (std::abs(fd) + 1e-12);
        CHECK(rel <= 1e-3);
        ++probes;
      }
    }
    {
      GaussianCloud cp = cloud, cm = cloud;
      cp.colors[g].y += h;
      cm.colors[g].y -= h;
      const double fd = (loss_of(cp) - loss_of(cm)) / (2 * h);
      if (std::abs(fd) >= 1e-7) {
        const double rel = std::abs(grads.d_color[g].y - fd) / (std::abs(fd) + 1e-12);
        CHECK(rel <= 1e-3);
        ++probes;
      }
    }
  }
  CHECK(probes >= 20);
}

TEST_CASE("render_l1_backward is deterministic across thread counts", "[splat]") {
  Rng rng(37);
  const Camera cam = test_camera(32);
  GaussianCloud cloud = random_cloud(rng, 12);
  ImageRGB target(cam.width, cam.height);
  for (int i = 0; i < target.pixels(); ++i) target.set(i, {0.4, 0.5, 0.6});

  GaussianGrads g1, g4;
  const double l1 = render_l1_backward(cloud, cam, {0, 0, 0}, target, g1, 1);
  const double l4 = render_l1_backward(cloud, cam, {0, 0, 0}, target, g4, 4);
  CHECK(l1 == l4);
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    CHECK(g1.d_position[i].x == g4.d_position[i].x);
    CHECK(g1.d_opacity[i] == g4.d_opacity[i]);
    CHECK(g1.d_color[i].z == g4.d_color[i].z);
    for (int k = 0; k < 6; ++k) CHECK(g1.d_cov3d[6 * i + k] == g4.d_cov3d[6 * i + k]);
  }
}
