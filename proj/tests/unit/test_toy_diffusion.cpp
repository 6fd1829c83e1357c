// Copyright 2026 The vidmamba Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <doctest.h>

#include <cmath>
#include <set>

#include "oracles.hpp"
#include "vidmamba/dataset.hpp"
#include "vidmamba/denoiser.hpp"
#include "vidmamba/diffusion.hpp"
#include "vidmamba/linalg.hpp"
#include "vidmamba/optim.hpp"
#include "vidmamba/train.hpp"

using namespace vidmamba;

namespace {

TrainConfig small_config() {
  TrainConfig cfg;
  cfg.data.per_class = 2;
  cfg.model.width = 4;
  cfg.model.depth = 1;
  cfg.model.state_dim = 2;
  cfg.model.bypass.rank = 2;
  cfg.steps = 3;
  cfg.sample_steps = 4;
  cfg.val_draws = 1;
  return cfg;
}

double rel_error(const Tensor& a, const Tensor& b) {
  return oracle::frobenius(a - b) / oracle::frobenius(b);
}

}  // namespace

TEST_CASE("schedule products") {
  const DiffusionSchedule s;
  CHECK(s.steps() == 1000);
  CHECK(s.beta(1) == doctest::Approx(1e-4));
  CHECK(s.beta(1000) == doctest::Approx(2e-2));
  CHECK(s.beta(500) - s.beta(499) == doctest::Approx((2e-2 - 1e-4) / 999));
  long double prod = 1.0L;
  for (std::size_t t = 1; t <= 1000; ++t) {
    prod *= 1.0L - (1e-4L + (2e-2L - 1e-4L) * (t - 1) / 999.0L);
    if (t % 97 == 0) CHECK(s.alpha_bar(t) == doctest::Approx(static_cast<double>(prod)).epsilon(1e-12));
  }
  CHECK(s.alpha_bar(0) == 1.0);
  CHECK(s.alpha_bar(1000) < 0.05);
  CHECK_THROWS_AS(s.beta(0), ArgumentError);
  CHECK_THROWS_AS(s.alpha_bar(1001), ArgumentError);
  CHECK_THROWS_AS(DiffusionSchedule(10, 0.5, 1.5), ArgumentError);
}

TEST_CASE("forward diffusion moments") {
  const DiffusionSchedule s;
  const Tensor z0({20000}, 0.7);
  Rng rng(1);
  const std::size_t t = 400;
  const Noised n = forward_diffuse(z0, t, s, rng);
  CHECK(oracle::max_abs_diff(n.z_t, forward_diffuse(z0, t, s, n.eps)) == 0.0);
  double m = 0, v = 0;
  for (double x : n.z_t.values()) m += x;
  m /= 20000;
  for (double x : n.z_t.values()) v += (x - m) * (x - m);
  v /= 19999;
  const double ab = s.alpha_bar(t);
  CHECK(std::abs(m - std::sqrt(ab) * 0.7) < 4 * std::sqrt((1 - ab) / 20000));
  CHECK(std::abs(v - (1 - ab)) < 0.05 * (1 - ab));
  CHECK_THROWS_AS(forward_diffuse(z0, 0, s, rng), ArgumentError);
}

TEST_CASE("ddim timesteps") {
  const auto ts = ddim_timesteps(1000, 50);
  REQUIRE(ts.size() == 51);
  CHECK(ts.front() == 0);
  CHECK(ts.back() == 1000);
  for (std::size_t i = 1; i < ts.size(); ++i) CHECK(ts[i] > ts[i - 1]);
  CHECK(ddim_timesteps(10, 10) == std::vector<std::size_t>{0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10});
  CHECK_THROWS_AS(ddim_timesteps(10, 11), ArgumentError);
}

TEST_CASE("ddim update with the true noise lands on the forward marginal") {
  const DiffusionSchedule s;
  Rng rng(2);
  const Tensor z0 = rng.normal_tensor({50});
  const Tensor eps = rng.normal_tensor({50});
  const Tensor zt = forward_diffuse(z0, 700, s, eps);
  CHECK(oracle::max_abs_diff(ddim_update(zt, eps, 700, 300, s), forward_diffuse(z0, 300, s, eps)) < 1e-12);
  CHECK(oracle::max_abs_diff(ddim_update(zt, eps, 700, 0, s), z0) < 1e-12);
}

TEST_CASE("ddim step, inversion and guidance identities") {
  const DiffusionSchedule s;
  Rng rng(3);
  const Tensor field = rng.normal_tensor({2, 3});
  // Noise prediction that ignores z: inversion and sampling are exact inverses.
  const EpsPredictor flat = [&](const Tensor&, std::size_t t, const Tensor& c) {
    return field * (1.0 + 1e-3 * t) + Tensor({2, 3}, c[0]);
  };
  const Tensor c = Tensor::vector({0.2, 0.0, 0.0});
  const Tensor z0 = rng.normal_tensor({2, 3});
  CHECK(ddim_step(flat, z0, 40, 40, c, s) == z0);
  const Tensor zT = ddim_invert(flat, z0, c, s, 25);
  CHECK(rel_error(ddim_sample(flat, zT, c, s, 25), z0) < 1e-10);

  const Tensor eu = rng.normal_tensor({5}), ec = rng.normal_tensor({5});
  CHECK(cfg_combine(eu, ec, 1.0) == ec);
  CHECK(cfg_combine(eu, ec, 0.0) == eu);
  const Tensor g = cfg_combine(eu, ec, 12.5);
  for (std::size_t i = 0; i < 5; ++i) CHECK(g[i] == doctest::Approx(eu[i] + 12.5 * (ec[i] - eu[i])));
  const Tensor null_c({3});
  CHECK(cfg_predict(flat, z0, 10, c, null_c, 1.0) == flat(z0, 10, c));
  CHECK(ddim_sample(flat, zT, c, s, 25, &null_c, 1.0) == ddim_sample(flat, zT, c, s, 25));
}

TEST_CASE("clamped x0 prediction") {
  const DiffusionSchedule s;
  const double sa = std::sqrt(s.alpha_bar(600)), sb = std::sqrt(1 - s.alpha_bar(600));
  const Tensor z({3}, {5.0, sa * 0.5 + sb * 0.2, -4.0});
  const Tensor eps({3}, {0.1, 0.2, 0.3});
  const ValueRange r{0.0, 1.0};
  const Tensor out = ddim_update(z, eps, 600, 0, s, &r);
  CHECK(out[0] == 1.0);
  CHECK(out[1] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(out[2] == 0.0);
  const Tensor mid = ddim_update(z, eps, 600, 300, s, &r);
  const double e0 = (5.0 - sa * 1.0) / sb;
  CHECK(mid[0] == doctest::Approx(std::sqrt(s.alpha_bar(300)) + std::sqrt(1 - s.alpha_bar(300)) * e0));
}

TEST_CASE("perfect point-mass predictor reconstructs its data") {
  const DiffusionSchedule s;
  Rng rng(4);
  const Tensor x0 = rng.normal_tensor({4, 3});
  const EpsPredictor ideal = [&](const Tensor& z, std::size_t t, const Tensor&) {
    return (z - x0 * std::sqrt(s.alpha_bar(t))) * (1.0 / std::sqrt(1.0 - s.alpha_bar(t)));
  };
  const Tensor c({3});
  for (std::size_t n : {1, 10, 50}) {
    CHECK(rel_error(ddim_sample(ideal, rng.normal_tensor({4, 3}), c, s, n), x0) < 1e-6);
    CHECK(rel_error(ddim_sample(ideal, ddim_invert(ideal, x0, c, s, n), c, s, n), x0) < 1e-6);
  }
}

TEST_CASE("synthetic dataset") {
  const DatasetSpec spec{.frames = 5, .size = 16, .channels = 3, .per_class = 4};
  Rng a(9), b(9);
  const auto d1 = make_synthetic_dataset(spec, a);
  const auto d2 = make_synthetic_dataset(spec, b);
  REQUIRE(d1.size() == 12);
  for (std::size_t i = 0; i < d1.size(); ++i) {
    CHECK(d1[i].video == d2[i].video);
    CHECK(static_cast<std::size_t>(d1[i].label) == i % 3);
    CHECK(d1[i].video.shape() == Shape{5, 3, 16, 16});
    for (double v : d1[i].video.values()) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
    if (d1[i].label == MotionClass::kTranslate) {
      const auto [vy, vx] = d1[i].velocity;
      CHECK((vy != 0 || vx != 0));
      for (std::size_t t = 0; t + 1 < 5; ++t) {
        const Tensor rolled = roll_frame(d1[i].video, t, vy, vx);
        for (std::size_t k = 0; k < rolled.size(); ++k)
          CHECK(rolled[k] == d1[i].video[(t + 1) * rolled.size() + k]);
      }
    }
  }
  CHECK_THROWS_AS(DatasetSpec{.frames = 3}.validate(), ConfigError);
  CHECK_THROWS_AS(DatasetSpec{.size = 40}.validate(), ConfigError);
  CHECK(condition_embedding(MotionClass::kRotate, 4) == Tensor::vector({0, 1, 0, 0}));
  CHECK(null_embedding(4) == Tensor({4}));
}

TEST_CASE("classes are linearly separable") {
  const DatasetSpec spec{.frames = 4, .size = 16, .channels = 3, .per_class = 20};
  Rng train_rng(10), test_rng(11);
  const auto train = make_synthetic_dataset(spec, train_rng);
  const auto test = make_synthetic_dataset(spec, test_rng);
  const std::size_t n = train.size(), f = train[0].video.size();
  Tensor x({n, f}), y({n, 3});
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < f; ++j) x.at(i, j) = train[i].video[j];
    y.at(i, static_cast<std::size_t>(train[i].label)) = 1.0;
  }
  // Ridge regression in dual form: W = X^T (X X^T + l I)^-1 Y.
  const Tensor gram = oracle::matmul(x, oracle::transpose(x)) + Tensor::identity(n) * 1.0;
  const Tensor w = oracle::matmul(oracle::transpose(x), solve(gram, y));
  std::size_t correct = 0;
  for (const auto& s : test) {
    const Tensor score = oracle::matmul(s.video.reshaped({1, f}), w);
    std::size_t best = 0;
    for (std::size_t c = 1; c < 3; ++c)
      if (score[c] > score[best]) best = c;
    correct += best == static_cast<std::size_t>(s.label);
  }
  CHECK(static_cast<double>(correct) / test.size() > 0.9);
}

TEST_CASE("timestep embedding") {
  const Tensor e = timestep_embedding(37, 8);
  REQUIRE(e.size() == 8);
  for (std::size_t i = 0; i < 4; ++i) {
    const double freq = std::pow(1000.0, -static_cast<double>(i) / 4.0);
    CHECK(e[2 * i] == doctest::Approx(std::sin(37 * freq)));
    CHECK(e[2 * i + 1] == doctest::Approx(std::cos(37 * freq)));
  }
}

TEST_CASE("denoiser output shape across layouts") {
  for (auto placement : {MambaPlacement::kReplace, MambaPlacement::kInsertAfter})
    for (auto padding : {PaddingMode::kNone, PaddingMode::kFixedToken, PaddingMode::kLearnable})
      for (bool bypass : {false, true}) {
        DenoiserConfig cfg{.width = 4, .depth = 1, .state_dim = 2};
        cfg.placement = placement;
        cfg.padding = padding;
        cfg.use_bypass = bypass;
        cfg.bypass.rank = 2;
        Rng rng(5);
        const ToyDenoiser m(cfg, rng);
        const Tensor z = rng.normal_tensor({3, 3, 5, 4});
        const Tensor out = m.predict(z, 10, condition_embedding(MotionClass::kRotate, 4));
        CHECK(out.shape() == z.shape());
        CHECK(out.all_finite());
      }
  const DenoiserConfig full_rank{.width = 4, .bypass = {.rank = 4}};
  CHECK_THROWS_AS(full_rank.validate(), ConfigError);
  const DenoiserConfig no_stack{.depth = 0};
  CHECK_THROWS_AS(no_stack.validate(), ConfigError);
  CHECK(parse_placement("insert-after") == MambaPlacement::kInsertAfter);
  CHECK_THROWS_AS(parse_placement("before"), ConfigError);
}

TEST_CASE("phi = 1 denoiser equals the bypass-free denoiser bit for bit") {
  DenoiserConfig plain{.width = 6, .depth = 1, .state_dim = 2, .use_bypass = false};
  DenoiserConfig mixed = plain;
  mixed.use_bypass = true;
  mixed.bypass = {.rank = 3, .phi = 1.0, .phi_mode = PhiMode::kFixed};
  Rng r1(6), r2(6);
  const ToyDenoiser a(plain, r1), b(mixed, r2);
  Rng rng(7);
  const Tensor z = rng.normal_tensor({3, 3, 4, 4});
  const Tensor c = condition_embedding(MotionClass::kTranslate, 4);
  CHECK(a.predict(z, 123, c) == b.predict(z, 123, c));
}

TEST_CASE("appending a fresh Mamba block leaves the output unchanged") {
  Rng rng(8);
  ToyDenoiser m(DenoiserConfig{.width = 4, .depth = 1, .state_dim = 2, .bypass = {.rank = 2}}, rng);
  const Tensor z = rng.normal_tensor({3, 3, 4, 4});
  const Tensor c = condition_embedding(MotionClass::kColorShift, 4);
  const Tensor before = m.predict(z, 500, c);
  m.append_mamba_block(rng);
  CHECK(m.mamba_depth() == 2);
  CHECK(m.predict(z, 500, c) == before);
}

TEST_CASE("checkpoint round trip and strict loading") {
  Rng r1(9), r2(10);
  const DenoiserConfig cfg{.width = 4, .depth = 1, .state_dim = 2, .bypass = {.rank = 2}};
  const ToyDenoiser a(cfg, r1);
  ToyDenoiser b(cfg, r2);
  const Tensor z = Rng(11).normal_tensor({2, 3, 4, 4});
  const Tensor c = condition_embedding(MotionClass::kRotate, 4);
  CHECK(a.predict(z, 50, c) != b.predict(z, 50, c));
  b.load(a.checkpoint());
  CHECK(a.predict(z, 50, c) == b.predict(z, 50, c));
  TensorArchive extra = a.checkpoint();
  extra["bogus"] = Tensor({1});
  CHECK_THROWS_AS(b.load(extra), ConfigError);
  TensorArchive wrong = a.checkpoint();
  wrong.at("conv_in.w") = Tensor({1});
  CHECK_THROWS_AS(b.load(wrong), DimensionError);
  TensorArchive missing = a.checkpoint();
  missing.erase("conv_out.b");
  CHECK_THROWS_AS(b.load(missing), ConfigError);
  extra.at("conv_in.w") = Tensor(extra.at("conv_in.w").shape(), 9.0);
  Rng r3(12), r4(12);
  const ToyDenoiser fresh(cfg, r3);
  ToyDenoiser d(cfg, r4);
  CHECK_THROWS_AS(d.load(extra), ConfigError);
  CHECK(d.checkpoint() == fresh.checkpoint());
}

TEST_CASE("adam first step moves each coordinate by lr against the gradient") {
  const Var p = Var::parameter(Tensor({3}, {1.0, -2.0, 0.5}));
  Adam opt({{"p", p}}, {.lr = 0.1});
  const Var l = ad::sum(ad::mul(p, p));
  backward(l);
  opt.step();
  CHECK(p.value()[0] == doctest::Approx(0.9).epsilon(1e-6));
  CHECK(p.value()[1] == doctest::Approx(-1.9).epsilon(1e-6));
  CHECK(p.value()[2] == doctest::Approx(0.4).epsilon(1e-6));
  CHECK(opt.steps_taken() == 1);
  CHECK_THROWS_AS(Adam({{"c", Var::constant(Tensor({1}))}}), ArgumentError);
}

TEST_CASE("config text round trips and rejects bad input") {
  TrainConfig cfg = small_config();
  cfg.lr = 1.0 / 3.0;
  cfg.model.padding = PaddingMode::kFixedToken;
  cfg.model.bypass.phi_mode = PhiMode::kLearnable;
  const std::string text = render_train_config(cfg);
  const TrainConfig back = parse_train_config(text);
  CHECK(render_train_config(back) == text);
  CHECK(back.lr == 1.0 / 3.0);
  CHECK(parse_train_config("# comment\n steps = 7  # trailing\n\n").steps == 7);
  CHECK_THROWS_AS(parse_train_config("stepz = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("steps = 3\nsteps = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("steps = three\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("steps\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("padding = ring\n"), ConfigError);
  CHECK_THROWS_AS(parse_train_config("frames = 2\n"), ConfigError);
  CHECK_THROWS_AS(load_train_config("/nonexistent/train.cfg"), ConfigError);
}

TEST_CASE("zero training steps keep the initial weights") {
  TrainConfig cfg = small_config();
  cfg.steps = 0;
  ToyDenoiser m = make_model(cfg);
  const TensorArchive before = m.checkpoint();
  CHECK(train(cfg, m).losses.empty());
  CHECK(m.checkpoint() == before);
}

TEST_CASE("training is deterministic per seed") {
  const TrainConfig cfg = small_config();
  ToyDenoiser a = make_model(cfg), b = make_model(cfg);
  const TrainResult ra = train(cfg, a), rb = train(cfg, b);
  CHECK(ra.losses == rb.losses);
  CHECK(a.checkpoint() == b.checkpoint());
  CHECK(validation_loss(cfg, a) == validation_loss(cfg, b));
  TrainConfig other = cfg;
  other.seed = 1;
  ToyDenoiser c = make_model(other);
  CHECK(train(other, c).losses != ra.losses);
}

TEST_CASE("frozen backbone only updates bypass, Mamba and frame padding") {
  TrainConfig cfg = small_config();
  cfg.model.freeze_backbone = true;
  cfg.model.bypass.phi_mode = PhiMode::kLearnable;
  ToyDenoiser m = make_model(cfg);
  const TensorArchive before = m.checkpoint();
  train(cfg, m);
  const TensorArchive after = m.checkpoint();
  REQUIRE(before.size() == after.size());
  std::set<std::string> changed;
  for (const auto& [name, t] : before)
    if (after.at(name) != t) changed.insert(name);
  CHECK(!changed.empty());
  for (const auto& name : changed) {
    INFO(name);
    const bool allowed = name.rfind("mamba.", 0) == 0 || name == "attn.w_q_low" ||
                         name == "attn.w_k_low" || name == "attn.phi_logit";
    CHECK(allowed);
  }
  CHECK(changed.count("mamba.0.theta_frame") == 1);
  CHECK(changed.count("attn.w_q_low") == 1);
  for (const auto& [name, v] : m.collect()) {
    INFO(name);
    CHECK(name.rfind("conv", 0) != 0);
  }
}

TEST_CASE("smoothing windows") {
  const std::vector<double> l{4, 3, 2, 1};
  CHECK(smoothed_head(l, 2) == 3.5);
  CHECK(smoothed_tail(l, 2) == 1.5);
  CHECK(smoothed_tail(l, 10) == 2.5);
  CHECK(smoothed_head({}, 3) == 0.0);
}

TEST_CASE("sampling responds to guidance") {
  TrainConfig cfg = small_config();
  ToyDenoiser m = make_model(cfg);
  train(cfg, m);
  const Tensor g0 = sample_video(cfg, m, MotionClass::kTranslate, 0.0, 100);
  const Tensor g1 = sample_video(cfg, m, MotionClass::kTranslate, 12.5, 100);
  CHECK(g0.shape() == Shape{4, 3, 16, 16});
  CHECK(g0 != g1);
  CHECK(sample_video(cfg, m, MotionClass::kTranslate, 12.5, 100) == g1);
  for (double v : g1.values()) {
    CHECK(v >= 0.0);
    CHECK(v <= 1.0);
  }
}
