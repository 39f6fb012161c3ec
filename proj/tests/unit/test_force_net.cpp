#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "finray/error.hpp"
#include "finray/force_net.hpp"
#include "finray/simulator.hpp"

using namespace finray;

namespace {

std::vector<ForceSample> linear_dataset(int n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<ForceSample> out;
  for (int i = 0; i < n; ++i) {
    ForceSample s;
    for (auto& x : s.x) x = u(rng);
    double a = 0.0, b = 0.0;
    for (int k = 0; k < 27; ++k) {
      a += 0.1 * (k % 5) * s.x[k];
      b += (k % 3 == 0 ? 0.05 : -0.02) * s.x[k];
    }
    s.y = {5.0 + a, b};
    out.push_back(s);
  }
  return out;
}

}  // namespace

TEST(ForceNet, UntrainedRefusesToPredict) {
  ForceNet net;
  std::array<double, 27> x{};
  try {
    net.predict(x);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::UntrainedNet);
  }
}

TEST(ForceNet, TooFewSamples) {
  try {
    train_force(linear_dataset(150, 1));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::TooFewSamples);
  }
}

TEST(ForceNet, LearnsLinearMap) {
  // 27 inputs need a few thousand rows before an unregularised MLP generalises.
  const auto data = linear_dataset(3000, 2);
  const auto rep = train_force(data);
  EXPECT_EQ(rep.net.dims, (std::vector<int>{27, 64, 64, 2}));
  EXPECT_LE(rep.test_mae[0], 1e-2 * 5);
  EXPECT_LE(rep.test_mae[1], 1e-2 * 5);
  EXPECT_EQ(rep.train_count + rep.test_count, data.size());
  EXPECT_EQ(rep.test_count, data.size() / 5);
}

TEST(ForceNet, DeterministicUnderSeed) {
  const auto data = linear_dataset(300, 3);
  TrainOptions opt;
  opt.max_epochs = 30;
  const auto a = train_force(data, opt), b = train_force(data, opt);
  EXPECT_EQ(nlohmann::json(a.net).dump(), nlohmann::json(b.net).dump());
  std::array<double, 27> x{};
  x[3] = 0.4;
  EXPECT_EQ(a.net.predict(x), a.net.predict(x));
}

TEST(ForceNet, JsonRoundTrip) {
  const auto rep = train_force(linear_dataset(300, 4), TrainOptions{.max_epochs = 20});
  const auto path = std::filesystem::temp_directory_path() / "finray_net.json";
  save_force_net(path, rep.net);
  const nlohmann::json j = nlohmann::json::parse(std::ifstream(path));
  for (const char* key : {"dims", "weights", "biases", "x_mean", "x_std", "seed"}) EXPECT_TRUE(j.contains(key)) << key;
  const ForceNet back = load_force_net(path);
  const auto data = linear_dataset(5, 9);
  for (const auto& s : data) {
    const auto p = rep.net.predict(s.x), q = back.predict(s.x);
    EXPECT_NEAR(p[0], q[0], 1e-12);
    EXPECT_NEAR(p[1], q[1], 1e-12);
  }
  std::filesystem::remove(path);
}

TEST(ForceDataset, GeneratorContract) {
  const SceneConfig scene;
  const auto data = gen_force_dataset(scene, 484, 5);
  ASSERT_EQ(data.size(), 484u);
  int zero = 0;
  for (const auto& s : data) {
    EXPECT_GE(s.y[0], 0.0);
    EXPECT_LE(s.y[0], 10.0);
    EXPECT_GE(s.y[1], -4.0);
    EXPECT_LE(s.y[1], 4.0);
    if (s.y[0] == 0.0 && s.y[1] == 0.0) {
      ++zero;
      double disp = 0.0;
      for (int k = 0; k < 24; ++k) disp = std::max(disp, std::abs(s.x[k]));
      EXPECT_LT(disp, 1.0);
    }
  }
  EXPECT_GE(zero, 0.05 * 484);
}

TEST(ForceNet, SimulatorSplitAndZeroLoad) {
  const SceneConfig scene;
  const auto data = gen_force_dataset(scene, 484, 6);
  const auto rep = train_force(data);
  EXPECT_LE(rep.test_mae[0], 0.5);
  EXPECT_LE(rep.test_mae[1], 0.4);
  // Unloaded rows predict close to zero force.
  std::array<double, 2> err{};
  int zero = 0;
  for (const auto& s : data) {
    if (s.y[0] != 0.0 || s.y[1] != 0.0) continue;
    const auto f = rep.net.predict(s.x);
    err[0] += std::abs(f[0]);
    err[1] += std::abs(f[1]);
    ++zero;
  }
  ASSERT_GT(zero, 0);
  EXPECT_LE(err[0] / zero, 0.5);
  EXPECT_LE(err[1] / zero, 0.4);
}
