#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <json.hpp>

namespace finray {

/// Fully connected regressor 27 → h1 → h2 → 2 with ReLU hidden layers and
/// per-feature input standardisation.
class ForceNet {
 public:
  std::vector<int> dims{27, 64, 64, 2};
  std::vector<Eigen::MatrixXd> weights;  // weights[l] is dims[l+1] × dims[l]
  std::vector<Eigen::VectorXd> biases;
  std::vector<double> x_mean;
  std::vector<double> x_std;
  std::uint64_t seed = 0;

  bool trained() const { return !weights.empty(); }
  /// Throws UntrainedNet before training.
  std::array<double, 2> predict(std::span<const double> x) const;
  /// Forward pass over standardised rows; returns rows × 2.
  Eigen::MatrixXd forward(const Eigen::MatrixXd& xs) const;
};

void to_json(nlohmann::json& j, const ForceNet& net);
void from_json(const nlohmann::json& j, ForceNet& net);
ForceNet load_force_net(const std::filesystem::path& path);
void save_force_net(const std::filesystem::path& path, const ForceNet& net);

struct ForceSample {
  std::array<double, 27> x{};
  std::array<double, 2> y{};
};

void to_json(nlohmann::json& j, const ForceSample& s);
void from_json(const nlohmann::json& j, ForceSample& s);
std::vector<ForceSample> load_force_dataset(const std::filesystem::path& path);
void save_force_dataset(const std::filesystem::path& path, const std::vector<ForceSample>& data);

struct TrainOptions {
  std::uint64_t seed = 7;
  int hidden = 64;
  int batch = 32;
  int max_epochs = 3000;
  int patience = 20;
  double learning_rate = 3e-3;
  double lr_decay = 0.999;  // per epoch
};

struct TrainReport {
  ForceNet net;
  std::array<double, 2> train_mae{};
  std::array<double, 2> test_mae{};
  int epochs = 0;
  std::size_t train_count = 0;
  std::size_t test_count = 0;
};

/// Seeded 80/20 train/test split; one eighth of the training rows drive
/// early stopping. Adam on mean-squared error; returns the net with the
/// best validation loss.
TrainReport train_force(const std::vector<ForceSample>& data, const TrainOptions& opt = {});

/// Mean absolute error per output over `data`.
std::array<double, 2> force_mae(const ForceNet& net, const std::vector<ForceSample>& data);

}  // namespace finray
