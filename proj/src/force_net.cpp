#include "finray/force_net.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "finray/error.hpp"
#include "finray/image_io.hpp"

namespace finray {

Eigen::MatrixXd ForceNet::forward(const Eigen::MatrixXd& xs) const {
  Eigen::MatrixXd h = xs;
  for (std::size_t l = 0; l < weights.size(); ++l) {
    Eigen::MatrixXd z = h * weights[l].transpose();
    z.rowwise() += biases[l].transpose();
    if (l + 1 < weights.size()) z = z.cwiseMax(0.0);
    h = std::move(z);
  }
  return h;
}

std::array<double, 2> ForceNet::predict(std::span<const double> x) const {
  if (!trained()) fail(Errc::UntrainedNet, "force network has no weights");
  if (static_cast<int>(x.size()) != dims.front()) fail(Errc::LayoutMismatch, "force input width mismatch");
  Eigen::MatrixXd row(1, x.size());
  for (std::size_t i = 0; i < x.size(); ++i) row(0, i) = (x[i] - x_mean[i]) / x_std[i];
  const Eigen::MatrixXd out = forward(row);
  return {out(0, 0), out(0, 1)};
}

void to_json(nlohmann::json& j, const ForceNet& net) {
  auto ws = nlohmann::json::array();
  auto bs = nlohmann::json::array();
  for (std::size_t l = 0; l < net.weights.size(); ++l) {
    auto rows = nlohmann::json::array();
    for (int r = 0; r < net.weights[l].rows(); ++r) {
      std::vector<double> row(net.weights[l].cols());
      for (int c = 0; c < net.weights[l].cols(); ++c) row[c] = net.weights[l](r, c);
      rows.push_back(row);
    }
    ws.push_back(rows);
    bs.push_back(std::vector<double>(net.biases[l].data(), net.biases[l].data() + net.biases[l].size()));
  }
  j = nlohmann::json{{"dims", net.dims},     {"weights", ws},       {"biases", bs},
                     {"x_mean", net.x_mean}, {"x_std", net.x_std}, {"seed", net.seed}};
}

void from_json(const nlohmann::json& j, ForceNet& net) {
  net = ForceNet{};
  j.at("dims").get_to(net.dims);
  j.at("x_mean").get_to(net.x_mean);
  j.at("x_std").get_to(net.x_std);
  j.at("seed").get_to(net.seed);
  const auto& ws = j.at("weights");
  const auto& bs = j.at("biases");
  if (ws.size() + 1 != net.dims.size() || bs.size() + 1 != net.dims.size()) {
    fail(Errc::ParseError, "force network layer count does not match dims");
  }
  for (std::size_t l = 0; l < ws.size(); ++l) {
    Eigen::MatrixXd w(net.dims[l + 1], net.dims[l]);
    Eigen::VectorXd b(net.dims[l + 1]);
    if (ws[l].size() != static_cast<std::size_t>(w.rows()) || bs[l].size() != static_cast<std::size_t>(b.size())) {
      fail(Errc::ParseError, "force network layer shape does not match dims");
    }
    for (int r = 0; r < w.rows(); ++r) {
      if (ws[l][r].size() != static_cast<std::size_t>(w.cols())) fail(Errc::ParseError, "weight row width");
      for (int c = 0; c < w.cols(); ++c) w(r, c) = ws[l][r][c].get<double>();
      b(r) = bs[l][r].get<double>();
    }
    net.weights.push_back(std::move(w));
    net.biases.push_back(std::move(b));
  }
  if (net.x_mean.size() != static_cast<std::size_t>(net.dims.front()) || net.x_std.size() != net.x_mean.size()) {
    fail(Errc::ParseError, "standardisation statistics do not match the input width");
  }
}

ForceNet load_force_net(const std::filesystem::path& path) {
  try {
    return nlohmann::json::parse(read_text(path)).get<ForceNet>();
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, path.string() + ": " + e.what());
  }
}

void save_force_net(const std::filesystem::path& path, const ForceNet& net) {
  write_text(path, nlohmann::json(net).dump() + "\n");
}

void to_json(nlohmann::json& j, const ForceSample& s) { j = nlohmann::json{{"x", s.x}, {"y", s.y}}; }

void from_json(const nlohmann::json& j, ForceSample& s) {
  j.at("x").get_to(s.x);
  j.at("y").get_to(s.y);
}

std::vector<ForceSample> load_force_dataset(const std::filesystem::path& path) {
  std::vector<ForceSample> out;
  std::istringstream in(read_text(path));
  std::string line;
  try {
    while (std::getline(in, line)) {
      if (!line.empty()) out.push_back(nlohmann::json::parse(line).get<ForceSample>());
    }
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::ParseError, path.string() + ": " + e.what());
  }
  return out;
}

void save_force_dataset(const std::filesystem::path& path, const std::vector<ForceSample>& data) {
  std::ostringstream os;
  for (const auto& s : data) os << nlohmann::json(s).dump() << '\n';
  write_text(path, os.str());
}

namespace {

Eigen::MatrixXd standardised(const std::vector<ForceSample>& data, const std::vector<std::size_t>& idx,
                             const ForceNet& net) {
  Eigen::MatrixXd x(idx.size(), 27);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    for (int c = 0; c < 27; ++c) x(r, c) = (data[idx[r]].x[c] - net.x_mean[c]) / net.x_std[c];
  }
  return x;
}

Eigen::MatrixXd targets(const std::vector<ForceSample>& data, const std::vector<std::size_t>& idx) {
  Eigen::MatrixXd y(idx.size(), 2);
  for (std::size_t r = 0; r < idx.size(); ++r) {
    y(r, 0) = data[idx[r]].y[0];
    y(r, 1) = data[idx[r]].y[1];
  }
  return y;
}

std::array<double, 2> mae_of(const ForceNet& net, const Eigen::MatrixXd& x, const Eigen::MatrixXd& y) {
  if (x.rows() == 0) return {0.0, 0.0};
  const Eigen::MatrixXd err = (net.forward(x) - y).cwiseAbs();
  return {err.col(0).mean(), err.col(1).mean()};
}

}  // namespace

std::array<double, 2> force_mae(const ForceNet& net, const std::vector<ForceSample>& data) {
  std::vector<std::size_t> idx(data.size());
  std::iota(idx.begin(), idx.end(), 0);
  return mae_of(net, standardised(data, idx, net), targets(data, idx));
}

TrainReport train_force(const std::vector<ForceSample>& data, const TrainOptions& opt) {
  if (data.size() < 200) fail(Errc::TooFewSamples, std::to_string(data.size()) + " samples, need 200");
  std::mt19937_64 rng(opt.seed);

  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t n_test = data.size() / 5;
  const std::vector<std::size_t> test(order.begin(), order.begin() + n_test);
  const std::vector<std::size_t> train_all(order.begin() + n_test, order.end());
  const std::size_t n_val = train_all.size() / 8;
  const std::vector<std::size_t> val(train_all.begin(), train_all.begin() + n_val);
  std::vector<std::size_t> fit(train_all.begin() + n_val, train_all.end());

  ForceNet net;
  net.dims = {27, opt.hidden, opt.hidden, 2};
  net.seed = opt.seed;
  net.x_mean.assign(27, 0.0);
  net.x_std.assign(27, 0.0);
  for (auto i : fit) {
    for (int c = 0; c < 27; ++c) net.x_mean[c] += data[i].x[c];
  }
  for (auto& m : net.x_mean) m /= fit.size();
  for (auto i : fit) {
    for (int c = 0; c < 27; ++c) net.x_std[c] += std::pow(data[i].x[c] - net.x_mean[c], 2);
  }
  for (auto& s : net.x_std) s = std::max(std::sqrt(s / fit.size()), 1e-9);

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (std::size_t l = 0; l + 1 < net.dims.size(); ++l) {
    const int in = net.dims[l];
    const int out = net.dims[l + 1];
    const double scale = std::sqrt(2.0 / in);
    Eigen::MatrixXd w(out, in);
    for (int r = 0; r < out; ++r) {
      for (int c = 0; c < in; ++c) w(r, c) = scale * gauss(rng);
    }
    net.weights.push_back(w);
    net.biases.push_back(Eigen::VectorXd::Zero(out));
  }

  const Eigen::MatrixXd x_fit = standardised(data, fit, net);
  const Eigen::MatrixXd y_fit = targets(data, fit);
  const Eigen::MatrixXd x_val = standardised(data, val, net);
  const Eigen::MatrixXd y_val = targets(data, val);

  const std::size_t layers = net.weights.size();
  std::vector<Eigen::MatrixXd> mw, vw;
  std::vector<Eigen::VectorXd> mb, vb;
  for (std::size_t l = 0; l < layers; ++l) {
    mw.push_back(Eigen::MatrixXd::Zero(net.weights[l].rows(), net.weights[l].cols()));
    vw.push_back(mw.back());
    mb.push_back(Eigen::VectorXd::Zero(net.biases[l].size()));
    vb.push_back(mb.back());
  }
  constexpr double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
  long step = 0;

  auto val_loss = [&] {
    if (x_val.rows() == 0) return 0.0;
    return (net.forward(x_val) - y_val).squaredNorm() / x_val.rows();
  };
  ForceNet best = net;
  double best_loss = val_loss();
  int since_best = 0;
  double lr = opt.learning_rate;
  std::vector<std::size_t> rows(fit.size());
  std::iota(rows.begin(), rows.end(), 0);

  TrainReport report;
  for (int epoch = 0; epoch < opt.max_epochs; ++epoch) {
    std::shuffle(rows.begin(), rows.end(), rng);
    for (std::size_t start = 0; start < rows.size(); start += opt.batch) {
      const std::size_t n = std::min<std::size_t>(opt.batch, rows.size() - start);
      Eigen::MatrixXd xb(n, 27), yb(n, 2);
      for (std::size_t r = 0; r < n; ++r) {
        xb.row(r) = x_fit.row(rows[start + r]);
        yb.row(r) = y_fit.row(rows[start + r]);
      }
      std::vector<Eigen::MatrixXd> acts{xb};
      for (std::size_t l = 0; l < layers; ++l) {
        Eigen::MatrixXd z = acts.back() * net.weights[l].transpose();
        z.rowwise() += net.biases[l].transpose();
        if (l + 1 < layers) z = z.cwiseMax(0.0);
        acts.push_back(std::move(z));
      }
      Eigen::MatrixXd grad = 2.0 * (acts.back() - yb) / static_cast<double>(n);
      ++step;
      const double c1 = 1.0 - std::pow(beta1, step);
      const double c2 = 1.0 - std::pow(beta2, step);
      for (std::size_t l = layers; l-- > 0;) {
        const Eigen::MatrixXd gw = grad.transpose() * acts[l];
        const Eigen::VectorXd gb = grad.colwise().sum().transpose();
        if (l > 0) {
          grad = grad * net.weights[l];
          grad = grad.cwiseProduct((acts[l].array() > 0.0).cast<double>().matrix());
        }
        mw[l] = beta1 * mw[l] + (1 - beta1) * gw;
        vw[l] = beta2 * vw[l] + (1 - beta2) * gw.cwiseAbs2();
        mb[l] = beta1 * mb[l] + (1 - beta1) * gb;
        vb[l] = beta2 * vb[l] + (1 - beta2) * gb.cwiseAbs2();
        net.weights[l].array() -= lr * (mw[l].array() / c1) / ((vw[l].array() / c2).sqrt() + adam_eps);
        net.biases[l].array() -= lr * (mb[l].array() / c1) / ((vb[l].array() / c2).sqrt() + adam_eps);
      }
    }
    lr *= opt.lr_decay;
    report.epochs = epoch + 1;
    const double loss = val_loss();
    if (loss < best_loss) {
      best_loss = loss;
      best = net;
      since_best = 0;
    } else if (++since_best >= opt.patience) {
      break;
    }
  }

  report.net = best;
  report.train_count = train_all.size();
  report.test_count = test.size();
  report.train_mae = mae_of(best, standardised(data, train_all, best), targets(data, train_all));
  report.test_mae = mae_of(best, standardised(data, test, best), targets(data, test));
  return report;
}

}  // namespace finray
