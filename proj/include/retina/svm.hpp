#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include <json.hpp>

#include "retina/features.hpp"
#include "retina/types.hpp"

namespace retina {

struct SvmHyperParams {
  double C = 10.0;
  double gamma = 0.25;
};

using LabeledSample = std::pair<FeatureVector, LesionClass>;

/// One-vs-one binary machine in z-scored feature space.
struct BinarySvm {
  int pos_class = 0;
  int neg_class = 0;
  std::vector<FeatureVector> support_vectors;
  std::vector<double> coeffs;  // alpha_i * y_i
  double bias = 0.0;
};

struct SvmModel {
  SvmHyperParams hp;
  FeatureVector feat_mean{};
  FeatureVector feat_std{};
  std::vector<BinarySvm> machines;

  FeatureVector normalize(const FeatureVector& fv) const {
    FeatureVector z{};
    for (int i = 0; i < kFeatureCount; ++i) z[i] = (fv[i] - feat_mean[i]) / feat_std[i];
    return z;
  }
};

namespace detail {

inline double rbf_kernel(const FeatureVector& a, const FeatureVector& b, double gamma) {
  double d2 = 0.0;
  for (int i = 0; i < kFeatureCount; ++i) {
    const double d = a[i] - b[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

// Sequential minimal optimization for the soft-margin dual (Platt's scheme
// with the max-|E1-E2| second choice). Deterministic: all scans run in
// fixed index order.
class SmoSolver {
 public:
  SmoSolver(const std::vector<FeatureVector>& x, const std::vector<int>& y,
            double C, double gamma, double tol = 1e-3)
      : x_(x), y_(y), C_(C), gamma_(gamma), tol_(tol), n_(x.size()),
        alpha_(x.size(), 0.0), error_(x.size()) {
    gram_.resize(n_ * n_);
    for (size_t i = 0; i < n_; ++i)
      for (size_t j = i; j < n_; ++j)
        gram_[i * n_ + j] = gram_[j * n_ + i] = rbf_kernel(x_[i], x_[j], gamma_);
    for (size_t i = 0; i < n_; ++i) error_[i] = -double(y_[i]);
  }

  void solve() {
    size_t num_changed = 0;
    bool examine_all = true;
    size_t passes = 0;
    const size_t max_passes = 200 * n_ + 10000;
    while ((num_changed > 0 || examine_all) && passes++ < max_passes) {
      num_changed = 0;
      for (size_t i = 0; i < n_; ++i) {
        if (!examine_all && (alpha_[i] <= 0.0 || alpha_[i] >= C_)) continue;
        num_changed += examine(i);
      }
      if (examine_all)
        examine_all = false;
      else if (num_changed == 0)
        examine_all = true;
      if (examine_all && num_changed == 0 && passes > 1 && max_violation() <= tol_) break;
    }
  }

  double decision(size_t i) const { return error_[i] + double(y_[i]); }

  double max_violation() const {
    double worst = 0.0;
    for (size_t i = 0; i < n_; ++i) {
      const double yf = double(y_[i]) * decision(i);
      double v = 0.0;
      if (alpha_[i] <= 1e-12)
        v = std::max(0.0, 1.0 - yf);
      else if (alpha_[i] >= C_ - 1e-12)
        v = std::max(0.0, yf - 1.0);
      else
        v = std::fabs(yf - 1.0);
      worst = std::max(worst, v);
    }
    return worst;
  }

  const std::vector<double>& alphas() const { return alpha_; }
  double bias() const { return bias_; }

  /// Recomputes the bias as the mean over margin support vectors, which
  /// centers the decision function so those vectors sit at +-1.
  void finalize_bias() {
    double sum = 0.0;
    size_t cnt = 0;
    for (size_t i = 0; i < n_; ++i) {
      if (alpha_[i] > 1e-9 && alpha_[i] < C_ - 1e-9) {
        double f = 0.0;
        for (size_t j = 0; j < n_; ++j)
          if (alpha_[j] > 0.0) f += alpha_[j] * y_[j] * gram_[i * n_ + j];
        sum += double(y_[i]) - f;
        ++cnt;
      }
    }
    if (cnt > 0) {
      const double new_bias = sum / double(cnt);
      const double shift = new_bias - bias_;
      bias_ = new_bias;
      for (size_t i = 0; i < n_; ++i) error_[i] += shift;
    }
  }

 private:
  size_t examine(size_t i2) {
    const double y2 = y_[i2];
    const double a2 = alpha_[i2];
    const double e2 = error_[i2];
    const double r2 = e2 * y2;
    const bool violates = (r2 < -tol_ && a2 < C_) || (r2 > tol_ && a2 > 0.0);
    if (!violates) return 0;

    // Heuristic 1: largest |E1 - E2| among non-bound points.
    size_t best = n_;
    double best_gap = -1.0;
    for (size_t i = 0; i < n_; ++i) {
      if (i == i2 || alpha_[i] <= 0.0 || alpha_[i] >= C_) continue;
      const double gap = std::fabs(error_[i] - e2);
      if (gap > best_gap) {
        best_gap = gap;
        best = i;
      }
    }
    if (best < n_ && step(best, i2)) return 1;
    for (size_t i = 0; i < n_; ++i) {
      if (i == i2 || alpha_[i] <= 0.0 || alpha_[i] >= C_) continue;
      if (step(i, i2)) return 1;
    }
    for (size_t i = 0; i < n_; ++i) {
      if (i == i2) continue;
      if (step(i, i2)) return 1;
    }
    return 0;
  }

  bool step(size_t i1, size_t i2) {
    if (i1 == i2) return false;
    const double a1 = alpha_[i1], a2 = alpha_[i2];
    const double y1 = y_[i1], y2 = y_[i2];
    const double e1 = error_[i1], e2 = error_[i2];
    const double s = y1 * y2;

    double lo, hi;
    if (y1 != y2) {
      lo = std::max(0.0, a2 - a1);
      hi = std::min(C_, C_ + a2 - a1);
    } else {
      lo = std::max(0.0, a1 + a2 - C_);
      hi = std::min(C_, a1 + a2);
    }
    if (lo >= hi) return false;

    const double k11 = gram_[i1 * n_ + i1];
    const double k12 = gram_[i1 * n_ + i2];
    const double k22 = gram_[i2 * n_ + i2];
    const double eta = k11 + k22 - 2.0 * k12;
    if (eta <= 1e-12) return false;

    double a2_new = a2 + y2 * (e1 - e2) / eta;
    a2_new = std::clamp(a2_new, lo, hi);
    if (std::fabs(a2_new - a2) < 1e-12 * (a2_new + a2 + 1e-12)) return false;
    const double a1_new = a1 + s * (a2 - a2_new);

    const double b1 = bias_ - e1 - y1 * (a1_new - a1) * k11 - y2 * (a2_new - a2) * k12;
    const double b2 = bias_ - e2 - y1 * (a1_new - a1) * k12 - y2 * (a2_new - a2) * k22;
    double new_bias;
    if (a1_new > 0.0 && a1_new < C_)
      new_bias = b1;
    else if (a2_new > 0.0 && a2_new < C_)
      new_bias = b2;
    else
      new_bias = (b1 + b2) / 2.0;

    const double d1 = y1 * (a1_new - a1), d2 = y2 * (a2_new - a2);
    for (size_t i = 0; i < n_; ++i)
      error_[i] += d1 * gram_[i1 * n_ + i] + d2 * gram_[i2 * n_ + i] + (new_bias - bias_);
    alpha_[i1] = a1_new;
    alpha_[i2] = a2_new;
    bias_ = new_bias;
    return true;
  }

  const std::vector<FeatureVector>& x_;
  const std::vector<int>& y_;
  double C_, gamma_, tol_;
  size_t n_;
  std::vector<double> alpha_;
  std::vector<double> error_;  // f(x_i) - y_i
  std::vector<double> gram_;
  double bias_ = 0.0;
};

}  // namespace detail

/// Decision value of one binary machine for a z-scored input.
inline double decision_value(const BinarySvm& m, const FeatureVector& z, double gamma) {
  double f = m.bias;
  for (size_t i = 0; i < m.support_vectors.size(); ++i)
    f += m.coeffs[i] * detail::rbf_kernel(m.support_vectors[i], z, gamma);
  return f;
}

/// Trains a one-vs-one multi-class RBF SVM with an SMO solver per pair.
/// Features are z-scored with statistics from the full training set; the
/// result is deterministic for a given sample order and seed.
inline SvmModel train(const std::vector<LabeledSample>& samples, const SvmHyperParams& hp,
                      uint64_t seed = 0) {
  (void)seed;  // reserved; training is already order-deterministic
  if (!(hp.C > 0.0) || !(hp.gamma > 0.0)) throw ArgumentError("train: bad hyperparameters");
  std::array<size_t, 3> class_counts{};
  for (const auto& [fv, cls] : samples) {
    validate_features(fv);
    class_counts[size_t(cls)]++;
  }
  int present = 0;
  for (size_t c : class_counts) present += c > 0 ? 1 : 0;
  if (present < 2) throw ArgumentError("train: need samples from at least two classes");

  SvmModel model;
  model.hp = hp;
  for (int f = 0; f < kFeatureCount; ++f) {
    double mean = 0.0;
    for (const auto& s : samples) mean += s.first[f];
    mean /= double(samples.size());
    double var = 0.0;
    for (const auto& s : samples) {
      const double d = s.first[f] - mean;
      var += d * d;
    }
    var /= double(samples.size());
    model.feat_mean[f] = mean;
    model.feat_std[f] = var > 1e-24 ? std::sqrt(var) : 1.0;
  }

  for (int a = 0; a < 3; ++a) {
    for (int b = a + 1; b < 3; ++b) {
      if (class_counts[a] == 0 || class_counts[b] == 0) continue;
      std::vector<FeatureVector> x;
      std::vector<int> y;
      for (const auto& [fv, cls] : samples) {
        if (int(cls) == a || int(cls) == b) {
          x.push_back(model.normalize(fv));
          y.push_back(int(cls) == a ? 1 : -1);
        }
      }
      detail::SmoSolver solver(x, y, hp.C, hp.gamma);
      solver.solve();
      solver.finalize_bias();

      BinarySvm m;
      m.pos_class = a;
      m.neg_class = b;
      m.bias = solver.bias();
      for (size_t i = 0; i < x.size(); ++i) {
        if (solver.alphas()[i] > 1e-12) {
          m.support_vectors.push_back(x[i]);
          m.coeffs.push_back(solver.alphas()[i] * y[i]);
        }
      }
      model.machines.push_back(std::move(m));
    }
  }
  return model;
}

struct PredictResult {
  LesionClass cls = LesionClass::Outlier;
  std::array<double, 3> votes{};
  std::array<double, 3> margin_sums{};
};

/// Majority vote over the one-vs-one machines; ties break on summed
/// absolute margins, then on the fixed class order Hard < Soft < Outlier.
inline PredictResult predict(const SvmModel& model, const FeatureVector& fv) {
  validate_features(fv);
  if (model.machines.empty()) throw ArgumentError("predict: model is not trained");
  const FeatureVector z = model.normalize(fv);
  PredictResult res;
  for (const auto& m : model.machines) {
    const double d = decision_value(m, z, model.hp.gamma);
    const int winner = d > 0.0 ? m.pos_class : m.neg_class;
    res.votes[winner] += 1.0;
    res.margin_sums[winner] += std::fabs(d);
  }
  int best = 0;
  for (int c = 1; c < 3; ++c) {
    if (res.votes[c] > res.votes[best] ||
        (res.votes[c] == res.votes[best] && res.margin_sums[c] > res.margin_sums[best]))
      best = c;
  }
  res.cls = LesionClass(best);
  return res;
}

struct CrossValResult {
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;
  std::array<double, 3> class_mean{};
  std::array<double, 3> class_std{};
  std::vector<double> fold_accuracies;
};

/// Stratified k-fold cross validation, deterministic for a given seed.
inline CrossValResult cross_validate(const std::vector<LabeledSample>& samples,
                                     const SvmHyperParams& hp, int folds = 10,
                                     uint64_t seed = 0) {
  if (folds < 2) throw ArgumentError("cross_validate: folds must be >= 2");
  std::array<std::vector<size_t>, 3> by_class;
  for (size_t i = 0; i < samples.size(); ++i)
    by_class[size_t(samples[i].second)].push_back(i);
  for (const auto& idx : by_class)
    if (!idx.empty() && idx.size() < size_t(folds))
      throw ArgumentError("cross_validate: every present class needs >= folds samples");

  std::mt19937_64 rng(seed);
  std::vector<int> fold_of(samples.size(), 0);
  for (auto& idx : by_class) {
    std::shuffle(idx.begin(), idx.end(), rng);
    for (size_t i = 0; i < idx.size(); ++i) fold_of[idx[i]] = int(i % folds);
  }

  CrossValResult res;
  std::array<std::vector<double>, 3> class_fold_acc;
  for (int f = 0; f < folds; ++f) {
    std::vector<LabeledSample> tr, te;
    for (size_t i = 0; i < samples.size(); ++i)
      (fold_of[i] == f ? te : tr).push_back(samples[i]);
    const SvmModel model = train(tr, hp, seed);
    std::array<size_t, 3> correct{}, total{};
    for (const auto& [fv, cls] : te) {
      total[size_t(cls)]++;
      if (predict(model, fv).cls == cls) correct[size_t(cls)]++;
    }
    size_t all_correct = 0, all_total = 0;
    for (int c = 0; c < 3; ++c) {
      all_correct += correct[c];
      all_total += total[c];
      if (total[c] > 0) class_fold_acc[c].push_back(double(correct[c]) / total[c]);
    }
    res.fold_accuracies.push_back(double(all_correct) / double(all_total));
  }

  auto mean_std = [](const std::vector<double>& v, double& mean, double& sd) {
    mean = std::accumulate(v.begin(), v.end(), 0.0) / double(v.size());
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    sd = std::sqrt(var / double(v.size()));
  };
  mean_std(res.fold_accuracies, res.mean_accuracy, res.std_accuracy);
  for (int c = 0; c < 3; ++c)
    if (!class_fold_acc[c].empty())
      mean_std(class_fold_acc[c], res.class_mean[c], res.class_std[c]);
  return res;
}

/// Grid search over (C, gamma) by mean CV accuracy; first best wins.
inline SvmHyperParams grid_search(const std::vector<LabeledSample>& samples,
                                  const std::vector<double>& Cs,
                                  const std::vector<double>& gammas, int folds,
                                  uint64_t seed, CrossValResult* best_cv = nullptr) {
  SvmHyperParams best;
  double best_acc = -1.0;
  for (double C : Cs) {
    for (double gamma : gammas) {
      const SvmHyperParams hp{C, gamma};
      const CrossValResult cv = cross_validate(samples, hp, folds, seed);
      if (cv.mean_accuracy > best_acc) {
        best_acc = cv.mean_accuracy;
        best = hp;
        if (best_cv) *best_cv = cv;
      }
    }
  }
  return best;
}

constexpr const char* kModelFormat = "retina-kit-svm";
constexpr int kModelVersion = 1;

inline void save_model(const SvmModel& model, const std::string& path) {
  nlohmann::json j;
  j["format"] = kModelFormat;
  j["version"] = kModelVersion;
  j["C"] = model.hp.C;
  j["gamma"] = model.hp.gamma;
  j["feature_mean"] = model.feat_mean;
  j["feature_std"] = model.feat_std;
  j["machines"] = nlohmann::json::array();
  for (const auto& m : model.machines) {
    nlohmann::json jm;
    jm["pos"] = m.pos_class;
    jm["neg"] = m.neg_class;
    jm["bias"] = m.bias;
    jm["coeffs"] = m.coeffs;
    jm["support_vectors"] = m.support_vectors;
    j["machines"].push_back(std::move(jm));
  }
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw IoError("cannot write model file: " + path);
  f << j.dump(2) << "\n";
}

inline SvmModel load_model(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open model file: " + path);
  nlohmann::json j;
  try {
    f >> j;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt model file: " + path + " (" + e.what() + ")");
  }
  try {
    if (j.at("format").get<std::string>() != kModelFormat)
      throw FormatError("not a model file: " + path);
    if (j.at("version").get<int>() != kModelVersion)
      throw FormatError("unsupported model version in: " + path);
    SvmModel model;
    model.hp.C = j.at("C").get<double>();
    model.hp.gamma = j.at("gamma").get<double>();
    model.feat_mean = j.at("feature_mean").get<FeatureVector>();
    model.feat_std = j.at("feature_std").get<FeatureVector>();
    for (const auto& jm : j.at("machines")) {
      BinarySvm m;
      m.pos_class = jm.at("pos").get<int>();
      m.neg_class = jm.at("neg").get<int>();
      m.bias = jm.at("bias").get<double>();
      m.coeffs = jm.at("coeffs").get<std::vector<double>>();
      m.support_vectors = jm.at("support_vectors").get<std::vector<FeatureVector>>();
      if (m.coeffs.size() != m.support_vectors.size())
        throw FormatError("inconsistent machine in model file: " + path);
      model.machines.push_back(std::move(m));
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("corrupt model file: " + path + " (" + e.what() + ")");
  }
}

}  // namespace retina
