#include "rmtfeat/classify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>

#include <fmt/format.h>

#include "rmtfeat/error.hpp"
#include "rmtfeat/parallel.hpp"
#include "rmtfeat/rng.hpp"

namespace rmtfeat {

namespace {

double squared_distance(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

double rbf(std::span<const double> a, std::span<const double> b, double gamma) {
  return std::exp(-gamma * squared_distance(a, b));
}

// Rows sorted by (values, label, group key).
Dataset canonical(const Dataset& ds) {
  ds.validate();
  std::vector<std::size_t> order(ds.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t i, std::size_t j) {
    if (ds.rows[i] != ds.rows[j]) return ds.rows[i] < ds.rows[j];
    if (ds.labels[i] != ds.labels[j]) return ds.labels[i] < ds.labels[j];
    if (!ds.group_keys.empty()) return ds.group_keys[i] < ds.group_keys[j];
    return false;
  });
  return ds.subset(order);
}

void require_two_classes(const Dataset& ds) {
  if (ds.classes().size() < 2) throw Error("training needs at least 2 classes");
}

// Majority label; ties go to the lexicographically smallest label.
std::string majority(const std::map<std::string, std::size_t>& votes) {
  std::string best;
  std::size_t best_count = 0;
  for (const auto& [label, count] : votes) {
    if (count > best_count) {
      best = label;
      best_count = count;
    }
  }
  return best;
}

// ---- SVM ----------------------------------------------------------------

class KernelRows {
 public:
  KernelRows(const std::vector<std::vector<double>>& x, double gamma) : x_(x), gamma_(gamma) {
    const std::size_t n = x.size();
    full_ = n <= kFullLimit;
    if (full_) {
      k_.assign(n * n, 0.0);
      for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j <= i; ++j) {
          const double v = rbf(x[i], x[j], gamma);
          k_[i * n + j] = v;
          k_[j * n + i] = v;
        }
      }
    } else {
      k_.assign(2 * n, 0.0);
    }
  }

  // Row i of the kernel matrix. Without the full matrix, two row buffers are
  // kept and `slot` chooses which one to fill.
  std::span<const double> row(std::size_t i, std::size_t slot) {
    const std::size_t n = x_.size();
    if (full_) return {k_.data() + i * n, n};
    double* out = k_.data() + slot * n;
    for (std::size_t j = 0; j < n; ++j) out[j] = rbf(x_[i], x_[j], gamma_);
    return {out, n};
  }

 private:
  static constexpr std::size_t kFullLimit = 2500;
  const std::vector<std::vector<double>>& x_;
  double gamma_;
  bool full_{true};
  std::vector<double> k_;
};

double decision(const BinarySvm& m, std::span<const double> x, double gamma) {
  double s = -m.rho;
  for (std::size_t i = 0; i < m.support.size(); ++i) s += m.coef[i] * rbf(m.support[i], x, gamma);
  return s;
}

std::string predict_svm(const SvmModel& m, std::span<const double> x) {
  const std::size_t k = m.classes.size();
  std::vector<std::size_t> votes(k, 0);
  std::vector<double> lost_by(k, 0.0);
  std::size_t idx = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = i + 1; j < k; ++j, ++idx) {
      const double d = decision(m.machines[idx], x, m.gamma);
      if (d > 0.0) {
        ++votes[i];
        lost_by[j] += d;
      } else {
        ++votes[j];
        lost_by[i] -= d;
      }
    }
  }
  // Most votes; among ties the class that lost its contests by the smallest
  // total margin; then the lexicographically smallest label.
  std::size_t best = 0;
  for (std::size_t c = 1; c < k; ++c) {
    if (votes[c] > votes[best] || (votes[c] == votes[best] && lost_by[c] < lost_by[best])) best = c;
  }
  return m.classes[best];
}

// ---- k-NN ---------------------------------------------------------------

std::string predict_knn(const KnnModel& m, std::span<const double> x) {
  std::vector<std::pair<double, std::size_t>> d;
  d.reserve(m.rows.size());
  for (std::size_t i = 0; i < m.rows.size(); ++i) d.emplace_back(squared_distance(m.rows[i], x), i);
  std::partial_sort(d.begin(), d.begin() + static_cast<std::ptrdiff_t>(m.k), d.end());
  std::map<std::string, std::pair<std::size_t, double>> votes;  // label -> (count, distance sum)
  for (std::size_t i = 0; i < m.k; ++i) {
    auto& v = votes[m.labels[d[i].second]];
    ++v.first;
    v.second += std::sqrt(d[i].first);
  }
  const std::string* best = nullptr;
  std::size_t best_count = 0;
  double best_mean = 0.0;
  for (const auto& [label, v] : votes) {
    const double mean = v.second / static_cast<double>(v.first);
    if (!best || v.first > best_count || (v.first == best_count && mean < best_mean)) {
      best = &label;
      best_count = v.first;
      best_mean = mean;
    }
  }
  return *best;
}

// ---- Gaussian naive Bayes ------------------------------------------------

std::string predict_gnb(const GnbModel& m, std::span<const double> x) {
  std::size_t best = 0;
  double best_score = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < m.classes.size(); ++c) {
    double score = m.log_priors[c];
    for (std::size_t f = 0; f < x.size(); ++f) {
      const double var = m.variances[c][f];
      const double d = x[f] - m.means[c][f];
      score += -0.5 * std::log(2.0 * std::numbers::pi * var) - d * d / (2.0 * var);
    }
    if (score > best_score) {
      best = c;
      best_score = score;
    }
  }
  return m.classes[best];
}

// ---- CART ---------------------------------------------------------------

double gini(const std::map<std::string, std::size_t>& counts, std::size_t n) {
  double s = 1.0;
  for (const auto& [label, c] : counts) {
    const double p = static_cast<double>(c) / static_cast<double>(n);
    s -= p * p;
  }
  return s;
}

struct TreeBuilder {
  const Dataset& ds;
  TreeParams params;
  bool subsample;
  Rng* rng;  // used only when subsampling
  std::vector<std::string> classes;
  TreeModel model;

  int build(std::vector<std::size_t> idx, std::size_t depth) {
    std::map<std::string, std::size_t> counts;
    for (std::size_t i : idx) ++counts[ds.labels[i]];
    const int node_id = static_cast<int>(model.nodes.size());
    model.nodes.push_back(TreeNode{});
    model.nodes[node_id].label = majority(counts);
    const std::size_t min_leaf = std::max<std::size_t>(params.min_leaf, 1);
    if (counts.size() <= 1 || depth >= params.max_depth || idx.size() < 2 * min_leaf) return node_id;

    const std::size_t d = ds.dim();
    std::vector<std::size_t> features(d);
    std::iota(features.begin(), features.end(), 0);
    if (subsample && d > 1) {
      const std::size_t m = std::max<std::size_t>(1, static_cast<std::size_t>(std::sqrt(static_cast<double>(d))));
      for (std::size_t i = 0; i < m; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng->below(d - i));
        std::swap(features[i], features[j]);
      }
      features.resize(m);
      std::sort(features.begin(), features.end());
    }

    const std::size_t n = idx.size();
    double best_impurity = std::numeric_limits<double>::infinity();
    int best_feature = -1;
    double best_threshold = 0.0;
    std::vector<std::size_t> sorted = idx;
    for (std::size_t f : features) {
      std::stable_sort(sorted.begin(), sorted.end(),
                       [&](std::size_t a, std::size_t b) { return ds.rows[a][f] < ds.rows[b][f]; });
      std::map<std::string, std::size_t> left;
      std::map<std::string, std::size_t> right = counts;
      for (std::size_t pos = 0; pos + 1 < n; ++pos) {
        const std::string& lab = ds.labels[sorted[pos]];
        ++left[lab];
        if (--right[lab] == 0) right.erase(lab);
        const double lo = ds.rows[sorted[pos]][f];
        const double hi = ds.rows[sorted[pos + 1]][f];
        const std::size_t nl = pos + 1;
        const std::size_t nr = n - nl;
        if (lo == hi || nl < min_leaf || nr < min_leaf) continue;
        const double impurity = (static_cast<double>(nl) * gini(left, nl) + static_cast<double>(nr) * gini(right, nr)) /
                                static_cast<double>(n);
        if (impurity < best_impurity) {
          best_impurity = impurity;
          best_feature = static_cast<int>(f);
          double mid = lo + (hi - lo) / 2.0;
          if (!(mid < hi)) mid = lo;
          best_threshold = mid;
        }
      }
    }
    if (best_feature < 0) return node_id;

    std::vector<std::size_t> li, ri;
    for (std::size_t i : idx) {
      (ds.rows[i][static_cast<std::size_t>(best_feature)] <= best_threshold ? li : ri).push_back(i);
    }
    idx.clear();
    idx.shrink_to_fit();
    const int l = build(std::move(li), depth + 1);
    const int r = build(std::move(ri), depth + 1);
    auto& node = model.nodes[node_id];
    node.feature = best_feature;
    node.threshold = best_threshold;
    node.left = l;
    node.right = r;
    return node_id;
  }
};

const std::string& predict_tree(const TreeModel& m, std::span<const double> x) {
  std::size_t i = 0;
  while (m.nodes[i].feature >= 0) {
    const auto& node = m.nodes[i];
    i = static_cast<std::size_t>(x[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left : node.right);
  }
  return m.nodes[i].label;
}

TreeModel grow_tree(const Dataset& ds, std::vector<std::size_t> idx, const TreeParams& params,
                    bool subsample, Rng* rng) {
  TreeBuilder b{ds, params, subsample, rng, {}, {}};
  b.build(std::move(idx), 0);
  return std::move(b.model);
}

}  // namespace

// ---- Dataset --------------------------------------------------------------

std::vector<std::string> Dataset::classes() const {
  std::vector<std::string> c = labels;
  std::sort(c.begin(), c.end());
  c.erase(std::unique(c.begin(), c.end()), c.end());
  return c;
}

void Dataset::validate() const {
  if (labels.size() != rows.size()) throw Error("dataset has mismatched row and label counts");
  if (!group_keys.empty() && group_keys.size() != rows.size()) {
    throw Error("dataset has mismatched row and group key counts");
  }
  const std::size_t d = dim();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i].size() != d) throw Error(fmt::format("row {} has dimension {}, expected {}", i, rows[i].size(), d));
    for (double v : rows[i]) {
      if (!std::isfinite(v)) throw Error(fmt::format("row {} has a non-finite feature", i));
    }
  }
}

Dataset Dataset::subset(std::span<const std::size_t> indices) const {
  Dataset out;
  out.rows.reserve(indices.size());
  out.labels.reserve(indices.size());
  for (std::size_t i : indices) {
    out.rows.push_back(rows[i]);
    out.labels.push_back(labels[i]);
    if (!group_keys.empty()) out.group_keys.push_back(group_keys[i]);
  }
  return out;
}

Dataset permute_labels(const Dataset& ds, std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x5eed));
  Dataset out = ds;
  if (ds.group_keys.empty()) {
    shuffle(out.labels, rng);
    return out;
  }
  std::vector<std::string> keys;
  std::map<std::string, std::string> key_label;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    if (key_label.emplace(ds.group_keys[i], ds.labels[i]).second) keys.push_back(ds.group_keys[i]);
  }
  std::vector<std::string> labs;
  for (const auto& k : keys) labs.push_back(key_label[k]);
  shuffle(labs, rng);
  for (std::size_t i = 0; i < keys.size(); ++i) key_label[keys[i]] = labs[i];
  for (std::size_t i = 0; i < ds.size(); ++i) out.labels[i] = key_label[ds.group_keys[i]];
  return out;
}

std::string model_kind_name(ModelKind kind) {
  switch (kind) {
    case ModelKind::SvmRbf: return "svm-rbf";
    case ModelKind::Knn: return "knn";
    case ModelKind::GaussianNb: return "gnb";
    case ModelKind::Tree: return "tree";
    case ModelKind::Forest: return "forest";
  }
  return "unknown";
}

ModelKind parse_model_kind(std::string_view name) {
  if (name == "svm" || name == "svm-rbf") return ModelKind::SvmRbf;
  if (name == "knn") return ModelKind::Knn;
  if (name == "gnb") return ModelKind::GaussianNb;
  if (name == "tree") return ModelKind::Tree;
  if (name == "forest") return ModelKind::Forest;
  throw Error(fmt::format("unknown classifier '{}'", name));
}

// ---- training ---------------------------------------------------------------

SmoSolution smo_solve(const std::vector<std::vector<double>>& x, std::span<const int> y, double c,
                      double gamma, double tol) {
  const std::size_t n = x.size();
  if (y.size() != n) throw Error("SMO: label count mismatch");
  if (!(c > 0.0) || !(gamma > 0.0) || !(tol > 0.0)) throw Error("SMO needs C, gamma and tol > 0");
  KernelRows kernel(x, gamma);
  std::vector<double> diag(n);
  for (std::size_t i = 0; i < n; ++i) diag[i] = 1.0;  // K(x, x) = 1 for the RBF kernel
  SmoSolution sol;
  sol.alpha.assign(n, 0.0);
  std::vector<double> grad(n, -1.0);  // gradient of 1/2 a'Qa - e'a
  auto& alpha = sol.alpha;
  const auto in_up = [&](std::size_t t) { return (y[t] > 0 && alpha[t] < c) || (y[t] < 0 && alpha[t] > 0.0); };
  const auto in_low = [&](std::size_t t) { return (y[t] > 0 && alpha[t] > 0.0) || (y[t] < 0 && alpha[t] < c); };
  const std::size_t max_iter = std::max<std::size_t>(10'000'000, 100 * n);
  constexpr double kTau = 1e-12;

  for (;;) {
    // Maximal violating pair.
    double gmax = -std::numeric_limits<double>::infinity();
    double gmin = std::numeric_limits<double>::infinity();
    std::size_t i = n;
    std::size_t j = n;
    for (std::size_t t = 0; t < n; ++t) {
      const double v = -y[t] * grad[t];
      if (in_up(t) && v > gmax) {
        gmax = v;
        i = t;
      }
      if (in_low(t) && v < gmin) {
        gmin = v;
        j = t;
      }
    }
    sol.kkt_gap = (i == n || j == n) ? 0.0 : gmax - gmin;
    if (i == n || j == n || gmax - gmin < tol) {
      sol.converged = true;
      break;
    }
    if (sol.iterations >= max_iter) break;
    ++sol.iterations;

    const auto ki = kernel.row(i, 0);
    const auto kj = kernel.row(j, 1);
    const double old_ai = alpha[i];
    const double old_aj = alpha[j];
    if (y[i] != y[j]) {
      // Q_ii + Q_jj + 2 Q_ij with Q_ij = -K_ij here.
      double quad = diag[i] + diag[j] - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (-grad[i] - grad[j]) / quad;
      const double diff = alpha[i] - alpha[j];
      alpha[i] += delta;
      alpha[j] += delta;
      if (diff > 0.0) {
        if (alpha[j] < 0.0) {
          alpha[j] = 0.0;
          alpha[i] = diff;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = -diff;
      }
      if (diff > 0.0) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = c - diff;
        }
      } else if (alpha[j] > c) {
        alpha[j] = c;
        alpha[i] = c + diff;
      }
    } else {
      double quad = diag[i] + diag[j] - 2.0 * ki[j];
      if (quad <= 0.0) quad = kTau;
      const double delta = (grad[i] - grad[j]) / quad;
      const double sum = alpha[i] + alpha[j];
      alpha[i] -= delta;
      alpha[j] += delta;
      if (sum > c) {
        if (alpha[i] > c) {
          alpha[i] = c;
          alpha[j] = sum - c;
        }
      } else if (alpha[j] < 0.0) {
        alpha[j] = 0.0;
        alpha[i] = sum;
      }
      if (sum > c) {
        if (alpha[j] > c) {
          alpha[j] = c;
          alpha[i] = sum - c;
        }
      } else if (alpha[i] < 0.0) {
        alpha[i] = 0.0;
        alpha[j] = sum;
      }
    }
    const double dai = alpha[i] - old_ai;
    const double daj = alpha[j] - old_aj;
    // Q_ti = y_t y_i K_ti
    for (std::size_t t = 0; t < n; ++t) grad[t] += y[t] * (y[i] * ki[t] * dai + y[j] * kj[t] * daj);
  }

  // rho: mean of y G over free vectors, else the midpoint of the feasible range.
  double ub = std::numeric_limits<double>::infinity();
  double lb = -std::numeric_limits<double>::infinity();
  double free_sum = 0.0;
  std::size_t free_count = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const double yg = y[t] * grad[t];
    if (alpha[t] >= c) {
      if (y[t] < 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else if (alpha[t] <= 0.0) {
      if (y[t] > 0) ub = std::min(ub, yg);
      else lb = std::max(lb, yg);
    } else {
      ++free_count;
      free_sum += yg;
    }
  }
  sol.rho = free_count > 0 ? free_sum / static_cast<double>(free_count) : (ub + lb) / 2.0;
  return sol;
}

TrainedModel train_svm_rbf(const Dataset& input, const SvmParams& params) {
  const Dataset ds = canonical(input);
  require_two_classes(ds);
  bool all_same = true;
  for (std::size_t i = 1; i < ds.size() && all_same; ++i) all_same = ds.rows[i] == ds.rows[0];
  if (all_same) throw Error("SVM training data is degenerate: every row is identical");

  SvmModel m;
  m.gamma = params.gamma > 0.0 ? params.gamma : 1.0 / static_cast<double>(std::max<std::size_t>(ds.dim(), 1));
  m.classes = ds.classes();
  for (std::size_t a = 0; a < m.classes.size(); ++a) {
    for (std::size_t b = a + 1; b < m.classes.size(); ++b) {
      std::vector<std::vector<double>> x;
      std::vector<int> y;
      for (std::size_t r = 0; r < ds.size(); ++r) {
        if (ds.labels[r] == m.classes[a] || ds.labels[r] == m.classes[b]) {
          x.push_back(ds.rows[r]);
          y.push_back(ds.labels[r] == m.classes[a] ? 1 : -1);
        }
      }
      const SmoSolution sol = smo_solve(x, y, params.c, m.gamma, params.tol);
      BinarySvm machine;
      machine.positive = m.classes[a];
      machine.negative = m.classes[b];
      machine.rho = sol.rho;
      for (std::size_t r = 0; r < x.size(); ++r) {
        if (sol.alpha[r] > 0.0) {
          machine.support.push_back(x[r]);
          machine.coef.push_back(sol.alpha[r] * y[r]);
        }
      }
      m.machines.push_back(std::move(machine));
    }
  }
  return TrainedModel(std::move(m), ds.dim());
}

TrainedModel train_knn(const Dataset& input, std::size_t k) {
  const Dataset ds = canonical(input);
  if (ds.size() == 0) throw Error("k-NN needs training rows");
  if (k < 1 || k > ds.size()) throw Error(fmt::format("k = {} must be in [1, {}]", k, ds.size()));
  return TrainedModel(KnnModel{k, ds.rows, ds.labels}, ds.dim());
}

TrainedModel train_gnb(const Dataset& input) {
  const Dataset ds = canonical(input);
  if (ds.size() == 0) throw Error("naive Bayes needs training rows");
  const std::size_t d = ds.dim();
  GnbModel m;
  m.classes = ds.classes();
  // Smoothing: 1e-9 times the largest per-feature variance of the whole set.
  double max_var = 0.0;
  for (std::size_t f = 0; f < d; ++f) {
    double mean = 0.0;
    for (const auto& r : ds.rows) mean += r[f];
    mean /= static_cast<double>(ds.size());
    double var = 0.0;
    for (const auto& r : ds.rows) var += (r[f] - mean) * (r[f] - mean);
    max_var = std::max(max_var, var / static_cast<double>(ds.size()));
  }
  const double eps = max_var > 0.0 ? 1e-9 * max_var : 1e-9;
  for (const auto& cls : m.classes) {
    std::vector<std::size_t> members;
    for (std::size_t r = 0; r < ds.size(); ++r)
      if (ds.labels[r] == cls) members.push_back(r);
    if (members.empty()) throw Error(fmt::format("class {} is empty", cls));
    const double cnt = static_cast<double>(members.size());
    std::vector<double> mean(d, 0.0), var(d, 0.0);
    for (std::size_t r : members)
      for (std::size_t f = 0; f < d; ++f) mean[f] += ds.rows[r][f];
    for (double& v : mean) v /= cnt;
    for (std::size_t r : members)
      for (std::size_t f = 0; f < d; ++f) var[f] += (ds.rows[r][f] - mean[f]) * (ds.rows[r][f] - mean[f]);
    for (double& v : var) v = v / cnt + eps;
    m.log_priors.push_back(std::log(cnt / static_cast<double>(ds.size())));
    m.means.push_back(std::move(mean));
    m.variances.push_back(std::move(var));
  }
  return TrainedModel(std::move(m), d);
}

TrainedModel train_tree(const Dataset& input, const TreeParams& params) {
  const Dataset ds = canonical(input);
  if (ds.size() == 0) throw Error("decision tree needs training rows");
  std::vector<std::size_t> idx(ds.size());
  std::iota(idx.begin(), idx.end(), 0);
  return TrainedModel(grow_tree(ds, std::move(idx), params, false, nullptr), ds.dim());
}

TrainedModel train_forest(const Dataset& input, const ForestParams& params) {
  const Dataset ds = canonical(input);
  if (ds.size() == 0) throw Error("random forest needs training rows");
  if (params.n_trees == 0) throw Error("random forest needs at least one tree");
  ForestModel m;
  m.trees.resize(params.n_trees);
  m.tree_seeds.resize(params.n_trees);
  for (std::size_t t = 0; t < params.n_trees; ++t) m.tree_seeds[t] = derive_seed(params.seed, t);
  parallel_for(params.n_trees, params.threads, [&](std::size_t t) {
    Rng rng(m.tree_seeds[t]);
    std::vector<std::size_t> idx(ds.size());
    if (params.bootstrap) {
      for (auto& i : idx) i = static_cast<std::size_t>(rng.below(ds.size()));
      std::sort(idx.begin(), idx.end());
    } else {
      std::iota(idx.begin(), idx.end(), 0);
    }
    m.trees[t] = grow_tree(ds, std::move(idx), params.tree, params.feature_subsample, &rng);
  });
  return TrainedModel(std::move(m), ds.dim());
}

TrainedModel train(const Dataset& ds, const ModelSpec& spec) {
  switch (spec.kind) {
    case ModelKind::SvmRbf: return train_svm_rbf(ds, spec.svm);
    case ModelKind::Knn: return train_knn(ds, std::min(spec.knn_k, ds.size()));
    case ModelKind::GaussianNb: return train_gnb(ds);
    case ModelKind::Tree: return train_tree(ds, spec.tree);
    case ModelKind::Forest: return train_forest(ds, spec.forest);
  }
  throw Error("unknown model kind");
}

ModelKind TrainedModel::kind() const {
  return std::visit(
      [](const auto& m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SvmModel>) return ModelKind::SvmRbf;
        else if constexpr (std::is_same_v<T, KnnModel>) return ModelKind::Knn;
        else if constexpr (std::is_same_v<T, GnbModel>) return ModelKind::GaussianNb;
        else if constexpr (std::is_same_v<T, TreeModel>) return ModelKind::Tree;
        else return ModelKind::Forest;
      },
      impl_);
}

std::string TrainedModel::predict(std::span<const double> x) const {
  if (x.size() != dim_) throw Error(fmt::format("query has dimension {}, model expects {}", x.size(), dim_));
  return std::visit(
      [&](const auto& m) -> std::string {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, SvmModel>) return predict_svm(m, x);
        else if constexpr (std::is_same_v<T, KnnModel>) return predict_knn(m, x);
        else if constexpr (std::is_same_v<T, GnbModel>) return predict_gnb(m, x);
        else if constexpr (std::is_same_v<T, TreeModel>) return predict_tree(m, x);
        else {
          std::map<std::string, std::size_t> votes;
          for (const auto& tree : m.trees) ++votes[predict_tree(tree, x)];
          return majority(votes);
        }
      },
      impl_);
}

// ---- scaling and cross-validation -------------------------------------------

FeatureScaler FeatureScaler::fit(const Dataset& ds) {
  const std::size_t d = ds.dim();
  FeatureScaler s;
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 1.0);
  if (ds.size() == 0) return s;
  for (const auto& r : ds.rows)
    for (std::size_t f = 0; f < d; ++f) s.mean[f] += r[f];
  for (double& m : s.mean) m /= static_cast<double>(ds.size());
  std::vector<double> var(d, 0.0);
  for (const auto& r : ds.rows)
    for (std::size_t f = 0; f < d; ++f) var[f] += (r[f] - s.mean[f]) * (r[f] - s.mean[f]);
  for (std::size_t f = 0; f < d; ++f) {
    const double sd = std::sqrt(var[f] / static_cast<double>(ds.size()));
    s.scale[f] = sd > 1e-12 * std::max(1.0, std::abs(s.mean[f])) ? sd : 1.0;
  }
  return s;
}

std::vector<double> FeatureScaler::apply(std::span<const double> x) const {
  std::vector<double> out(x.size());
  for (std::size_t f = 0; f < x.size(); ++f) out[f] = (x[f] - mean[f]) / scale[f];
  return out;
}

Dataset FeatureScaler::apply(const Dataset& ds) const {
  Dataset out = ds;
  for (auto& r : out.rows) r = apply(r);
  return out;
}

namespace {

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
};

// Units are rows, or subjects when grouping; each unit carries one label.
struct Units {
  std::vector<std::vector<std::size_t>> members;
  std::vector<std::string> labels;
};

Units make_units(const Dataset& ds, bool group) {
  Units u;
  if (!group) {
    for (std::size_t i = 0; i < ds.size(); ++i) {
      u.members.push_back({i});
      u.labels.push_back(ds.labels[i]);
    }
    return u;
  }
  if (ds.group_keys.empty()) throw Error("grouped cross-validation needs subject keys");
  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < ds.size(); ++i) {
    auto [it, inserted] = index.emplace(ds.group_keys[i], u.members.size());
    if (inserted) u.members.emplace_back();
    u.members[it->second].push_back(i);
  }
  for (const auto& m : u.members) {
    std::map<std::string, std::size_t> votes;
    for (std::size_t i : m) ++votes[ds.labels[i]];
    u.labels.push_back(majority(votes));
  }
  return u;
}

std::size_t train_count(std::size_t m, double frac) {
  const auto k = static_cast<std::size_t>(std::llround(frac * static_cast<double>(m)));
  return std::clamp<std::size_t>(k, 1, m - 1);
}

Split draw_split(const Units& units, const std::vector<std::string>& classes, double frac, bool stratified,
                 Rng& rng) {
  std::vector<std::size_t> train_units;
  std::vector<std::size_t> test_units;
  if (stratified) {
    for (const auto& cls : classes) {
      std::vector<std::size_t> pool;
      for (std::size_t u = 0; u < units.labels.size(); ++u)
        if (units.labels[u] == cls) pool.push_back(u);
      shuffle(pool, rng);
      const std::size_t k = train_count(pool.size(), frac);
      train_units.insert(train_units.end(), pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
      test_units.insert(test_units.end(), pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end());
    }
  } else {
    std::vector<std::size_t> pool(units.labels.size());
    std::iota(pool.begin(), pool.end(), 0);
    for (int attempt = 0;; ++attempt) {
      shuffle(pool, rng);
      const std::size_t k = train_count(pool.size(), frac);
      std::vector<std::string> seen;
      for (std::size_t i = 0; i < k; ++i) seen.push_back(units.labels[pool[i]]);
      std::sort(seen.begin(), seen.end());
      if (std::unique(seen.begin(), seen.end()) - seen.begin() >= 2 || attempt == 1000) {
        train_units.assign(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(k));
        test_units.assign(pool.begin() + static_cast<std::ptrdiff_t>(k), pool.end());
        break;
      }
    }
  }
  Split s;
  for (std::size_t u : train_units) s.train.insert(s.train.end(), units.members[u].begin(), units.members[u].end());
  for (std::size_t u : test_units) s.test.insert(s.test.end(), units.members[u].begin(), units.members[u].end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace

CVReport cross_validate(const Dataset& ds, const ModelSpec& spec, const CvOptions& opts) {
  ds.validate();
  if (opts.n_repeats < 1) throw Error("cross-validation needs at least one repeat");
  if (!(opts.train_frac > 0.0 && opts.train_frac < 1.0)) throw Error("train fraction must be in (0, 1)");
  const Units units = make_units(ds, opts.group_by_subject);
  CVReport report;
  report.classes = ds.classes();
  if (report.classes.size() < 2) throw Error("cross-validation needs at least 2 classes");
  for (const auto& cls : report.classes) {
    const auto m = static_cast<std::size_t>(std::count(units.labels.begin(), units.labels.end(), cls));
    if (m < 2) {
      throw Error(fmt::format("class {} has {} {}; cross-validation needs at least 2", cls, m,
                              opts.group_by_subject ? "subjects" : "rows"));
    }
  }
  const std::size_t k = report.classes.size();
  std::map<std::string, std::size_t> class_index;
  for (std::size_t i = 0; i < k; ++i) class_index[report.classes[i]] = i;

  report.n_repeats = opts.n_repeats;
  report.grouped_by_subject = opts.group_by_subject;
  report.stratified = opts.stratified;
  report.per_fold.assign(opts.n_repeats, 0.0);
  std::vector<std::vector<std::vector<std::size_t>>> confusions(
      opts.n_repeats, std::vector<std::vector<std::size_t>>(k, std::vector<std::size_t>(k, 0)));

  parallel_for(opts.n_repeats, opts.threads, [&](std::size_t r) {
    Rng rng(derive_seed(opts.seed, r));
    const Split split = draw_split(units, report.classes, opts.train_frac, opts.stratified, rng);
    Dataset train_ds = ds.subset(split.train);
    Dataset test_ds = ds.subset(split.test);
    if (opts.standardize) {
      const FeatureScaler scaler = FeatureScaler::fit(train_ds);
      train_ds = scaler.apply(train_ds);
      test_ds = scaler.apply(test_ds);
    }
    ModelSpec fold_spec = spec;
    fold_spec.forest.seed = derive_seed(spec.forest.seed, r);
    fold_spec.forest.threads = 1;
    const TrainedModel model = train(train_ds, fold_spec);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < test_ds.size(); ++i) {
      const std::string pred = model.predict(test_ds.rows[i]);
      correct += pred == test_ds.labels[i];
      ++confusions[r][class_index.at(test_ds.labels[i])][class_index.at(pred)];
    }
    report.per_fold[r] = static_cast<double>(correct) / static_cast<double>(test_ds.size());
  });

  report.confusion.assign(k, std::vector<std::size_t>(k, 0));
  for (const auto& conf : confusions)
    for (std::size_t a = 0; a < k; ++a)
      for (std::size_t b = 0; b < k; ++b) report.confusion[a][b] += conf[a][b];
  const double n = static_cast<double>(opts.n_repeats);
  report.mean_accuracy = std::accumulate(report.per_fold.begin(), report.per_fold.end(), 0.0) / n;
  if (opts.n_repeats > 1) {
    double ss = 0.0;
    for (double a : report.per_fold) ss += (a - report.mean_accuracy) * (a - report.mean_accuracy);
    report.std_accuracy = std::sqrt(ss / (n - 1.0));
  }
  return report;
}

}  // namespace rmtfeat
