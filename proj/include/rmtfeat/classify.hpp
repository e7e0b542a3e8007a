#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <variant>
#include <vector>

namespace rmtfeat {

struct Dataset {
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
  std::vector<std::string> group_keys;  // empty, or the subject of each row

  std::size_t size() const { return rows.size(); }
  std::size_t dim() const { return rows.empty() ? 0 : rows.front().size(); }
  // Sorted distinct labels.
  std::vector<std::string> classes() const;
  // Equal row lengths, finite values, labels/keys sized to match.
  void validate() const;
  Dataset subset(std::span<const std::size_t> indices) const;
};

// Permutes labels across subjects when group keys are present (every row of a
// subject keeps a common label), otherwise across rows.
Dataset permute_labels(const Dataset& ds, std::uint64_t seed);

enum class ModelKind { SvmRbf, Knn, GaussianNb, Tree, Forest };
std::string model_kind_name(ModelKind kind);  // svm-rbf, knn, gnb, tree, forest
ModelKind parse_model_kind(std::string_view name);  // also accepts "svm"

struct SvmParams {
  double c{1.0};
  double gamma{0.0};  // 0 selects 1 / dim
  double tol{1e-3};
};

struct TreeParams {
  std::size_t max_depth{16};
  std::size_t min_leaf{1};
};

struct ForestParams {
  std::size_t n_trees{50};
  bool feature_subsample{true};  // sqrt(d) candidate features per split
  bool bootstrap{true};
  TreeParams tree{};
  std::uint64_t seed{0};
  unsigned threads{1};
};

// Dual solution of one binary C-SVC problem; y is +1/-1.
struct SmoSolution {
  std::vector<double> alpha;
  double rho{0.0};  // decision(x) = sum alpha_i y_i K(x_i, x) - rho
  std::size_t iterations{0};
  double kkt_gap{0.0};  // max violation m(alpha) - M(alpha) at exit
  bool converged{false};
};

SmoSolution smo_solve(const std::vector<std::vector<double>>& x, std::span<const int> y, double c,
                      double gamma, double tol);

struct BinarySvm {
  std::string positive;  // label for decision > 0
  std::string negative;
  std::vector<std::vector<double>> support;
  std::vector<double> coef;  // alpha_i * y_i
  double rho{0.0};
};

struct SvmModel {
  double gamma{1.0};
  std::vector<std::string> classes;
  std::vector<BinarySvm> machines;  // one per class pair (i < j)
};

struct KnnModel {
  std::size_t k{1};
  std::vector<std::vector<double>> rows;
  std::vector<std::string> labels;
};

struct GnbModel {
  std::vector<std::string> classes;
  std::vector<double> log_priors;
  std::vector<std::vector<double>> means;
  std::vector<std::vector<double>> variances;
};

struct TreeNode {
  int feature{-1};  // -1 marks a leaf
  double threshold{0.0};  // x[feature] <= threshold goes left
  int left{-1};
  int right{-1};
  std::string label;
};

struct TreeModel {
  std::vector<TreeNode> nodes;  // nodes[0] is the root
};

struct ForestModel {
  std::vector<TreeModel> trees;
  std::vector<std::uint64_t> tree_seeds;
};

class TrainedModel {
 public:
  using Impl = std::variant<SvmModel, KnnModel, GnbModel, TreeModel, ForestModel>;

  TrainedModel(Impl impl, std::size_t dim) : impl_(std::move(impl)), dim_(dim) {}

  ModelKind kind() const;
  std::size_t dim() const { return dim_; }
  const Impl& impl() const { return impl_; }

  // Total on finite inputs of the training dimension.
  std::string predict(std::span<const double> x) const;

 private:
  Impl impl_;
  std::size_t dim_;
};

// Every trainer first sorts rows into a canonical order, so the model does not
// depend on the order rows were supplied in.
TrainedModel train_svm_rbf(const Dataset& ds, const SvmParams& params = {});
TrainedModel train_knn(const Dataset& ds, std::size_t k);
TrainedModel train_gnb(const Dataset& ds);
TrainedModel train_tree(const Dataset& ds, const TreeParams& params = {});
TrainedModel train_forest(const Dataset& ds, const ForestParams& params = {});

struct ModelSpec {
  ModelKind kind{ModelKind::SvmRbf};
  SvmParams svm{};
  std::size_t knn_k{5};
  TreeParams tree{};
  ForestParams forest{};
};

TrainedModel train(const Dataset& ds, const ModelSpec& spec);

// Per-feature z-scoring fitted on a training split. Constant features get
// scale 1.
struct FeatureScaler {
  std::vector<double> mean;
  std::vector<double> scale;

  static FeatureScaler fit(const Dataset& ds);
  std::vector<double> apply(std::span<const double> x) const;
  Dataset apply(const Dataset& ds) const;
};

struct CvOptions {
  double train_frac{0.8};
  std::size_t n_repeats{10};
  std::uint64_t seed{0};
  bool stratified{true};
  bool group_by_subject{false};
  bool standardize{true};
  unsigned threads{1};
};

struct CVReport {
  double mean_accuracy{0.0};
  double std_accuracy{0.0};  // sample standard deviation over repeats
  std::size_t n_repeats{0};
  std::vector<double> per_fold;
  std::vector<std::string> classes;
  std::vector<std::vector<std::size_t>> confusion;  // [true][predicted], summed over repeats
  bool grouped_by_subject{false};
  bool stratified{true};
};

// Repeated random train/test splits (train_frac / rest). With
// group_by_subject every subject falls wholly on one side of each split.
CVReport cross_validate(const Dataset& ds, const ModelSpec& spec, const CvOptions& opts);

}  // namespace rmtfeat
