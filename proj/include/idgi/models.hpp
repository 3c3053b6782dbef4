#pragma once

// Differentiable classifiers: the abstract interface the attribution code
// integrates over, plus three reference implementations with exact
// gradients and a small trainer for the conv net.

#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "idgi/tensor.hpp"

namespace idgi {

class DifferentiableModel {
 public:
  virtual ~DifferentiableModel() = default;

  virtual Shape input_shape() const = 0;
  virtual int num_classes() const = 0;

  // Class probabilities. Models with probabilistic() == false return raw
  // per-class scores instead.
  virtual std::vector<double> predict(const ImageTensor& x) const = 0;

  // f_c(x): the scalar the attribution methods integrate.
  virtual double score(const ImageTensor& x, int c) const;

  // Exact gradient of score(x, c) with respect to x.
  virtual Tensor gradient(const ImageTensor& x, int c) const = 0;

  virtual bool probabilistic() const { return true; }

  int argmax(const ImageTensor& x) const;

 protected:
  void check_input(const ImageTensor& x) const;
  void check_class(int c) const;
};

std::vector<double> softmax(const std::vector<double>& logits);

// logit_c(x) = w_c . x + b_c. In kSoftmax mode f_c is the softmax
// probability; in kLogit mode f_c is the raw logit (non-probabilistic).
class LinearSoftmaxModel final : public DifferentiableModel {
 public:
  enum class Output { kSoftmax, kLogit };

  // weights is num_classes rows of input_shape.size() values each.
  LinearSoftmaxModel(Shape input_shape, std::vector<double> weights,
                     std::vector<double> biases, Output output = Output::kSoftmax);

  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return static_cast<int>(biases_.size()); }
  std::vector<double> predict(const ImageTensor& x) const override;
  double score(const ImageTensor& x, int c) const override;
  Tensor gradient(const ImageTensor& x, int c) const override;
  bool probabilistic() const override { return output_ == Output::kSoftmax; }

  Output output() const { return output_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<double>& biases() const { return biases_; }
  std::vector<double> logits(const ImageTensor& x) const;

 private:
  Shape shape_;
  std::vector<double> weights_;
  std::vector<double> biases_;
  Output output_;
};

// score_c(x) = 1/2 x^T A_c x with symmetric A_c; gradient A_c x.
// Scores are returned as-is (non-probabilistic).
class QuadraticScoreModel final : public DifferentiableModel {
 public:
  // matrices holds num_classes row-major D x D blocks, D = input_shape.size().
  QuadraticScoreModel(Shape input_shape, std::vector<double> matrices);

  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }
  std::vector<double> predict(const ImageTensor& x) const override;
  double score(const ImageTensor& x, int c) const override;
  Tensor gradient(const ImageTensor& x, int c) const override;
  bool probabilistic() const override { return false; }

  const std::vector<double>& matrices() const { return matrices_; }

 private:
  Shape shape_;
  int classes_;
  std::vector<double> matrices_;
};

// 3x3 conv (8 filters, stride 1, reflection pad) -> softplus -> 2x2 average
// pool -> dense -> softmax. Parameters live in one flat vector:
//   conv weights [filter][channel][ky][kx], conv biases [filter],
//   dense weights [class][pooled feature], dense biases [class],
// with pooled features ordered (py, px, filter).
class TinyConvNet final : public DifferentiableModel {
 public:
  static constexpr int kFilters = 8;
  static constexpr int kKernel = 3;

  TinyConvNet(Shape input_shape, int num_classes, std::vector<double> params);

  // Glorot-uniform weights drawn from `seed`, zero biases.
  static TinyConvNet initialized(Shape input_shape, int num_classes, std::uint64_t seed);

  static std::size_t param_count(Shape input_shape, int num_classes);

  Shape input_shape() const override { return shape_; }
  int num_classes() const override { return classes_; }
  std::vector<double> predict(const ImageTensor& x) const override;
  Tensor gradient(const ImageTensor& x, int c) const override;

  const std::vector<double>& params() const { return params_; }

  // Cross-entropy loss for label `label`, accumulating d(loss)/d(params)
  // into `param_grad`. Returns the loss.
  double loss_and_param_gradient(const ImageTensor& x, int label,
                                 std::vector<double>& param_grad) const;

  void apply_update(const std::vector<double>& step, double scale);

 private:
  struct Forward;
  Forward forward(const ImageTensor& x) const;
  // Backpropagates d(.)/d(logits). Either output may be null.
  void backward(const Forward& fwd, const std::vector<double>& dlogits, Tensor* dinput,
                std::vector<double>* dparams) const;

  Shape shape_;
  int classes_;
  int pooled_h_;
  int pooled_w_;
  std::vector<double> params_;
};

// Central differences: (f_c(x + h e_i) - f_c(x - h e_i)) / 2h per coordinate.
Tensor finite_diff_gradient(const DifferentiableModel& model, const ImageTensor& x, int c,
                            double h);

struct ToyDataset {
  std::vector<ImageTensor> images;
  std::vector<int> labels;
  int num_classes = 0;
  std::uint64_t seed = 0;
};

// Filled square (0), disk (1) and cross (2) drawn over a noise background.
ToyDataset make_shapes_dataset(int count, std::uint64_t seed, Shape shape = {16, 16, 1});

// Two classes: a bright Gaussian blob in the left or right half.
ToyDataset make_blob_dataset(int count, std::uint64_t seed, Shape shape = {16, 16, 1});

struct TrainOptions {
  int epochs = 200;
  double learning_rate = 0.3;
  int batch_size = 8;
  std::uint64_t seed = 1;
};

struct TrainResult {
  TinyConvNet model;
  double train_accuracy;
};

// Minibatch SGD on cross-entropy with a seed-fixed shuffle per epoch.
TrainResult train_toy(const ToyDataset& data, const TrainOptions& options);

double accuracy(const DifferentiableModel& model, const std::vector<ImageTensor>& images,
                const std::vector<int>& labels);

// Model files: "ATBM", u32 version, u32 architecture tag, u32 height, width,
// channels, classes, then the weight blob (u64 count + f64 values) and a
// CRC32 of everything before it. All little-endian.
inline constexpr std::uint32_t kModelFormatVersion = 1;

std::string encode_model(const DifferentiableModel& model);
std::unique_ptr<DifferentiableModel> decode_model(std::string bytes);
void save_model(const DifferentiableModel& model, const std::filesystem::path& path);
std::unique_ptr<DifferentiableModel> load_model(const std::filesystem::path& path);

}  // namespace idgi
