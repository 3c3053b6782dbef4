#pragma once

// Saliency evaluation: insertion curves and scores, performance information
// curves (AIC / SIC) over two information estimators, and their AUCs.
// Every curve depends on the saliency map only through its pixel ranking.

#include <array>
#include <functional>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "idgi/models.hpp"
#include "idgi/tensor.hpp"

namespace idgi {

struct CurvePoint {
  double x;
  double y;
};

enum class XSemantics { kInsertedFraction, kInformationLevel };
enum class YSemantics { kProbability, kProbabilityRatio, kAccuracy };
enum class Aggregation { kRaw, kBinnedMedian, kBinnedMean };

struct MetricCurve {
  std::vector<CurvePoint> points;
  XSemantics x_semantics = XSemantics::kInsertedFraction;
  YSemantics y_semantics = YSemantics::kProbability;
  Aggregation aggregation = Aggregation::kRaw;
};

// Trapezoidal area over [min x, max x], divided by the x range.
double auc(const MetricCurve& curve);

// "x,y" header then one row per point, 17 significant digits.
void write_curve_csv(std::ostream& out, const MetricCurve& curve);

// ---- structural similarity ------------------------------------------------

struct SsimParams {
  int window = 8;
  double k1 = 0.01;
  double k2 = 0.03;
  double dynamic_range = 1.0;
  std::array<double, 5> scale_weights{0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
};

// Mean SSIM over all window positions (uniform window, no padding, population
// statistics). Multi-channel inputs are averaged to grayscale first.
double ssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params = {});

// Number of pyramid levels msssim will use for this shape.
int msssim_scales(const Shape& shape, const SsimParams& params = {});

// Contrast-structure terms at every level, luminance only at the coarsest;
// levels limited to what the window fits, with weights renormalized.
double msssim(const ImageTensor& a, const ImageTensor& b, const SsimParams& params = {});

// ---- information estimators -------------------------------------------------

// Bits per pixel of a lossless predictive coder: entropy of the 8-bit
// left-neighbour prediction residuals of the grayscale image.
double entropy_proxy(const ImageTensor& img);

// (H(img) - H(base)) / (H(original) - H(base)), clamped to [0,1];
// 0 when the denominator is below 1e-9.
double normalized_entropy(const ImageTensor& img, const ImageTensor& base,
                          const ImageTensor& original);

// Same normalization with MS-SSIM against the original as the measure:
// (m(img) - m(base)) / (1 - m(base)), m(v) = msssim(v, original).
double msssim_information(const ImageTensor& img, const ImageTensor& base,
                          const ImageTensor& original);

enum class Estimator { kNormalizedEntropy, kMsssim };

using InformationEstimator = std::function<double(
    const ImageTensor& img, const ImageTensor& base, const ImageTensor& original)>;

InformationEstimator make_estimator(Estimator kind);

// ---- composition --------------------------------------------------------------

// Blur sigma for bokeh/insertion bases: 8 at 16 px, proportional to the
// shorter side.
double default_base_sigma(const Shape& shape);
ImageTensor default_bokeh_base(const ImageTensor& original);

// Number of pixels revealed for a fraction of `pixels`.
std::size_t revealed_count(double fraction, std::size_t pixels);

// Copies the top `top_fraction` pixels of `original` (all channels), ranked
// by saliency, onto `base`.
ImageTensor bokeh_compose(const ImageTensor& original, const ImageTensor& base,
                          std::span<const double> saliency, double top_fraction);

// ---- curves ---------------------------------------------------------------------

enum class PicMode { kAccuracy, kSoftmaxRatio };

const std::vector<double>& default_pic_fractions();

struct PicOptions {
  Estimator estimator = Estimator::kMsssim;
  std::vector<double> fractions = default_pic_fractions();
  int bins = 25;
  PicMode mode = PicMode::kSoftmaxRatio;
};

// AIC (accuracy mode) or SIC (softmax-ratio mode) curve for one image.
MetricCurve pic_curve(const DifferentiableModel& model, int c, const ImageTensor& original,
                      std::span<const double> saliency, const PicOptions& options = {});
MetricCurve pic_curve(const DifferentiableModel& model, int c, const ImageTensor& original,
                      std::span<const double> saliency, const InformationEstimator& estimator,
                      const PicOptions& options);

// Uniform x-bins: mean (accuracy) or median (ratio) per bin, (0,0) prepended,
// (1, last bin) appended, empty bins linearly interpolated.
MetricCurve bin_curve(const std::vector<CurvePoint>& samples, int bins, Aggregation aggregation);

enum class BaseMode { kBlurred, kBlack };

// k = 0..steps: y = f_c of the image with the top k/steps pixels revealed.
MetricCurve insertion_curve(const DifferentiableModel& model, int c, const ImageTensor& original,
                            std::span<const double> saliency, BaseMode base = BaseMode::kBlurred,
                            int steps = 64);

enum class InsertionMode { kProbability, kProbabilityRatio };

double insertion_score(const MetricCurve& curve, InsertionMode mode, double p_original);

}  // namespace idgi
