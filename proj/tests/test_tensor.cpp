#include <doctest.h>

#include <cmath>
#include <fstream>
#include <numeric>

#include "idgi/errors.hpp"
#include "idgi/tensor.hpp"
#include "test_util.hpp"

using namespace idgi;

namespace {

// Direct 2-D convolution with the outer product of the 1-D kernel.
Tensor blur_oracle(const Tensor& img, double sigma) {
  const auto k = gaussian_kernel(sigma);
  const int r = static_cast<int>(k.size() / 2);
  Tensor out(img.shape());
  for (int y = 0; y < img.height(); ++y)
    for (int x = 0; x < img.width(); ++x)
      for (int c = 0; c < img.channels(); ++c) {
        double acc = 0.0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx)
            acc += k[dy + r] * k[dx + r] *
                   img.at(reflect_index(y + dy, img.height()), reflect_index(x + dx, img.width()), c);
        out.at(y, x, c) = std::clamp(acc, 0.0, 1.0);
      }
  return out;
}

double total(const Tensor& t) { return std::accumulate(t.values().begin(), t.values().end(), 0.0); }

}  // namespace

TEST_CASE("tensor construction validates shape, length and finiteness") {
  CHECK_THROWS_AS(Tensor(Shape{0, 2, 1}), InvalidArgument);
  CHECK_THROWS_AS(Tensor(Shape{2, 2, 1}, std::vector<double>(3)), InvalidArgument);
  CHECK_THROWS_AS(Tensor(Shape{1, 1, 1}, std::vector<double>{NAN}), InvalidArgument);
  Tensor t(Shape{2, 3, 2}, 0.5);
  CHECK(t.size() == 12);
  t.at(1, 2, 1) = 7.0;
  CHECK(t[(1 * 3 + 2) * 2 + 1] == 7.0);
  CHECK_FALSE(t.in_unit_range());
}

TEST_CASE("reflect_index is half-sample symmetric for any offset") {
  CHECK(reflect_index(-1, 4) == 0);
  CHECK(reflect_index(-2, 4) == 1);
  CHECK(reflect_index(4, 4) == 3);
  CHECK(reflect_index(5, 4) == 2);
  CHECK(reflect_index(8, 4) == 0);
  CHECK(reflect_index(-9, 4) == 0);
  CHECK(reflect_index(3, 1) == 0);
}

TEST_CASE("gaussian kernel") {
  CHECK_THROWS_AS(gaussian_kernel(0.0), InvalidArgument);
  CHECK_THROWS_AS(gaussian_kernel(-1.0), InvalidArgument);
  const auto k = gaussian_kernel(1.0);
  CHECK(k.size() == 9);
  CHECK(std::accumulate(k.begin(), k.end(), 0.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(k[3] == doctest::Approx(k[5]));
  // sigma 0.1: almost all mass at the centre
  const auto narrow = gaussian_kernel(0.1);
  CHECK(narrow.size() == 3);
  CHECK(narrow[1] * narrow[1] >= 0.99);
}

TEST_CASE("blur of a constant image is constant") {
  Tensor img(Shape{5, 7, 3}, 0.375);
  for (double sigma : {0.3, 1.0, 6.0, 40.0}) {
    const Tensor out = gaussian_blur(img, sigma);
    for (double v : out.values()) CHECK(v == doctest::Approx(0.375).epsilon(1e-14));
  }
  CHECK_THROWS_AS(gaussian_blur(img, 0.0), InvalidArgument);
}

TEST_CASE("blur of a small impulse keeps its mass for tiny sigma") {
  Tensor img(Shape{5, 5, 1});
  img.at(2, 2, 0) = 1.0;
  CHECK(gaussian_blur(img, 0.1).at(2, 2, 0) >= 0.99);
}

TEST_CASE("blur matches a brute-force 2-D convolution") {
  Tensor impulse(Shape{3, 3, 1});
  impulse.at(1, 1, 0) = 1.0;
  const Tensor out = gaussian_blur(impulse, 1.0);
  const Tensor ref = blur_oracle(impulse, 1.0);
  for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(ref[i]).epsilon(1e-12));

  const Tensor img = testutil::random_tensor({9, 6, 2}, 3);
  const Tensor a = gaussian_blur(img, 1.7);
  const Tensor b = blur_oracle(img, 1.7);
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("blur preserves the image mean and composes approximately") {
  const Tensor img = testutil::random_tensor({16, 16, 1}, 11);
  const Tensor out = gaussian_blur(img, 2.0);
  CHECK(total(out) == doctest::Approx(total(img)).epsilon(1e-12));

  const Tensor twice = gaussian_blur(gaussian_blur(img, 1.0), 1.5);
  const Tensor once = gaussian_blur(img, std::sqrt(1.0 + 1.5 * 1.5));
  double worst = 0.0;
  for (std::size_t i = 0; i < img.size(); ++i) worst = std::max(worst, std::abs(twice[i] - once[i]));
  CHECK(worst < 1e-3);
}

TEST_CASE("parallel blur is bit-identical to the serial reference") {
  const Tensor img = testutil::random_tensor({96, 80, 3}, 5);
  CHECK(gaussian_blur(img, 3.0) == gaussian_blur_serial(img, 3.0));
  CHECK(gaussian_blur(img, 0.7) == gaussian_blur_serial(img, 0.7));
}

TEST_CASE("downsample2x") {
  CHECK(downsample2x(Tensor(Shape{2, 2, 1}, {0, 0, 1, 1}))[0] == 0.5);
  const Tensor c = downsample2x(Tensor(Shape{6, 4, 2}, 0.25));
  CHECK(c.shape() == Shape{3, 2, 2});
  for (double v : c.values()) CHECK(v == 0.25);
  Tensor checker(Shape{4, 4, 1});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) checker.at(y, x, 0) = (x + y) % 2;
  const Tensor half = downsample2x(checker);
  CHECK(half.shape() == Shape{2, 2, 1});
  for (double v : half.values()) CHECK(v == 0.5);
  CHECK(downsample2x(Tensor(Shape{5, 3, 1})).shape() == Shape{2, 1, 1});
  CHECK_THROWS_AS(downsample2x(Tensor(Shape{1, 4, 1})), InvalidArgument);
}

TEST_CASE("minmax_normalize") {
  CHECK(minmax_normalize(std::vector<double>{2, 4}) == std::vector<double>{0, 1});
  CHECK(minmax_normalize(std::vector<double>{5, 5, 5}) == std::vector<double>{0, 0, 0});
  CHECK(minmax_normalize(std::vector<double>{-1, 0, 3}) == std::vector<double>{0, 0.25, 1});
  CHECK_THROWS_AS(minmax_normalize(std::vector<double>{1, INFINITY}), InvalidArgument);
  CHECK_THROWS_AS(minmax_normalize(std::vector<double>{}), InvalidArgument);
}

TEST_CASE("grayscale, clamp and ranking") {
  const Tensor rgb(Shape{1, 2, 3}, {0.0, 0.3, 0.6, 1.0, 1.0, 0.4});
  const Tensor g = to_grayscale(rgb);
  CHECK(g.shape() == Shape{1, 2, 1});
  CHECK(g[0] == doctest::Approx(0.3));
  CHECK(g[1] == doctest::Approx(0.8));
  const Tensor cl = clamp_unit(Tensor(Shape{1, 3, 1}, {-0.5, 0.5, 2.0}));
  CHECK(cl == Tensor(Shape{1, 3, 1}, {0.0, 0.5, 1.0}));
  const auto order = rank_pixels(std::vector<double>{0.2, 0.9, 0.2, 0.5}).ordering;
  CHECK(order == std::vector<std::size_t>{1, 3, 0, 2});
}

TEST_CASE("PNM files round-trip at 8 bits and report malformed input") {
  const auto dir = testutil::scratch_dir("pnm");
  Tensor gray(Shape{3, 4, 1});
  for (std::size_t i = 0; i < gray.size(); ++i) gray[i] = static_cast<double>(i * 20) / 255.0;
  write_pnm(dir / "g.pgm", gray);
  CHECK(read_pnm(dir / "g.pgm") == gray);

  const Tensor rgb = testutil::random_tensor({2, 5, 3}, 9);
  write_pnm(dir / "c.ppm", rgb);
  const Tensor back = read_pnm(dir / "c.ppm");
  CHECK(back.shape() == rgb.shape());
  for (std::size_t i = 0; i < rgb.size(); ++i) CHECK(std::abs(back[i] - rgb[i]) <= 0.5 / 255 + 1e-12);

  CHECK_THROWS_AS(write_pnm(dir / "x.pnm", Tensor(Shape{1, 1, 2})), InvalidArgument);

  std::ofstream(dir / "bad.pgm", std::ios::binary) << "P2\n1 1\n255\n0";
  CHECK_THROWS_AS(read_pnm(dir / "bad.pgm"), ParseError);
  std::ofstream(dir / "trunc.pgm", std::ios::binary) << "P5\n4 4\n255\nabc";
  try {
    read_pnm(dir / "trunc.pgm");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() > 0);
  }
  std::ofstream(dir / "maxval.pgm", std::ios::binary) << "P5\n1 1\n65535\n\0\0";
  CHECK_THROWS_AS(read_pnm(dir / "maxval.pgm"), ParseError);
  std::filesystem::remove_all(dir);
}
