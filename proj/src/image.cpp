#include "facerec/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numeric>
#include <string>

#include <fmt/format.h>
#include "path_format.hpp"

#include "facerec/error.hpp"

namespace facerec {

const char* to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingFile: return "missing file";
    case ErrorCode::kBadMagic: return "bad magic number";
    case ErrorCode::kTruncatedPayload: return "truncated payload";
    case ErrorCode::kZeroDimension: return "zero dimension";
    case ErrorCode::kBadHeader: return "bad header";
    case ErrorCode::kUnwritablePath: return "unwritable path";
    case ErrorCode::kInvalidArgument: return "invalid argument";
    case ErrorCode::kDimensionMismatch: return "dimension mismatch";
    case ErrorCode::kOutOfBounds: return "out of bounds";
    case ErrorCode::kSyntax: return "syntax error";
    case ErrorCode::kValidation: return "validation error";
    case ErrorCode::kNonFinite: return "non-finite input";
    case ErrorCode::kEmptyGallery: return "empty gallery";
    case ErrorCode::kDataset: return "dataset error";
  }
  return "unknown error";
}

GrayImage::GrayImage(int width, int height, double fill)
    : width_(width), height_(height) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kZeroDimension,
                fmt::format("image dimensions must be >= 1, got {}x{}", width, height));
  }
  pixels_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), fill);
}

GrayImage::GrayImage(int width, int height, std::vector<double> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width < 1 || height < 1) {
    throw Error(ErrorCode::kZeroDimension,
                fmt::format("image dimensions must be >= 1, got {}x{}", width, height));
  }
  if (pixels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw Error(ErrorCode::kDimensionMismatch,
                fmt::format("{} pixels supplied for a {}x{} image", pixels_.size(), width, height));
  }
}

double GrayImage::clamped(int x, int y) const {
  x = std::clamp(x, 0, width_ - 1);
  y = std::clamp(y, 0, height_ - 1);
  return pixels_[index(x, y)];
}

double GrayImage::min_value() const { return *std::min_element(pixels_.begin(), pixels_.end()); }
double GrayImage::max_value() const { return *std::max_element(pixels_.begin(), pixels_.end()); }
double GrayImage::mean() const {
  return std::accumulate(pixels_.begin(), pixels_.end(), 0.0) / static_cast<double>(pixels_.size());
}

Kernel2D::Kernel2D(int width, int height, std::vector<double> weights)
    : width_(width), height_(height), weights_(std::move(weights)) {
  if (width < 1 || height < 1 || width % 2 == 0 || height % 2 == 0) {
    throw Error(ErrorCode::kInvalidArgument,
                fmt::format("kernel dimensions must be odd, got {}x{}", width, height));
  }
  if (weights_.size() != static_cast<std::size_t>(width * height)) {
    throw Error(ErrorCode::kDimensionMismatch, "kernel weight count does not match its size");
  }
}

double Kernel2D::sum() const { return std::accumulate(weights_.begin(), weights_.end(), 0.0); }

IntegralImage::IntegralImage(const GrayImage& img)
    : width_(img.width()), height_(img.height()),
      table_(static_cast<std::size_t>(img.width() + 1) * static_cast<std::size_t>(img.height() + 1), 0.0) {
  const std::size_t stride = static_cast<std::size_t>(width_ + 1);
  for (int y = 0; y < height_; ++y) {
    double row = 0.0;
    for (int x = 0; x < width_; ++x) {
      row += img(x, y);
      table_[(y + 1) * stride + x + 1] = table_[y * stride + x + 1] + row;
    }
  }
}

namespace {

// Minimal PGM header tokenizer: whitespace separated, '#' comments to end of line.
class HeaderReader {
 public:
  explicit HeaderReader(std::istream& in) : in_(in) {}

  bool next_token(std::string& token) {
    token.clear();
    int c = in_.get();
    while (c != EOF) {
      if (c == '#') {
        while (c != EOF && c != '\n') c = in_.get();
      } else if (std::isspace(c)) {
        c = in_.get();
      } else {
        break;
      }
    }
    while (c != EOF && !std::isspace(c) && c != '#') {
      token.push_back(static_cast<char>(c));
      c = in_.get();
    }
    if (c == '#') in_.unget();
    return !token.empty();
  }

  long next_number(const char* what) {
    std::string token;
    if (!next_token(token)) {
      throw Error(ErrorCode::kBadHeader, fmt::format("PGM header ends before {}", what));
    }
    try {
      std::size_t used = 0;
      long value = std::stol(token, &used);
      if (used != token.size() || value < 0) throw std::invalid_argument(token);
      return value;
    } catch (const std::exception&) {
      throw Error(ErrorCode::kBadHeader, fmt::format("PGM {} is not a number: '{}'", what, token));
    }
  }

 private:
  std::istream& in_;
};

}  // namespace

GrayImage load_image(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw Error(ErrorCode::kMissingFile, fmt::format("cannot open {}", path));
  }
  HeaderReader header(in);
  std::string magic;
  header.next_token(magic);
  if (magic != "P2" && magic != "P5") {
    throw Error(ErrorCode::kBadMagic, fmt::format("{}: expected P2 or P5, got '{}'", path, magic));
  }
  const long width = header.next_number("width");
  const long height = header.next_number("height");
  const long maxval = header.next_number("maxval");
  if (width == 0 || height == 0) {
    throw Error(ErrorCode::kZeroDimension, fmt::format("{}: zero dimension {}x{}", path, width, height));
  }
  if (maxval < 1 || maxval > 65535) {
    throw Error(ErrorCode::kBadHeader, fmt::format("{}: maxval {} outside [1, 65535]", path, maxval));
  }

  const std::size_t count = static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  std::vector<double> pixels(count);
  const double scale = 1.0 / static_cast<double>(maxval);

  if (magic == "P5") {
    // The header tokenizer already consumed the single whitespace after maxval.
    const std::size_t bytes_per_sample = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> payload(count * bytes_per_sample);
    in.read(reinterpret_cast<char*>(payload.data()), static_cast<std::streamsize>(payload.size()));
    if (static_cast<std::size_t>(in.gcount()) != payload.size()) {
      throw Error(ErrorCode::kTruncatedPayload,
                  fmt::format("{}: expected {} payload bytes, read {}", path, payload.size(), in.gcount()));
    }
    for (std::size_t i = 0; i < count; ++i) {
      unsigned value = bytes_per_sample == 1
                           ? payload[i]
                           : (static_cast<unsigned>(payload[2 * i]) << 8) | payload[2 * i + 1];
      if (value > static_cast<unsigned>(maxval)) {
        throw Error(ErrorCode::kBadHeader, fmt::format("{}: sample {} exceeds maxval", path, value));
      }
      pixels[i] = value * scale;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) {
      std::string token;
      if (!header.next_token(token)) {
        throw Error(ErrorCode::kTruncatedPayload,
                    fmt::format("{}: expected {} samples, found {}", path, count, i));
      }
      long value = 0;
      try {
        value = std::stol(token);
      } catch (const std::exception&) {
        throw Error(ErrorCode::kBadHeader, fmt::format("{}: bad sample '{}'", path, token));
      }
      if (value < 0 || value > maxval) {
        throw Error(ErrorCode::kBadHeader, fmt::format("{}: sample {} outside [0, maxval]", path, value));
      }
      pixels[i] = static_cast<double>(value) * scale;
    }
  }
  return GrayImage(static_cast<int>(width), static_cast<int>(height), std::move(pixels));
}

void save_image(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw Error(ErrorCode::kUnwritablePath, fmt::format("cannot write {}", path));
  }
  out << "P5\n" << img.width() << ' ' << img.height() << "\n255\n";
  std::vector<unsigned char> bytes(img.size());
  auto pixels = img.pixels();
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    const double v = std::clamp(pixels[i], 0.0, 1.0);
    bytes[i] = static_cast<unsigned char>(std::floor(v * 255.0 + 0.5));
  }
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) {
    throw Error(ErrorCode::kUnwritablePath, fmt::format("write failed for {}", path));
  }
}

GrayImage resize_bilinear(const GrayImage& img, int new_width, int new_height) {
  if (new_width < 1 || new_height < 1) {
    throw Error(ErrorCode::kZeroDimension,
                fmt::format("resize target must be >= 1x1, got {}x{}", new_width, new_height));
  }
  GrayImage out(new_width, new_height);
  // Align corners: output pixel 0 maps to source 0, last maps to source last.
  const double sx = new_width > 1 ? static_cast<double>(img.width() - 1) / (new_width - 1) : 0.0;
  const double sy = new_height > 1 ? static_cast<double>(img.height() - 1) / (new_height - 1) : 0.0;
  for (int y = 0; y < new_height; ++y) {
    const double fy = y * sy;
    const int y0 = static_cast<int>(std::floor(fy));
    const double ty = fy - y0;
    for (int x = 0; x < new_width; ++x) {
      const double fx = x * sx;
      const int x0 = static_cast<int>(std::floor(fx));
      const double tx = fx - x0;
      const double top = img.clamped(x0, y0) + tx * (img.clamped(x0 + 1, y0) - img.clamped(x0, y0));
      const double bottom =
          img.clamped(x0, y0 + 1) + tx * (img.clamped(x0 + 1, y0 + 1) - img.clamped(x0, y0 + 1));
      out(x, y) = top + ty * (bottom - top);
    }
  }
  return out;
}

Kernel2D gaussian_kernel(double sigma, int radius) {
  if (!(sigma > 0.0) || !std::isfinite(sigma)) {
    throw Error(ErrorCode::kInvalidArgument, fmt::format("gaussian sigma must be > 0, got {}", sigma));
  }
  if (radius <= 0) radius = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  const int size = 2 * radius + 1;
  std::vector<double> weights(static_cast<std::size_t>(size * size));
  const double denom = 2.0 * sigma * sigma;
  double total = 0.0;
  for (int dy = -radius; dy <= radius; ++dy) {
    for (int dx = -radius; dx <= radius; ++dx) {
      const double w = std::exp(-(dx * dx + dy * dy) / denom);
      weights[static_cast<std::size_t>((dy + radius) * size + dx + radius)] = w;
      total += w;
    }
  }
  for (double& w : weights) w /= total;
  return Kernel2D(size, size, std::move(weights));
}

GrayImage convolve(const GrayImage& img, const Kernel2D& kernel) {
  GrayImage out(img.width(), img.height());
  const int rx = kernel.radius_x();
  const int ry = kernel.radius_y();
  for (int y = 0; y < img.height(); ++y) {
    for (int x = 0; x < img.width(); ++x) {
      double acc = 0.0;
      for (int dy = -ry; dy <= ry; ++dy) {
        for (int dx = -rx; dx <= rx; ++dx) {
          acc += kernel.at(dx, dy) * img.clamped(x + dx, y + dy);
        }
      }
      out(x, y) = acc;
    }
  }
  return out;
}

IntegralImage integral_image(const GrayImage& img) { return IntegralImage(img); }

}  // namespace facerec
