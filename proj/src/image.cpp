#include "csr/image.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

namespace csr {

namespace {

std::string offset_msg(const std::string& path, const char* what,
                       std::size_t offset) {
  return path + ": " + what + " at byte " + std::to_string(offset);
}

// Whitespace/comment-tolerant header scanner that tracks the byte offset.
struct HeaderScanner {
  const std::string& path;
  std::istream& in;
  std::size_t offset = 0;

  int get() {
    const int c = in.get();
    if (c != EOF) ++offset;
    return c;
  }

  void skip_space() {
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        while (c != EOF && c != '\n') c = get();
        continue;
      }
      if (c == EOF || !std::isspace(c)) return;
      get();
    }
  }

  long parse_int(const char* field) {
    skip_space();
    const std::size_t start = offset;
    long value = 0;
    bool any = false;
    for (;;) {
      const int c = in.peek();
      if (c < '0' || c > '9') break;
      get();
      any = true;
      value = value * 10 + (c - '0');
      if (value > 1'000'000'000L)
        throw FormatError(offset_msg(path, field, start) + ": value too large");
    }
    if (!any)
      throw FormatError(offset_msg(path, field, start) +
                        ": expected an integer");
    return value;
  }
};

}  // namespace

GrayImage::GrayImage(int h, int w) : height(h), width(w) {
  if (h < 1 || w < 1) throw ConfigError("GrayImage: dimensions must be >= 1");
  pixels.assign(static_cast<std::size_t>(h) * w, 0.0);
}

GrayImage load_image(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError(path + ": cannot open file");
  HeaderScanner scan{path, in};

  const int m0 = scan.get(), m1 = scan.get();
  if (m0 != 'P' || (m1 != '5' && m1 != '6'))
    throw FormatError(offset_msg(path, "unsupported magic (want P5 or P6)", 0));
  const bool color = (m1 == '6');

  const long w = scan.parse_int("width");
  const long h = scan.parse_int("height");
  const std::size_t maxval_at = scan.offset;
  const long maxval = scan.parse_int("maxval");
  if (w < 1 || h < 1)
    throw FormatError(offset_msg(path, "dimensions must be positive", 2));
  if (maxval != 255)
    throw FormatError(offset_msg(path, "unsupported maxval (want 255)",
                                 maxval_at));
  const int sep = scan.get();
  if (sep == EOF || !std::isspace(sep))
    throw FormatError(offset_msg(path, "missing whitespace after maxval",
                                 scan.offset));

  const std::size_t count = static_cast<std::size_t>(w) * h;
  const std::size_t bytes = count * (color ? 3 : 1);
  std::vector<unsigned char> raw(bytes);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(bytes));
  const std::size_t got = static_cast<std::size_t>(in.gcount());
  if (got != bytes)
    throw FormatError(offset_msg(path, "truncated pixel data",
                                 scan.offset + got));

  GrayImage img(static_cast<int>(h), static_cast<int>(w));
  if (color) {
    for (std::size_t i = 0; i < count; ++i) {
      const double r = raw[3 * i], g = raw[3 * i + 1], b = raw[3 * i + 2];
      img.pixels[i] = (0.299 * r + 0.587 * g + 0.114 * b) / 255.0;
    }
  } else {
    for (std::size_t i = 0; i < count; ++i) img.pixels[i] = raw[i] / 255.0;
  }
  return img;
}

std::vector<unsigned char> quantize8(const GrayImage& image) {
  std::vector<unsigned char> out(image.pixels.size());
  for (std::size_t i = 0; i < out.size(); ++i) {
    const double v = std::lround(image.pixels[i] * 255.0);
    out[i] = static_cast<unsigned char>(v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v));
  }
  return out;
}

void save_image(const GrayImage& image, const std::string& path) {
  if (image.height < 1 || image.width < 1)
    throw ConfigError("save_image: empty image");
  std::ofstream out(path, std::ios::binary);
  if (!out) throw FormatError(path + ": cannot open file for writing");
  out << "P5\n" << image.width << " " << image.height << "\n255\n";
  const std::vector<unsigned char> bytes = quantize8(image);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw FormatError(path + ": short write");
}

PatchGrid extract_patches(const GrayImage& image, int size, int stride) {
  if (size < 1 || stride < 1)
    throw ConfigError("extract_patches: size and stride must be >= 1");
  if (image.height < size || image.width < size)
    throw UsageError("extract_patches: image smaller than patch size");
  PatchGrid grid;
  grid.patch_size = size;
  grid.rows = (image.height - size) / stride + 1;
  grid.cols = (image.width - size) / stride + 1;
  grid.patches.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      FeatureMap patch(size, size, 1);
      const int oy = r * stride, ox = c * stride;
      for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x)
          patch.data[static_cast<std::size_t>(y) * size + x] =
              image.at(oy + y, ox + x);
      grid.patches.push_back(std::move(patch));
    }
  }
  return grid;
}

GrayImage assemble_nonoverlapping(const PatchGrid& grid) {
  const int n = grid.patch_size;
  if (grid.rows < 1 || grid.cols < 1 || n < 1)
    throw UsageError("assemble_nonoverlapping: empty grid");
  if (grid.patches.size() != static_cast<std::size_t>(grid.rows) * grid.cols)
    throw UsageError("assemble_nonoverlapping: patch count mismatch");
  GrayImage img(grid.rows * n, grid.cols * n);
  for (int r = 0; r < grid.rows; ++r) {
    for (int c = 0; c < grid.cols; ++c) {
      const FeatureMap& patch =
          grid.patches[static_cast<std::size_t>(r) * grid.cols + c];
      if (patch.height != n || patch.width != n || patch.channels != 1)
        throw UsageError("assemble_nonoverlapping: inconsistent patch shape");
      for (int y = 0; y < n; ++y)
        for (int x = 0; x < n; ++x)
          img.at(r * n + y, c * n + x) =
              patch.data[static_cast<std::size_t>(y) * n + x];
    }
  }
  return img;
}

namespace {

// Symmetric reflection with edge repeat: ... 2 1 0 | 0 1 2 ... dim-1 | dim-1
// ... folds with period 2*dim, so pads larger than the image stay in range.
int fold_index(int x, int dim) {
  const int period = 2 * dim;
  x %= period;
  if (x < 0) x += period;
  return x < dim ? x : period - 1 - x;
}

}  // namespace

PaddedImage pad_to_multiple(const GrayImage& image, int n) {
  if (n < 1) throw ConfigError("pad_to_multiple: n must be >= 1");
  PaddedImage out;
  out.orig_height = image.height;
  out.orig_width = image.width;
  const int ph = (image.height + n - 1) / n * n;
  const int pw = (image.width + n - 1) / n * n;
  if (ph == image.height && pw == image.width) {
    out.image = image;
    return out;
  }
  out.image = GrayImage(ph, pw);
  for (int y = 0; y < ph; ++y) {
    const int sy = fold_index(y, image.height);
    for (int x = 0; x < pw; ++x)
      out.image.at(y, x) = image.at(sy, fold_index(x, image.width));
  }
  return out;
}

GrayImage crop(const GrayImage& image, int height, int width) {
  if (height < 1 || width < 1 || height > image.height || width > image.width)
    throw ConfigError("crop: target size out of range");
  if (height == image.height && width == image.width) return image;
  GrayImage out(height, width);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) out.at(y, x) = image.at(y, x);
  return out;
}

double psnr(const GrayImage& a, const GrayImage& b) {
  if (a.height != b.height || a.width != b.width)
    throw UsageError("psnr: image shapes differ");
  const std::vector<unsigned char> qa = quantize8(a), qb = quantize8(b);
  double acc = 0.0;
  for (std::size_t i = 0; i < qa.size(); ++i) {
    const double d = static_cast<double>(qa[i]) - static_cast<double>(qb[i]);
    acc += d * d;
  }
  if (acc == 0.0) return std::numeric_limits<double>::infinity();
  const double mse = acc / static_cast<double>(qa.size());
  return 10.0 * std::log10(255.0 * 255.0 / mse);
}

FeatureMap to_feature_map(const GrayImage& image) {
  FeatureMap map(image.height, image.width, 1);
  map.data = image.pixels;
  return map;
}

GrayImage to_image(const FeatureMap& map) {
  if (map.channels != 1)
    throw ConfigError("to_image: feature map must be single-channel");
  GrayImage img(map.height, map.width);
  img.pixels = map.data;
  return img;
}

GrayImage clamp_image(GrayImage image) {
  for (double& v : image.pixels) v = clamp01(v);
  return image;
}

}  // namespace csr
