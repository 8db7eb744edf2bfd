// Copyright 2026 the dksan authors
// SPDX-License-Identifier: Apache-2.0

#include "dksan/ppm.hpp"

#include <cmath>
#include <fstream>

namespace dksan {

namespace {

[[noreturn]] void fail(const std::string& origin, size_t at, const std::string& what) {
  throw io_error(origin + ": PPM parse error at byte " + std::to_string(at) + ": " + what);
}

bool is_space(char c) {
  return c == ' ' || c == '\t' || c == '\r' || c == '\n' || c == '\v' || c == '\f';
}

// whitespace and '#' comments between header tokens
void skip_separators(const std::string& b, size_t& at, const std::string& origin) {
  bool advanced = false;
  while (at < b.size()) {
    if (is_space(b[at])) {
      ++at;
      advanced = true;
    } else if (b[at] == '#') {
      while (at < b.size() && b[at] != '\n') ++at;
    } else {
      break;
    }
  }
  if (!advanced && at < b.size()) fail(origin, at, "expected whitespace");
}

long parse_int(const std::string& b, size_t& at, const std::string& origin,
               const char* field) {
  if (at >= b.size()) fail(origin, at, std::string("unexpected end of file reading ") + field);
  if (b[at] < '0' || b[at] > '9')
    fail(origin, at, std::string("expected digit for ") + field);
  long v = 0;
  while (at < b.size() && b[at] >= '0' && b[at] <= '9') {
    v = v * 10 + (b[at] - '0');
    if (v > 1000000000L) fail(origin, at, std::string(field) + " out of range");
    ++at;
  }
  return v;
}

}  // namespace

Tensor<float> parse_ppm(const std::string& b, const std::string& origin) {
  size_t at = 0;
  if (b.size() < 2 || b[0] != 'P' || b[1] != '6')
    fail(origin, 0, "magic is not P6");
  at = 2;
  skip_separators(b, at, origin);
  const long w = parse_int(b, at, origin, "width");
  skip_separators(b, at, origin);
  const long h = parse_int(b, at, origin, "height");
  skip_separators(b, at, origin);
  const long maxval = parse_int(b, at, origin, "maxval");
  if (w < 1 || h < 1) fail(origin, at, "non-positive dimensions");
  if (maxval != 255) fail(origin, at, "maxval must be 255");
  if (at >= b.size()) fail(origin, at, "missing payload");
  if (!is_space(b[at])) fail(origin, at, "expected single whitespace after maxval");
  ++at;  // exactly one whitespace byte before the payload

  const size_t need = static_cast<size_t>(w) * static_cast<size_t>(h) * 3;
  if (b.size() - at < need)
    fail(origin, b.size(),
         "truncated payload: need " + std::to_string(need) + " bytes, have " +
             std::to_string(b.size() - at));

  Tensor<float> img(Shape{1, 3, static_cast<int>(h), static_cast<int>(w)});
  const unsigned char* p = reinterpret_cast<const unsigned char*>(b.data() + at);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(0, c, y, x) =
            static_cast<float>(p[(static_cast<size_t>(y) * w + x) * 3 + c]) / 255.0f;
  return img;
}

Tensor<float> load_ppm(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw io_error(path + ": cannot open");
  std::string bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return parse_ppm(bytes, path);
}

void save_ppm(const std::string& path, const Tensor<float>& image) {
  if (image.n() != 1 || image.c() != 3)
    throw contract_error("save_ppm: image must be (1,3,h,w), got " + image.shape().str());
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw io_error(path + ": cannot open for writing");
  f << "P6\n" << image.w() << " " << image.h() << "\n255\n";
  std::string payload(static_cast<size_t>(image.h()) * image.w() * 3, '\0');
  for (int y = 0; y < image.h(); ++y)
    for (int x = 0; x < image.w(); ++x)
      for (int c = 0; c < 3; ++c) {
        // round half away from zero, clamp to [0,255]
        const double v = std::floor(static_cast<double>(image.at(0, c, y, x)) * 255.0 + 0.5);
        const double q = v < 0.0 ? 0.0 : (v > 255.0 ? 255.0 : v);
        payload[(static_cast<size_t>(y) * image.w() + x) * 3 + c] =
            static_cast<char>(static_cast<unsigned char>(q));
      }
  f.write(payload.data(), static_cast<std::streamsize>(payload.size()));
  if (!f) throw io_error(path + ": write failed");
}

}  // namespace dksan
