#pragma once

// Placeholder chart images for report frames that have no client PNG.

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "insightpilot/error.hpp"

namespace insightpilot {

struct Rgb {
  std::uint8_t r, g, b;
};

class Canvas {
 public:
  Canvas(int w, int h, Rgb bg = {255, 255, 255}) : w_(w), h_(h), px_(static_cast<std::size_t>(w * h), bg) {}

  int width() const { return w_; }
  int height() const { return h_; }

  void set(int x, int y, Rgb c) {
    if (x >= 0 && y >= 0 && x < w_ && y < h_) px_[static_cast<std::size_t>(y * w_ + x)] = c;
  }

  void fill_rect(int x0, int y0, int x1, int y1, Rgb c) {
    if (x0 > x1) std::swap(x0, x1);
    if (y0 > y1) std::swap(y0, y1);
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) set(x, y, c);
  }

  /// Bresenham line with a square pen.
  void line(int x0, int y0, int x1, int y1, Rgb c, int pen = 1) {
    int dx = std::abs(x1 - x0), sx = x0 < x1 ? 1 : -1;
    int dy = -std::abs(y1 - y0), sy = y0 < y1 ? 1 : -1;
    int err = dx + dy;
    for (;;) {
      fill_rect(x0 - pen / 2, y0 - pen / 2, x0 + (pen - 1) / 2, y0 + (pen - 1) / 2, c);
      if (x0 == x1 && y0 == y1) break;
      int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x0 += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y0 += sy;
      }
    }
  }

  std::string encode_png() const {
    std::string out;
    png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
    if (!png) fail(ErrorCode::IoError, "png_create_write_struct failed");
    png_infop info = png_create_info_struct(png);
    if (!info || setjmp(png_jmpbuf(png))) {
      png_destroy_write_struct(&png, info ? &info : nullptr);
      fail(ErrorCode::IoError, "PNG encoding failed");
    }
    png_set_write_fn(
        png, &out,
        [](png_structp p, png_bytep data, png_size_t len) {
          static_cast<std::string*>(png_get_io_ptr(p))->append(reinterpret_cast<const char*>(data), len);
        },
        nullptr);
    png_set_IHDR(png, info, static_cast<png_uint_32>(w_), static_cast<png_uint_32>(h_), 8, PNG_COLOR_TYPE_RGB,
                 PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w_) * 3);
    for (int y = 0; y < h_; ++y) {
      for (int x = 0; x < w_; ++x) {
        const Rgb& c = px_[static_cast<std::size_t>(y * w_ + x)];
        row[static_cast<std::size_t>(x) * 3] = c.r;
        row[static_cast<std::size_t>(x) * 3 + 1] = c.g;
        row[static_cast<std::size_t>(x) * 3 + 2] = c.b;
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
    return out;
  }

 private:
  int w_, h_;
  std::vector<Rgb> px_;
};

/// 800x450 chart of a snapshot {"series": {...}, "chart": "bar"|"line"}.
/// Bars by default; lines when the snapshot says so. Highlighted keys
/// ("highlight": [...]) are drawn in orange.
inline std::string render_placeholder_png(const nlohmann::json& snapshot, int width = 800, int height = 450) {
  Canvas c(width, height);
  const Rgb axis{90, 90, 90}, ink{31, 119, 180}, accent{255, 127, 14}, frame{220, 220, 220};
  const int left = 60, right = width - 30, top = 30, bottom = height - 50;
  c.fill_rect(0, 0, width - 1, 0, frame);
  c.fill_rect(0, height - 1, width - 1, height - 1, frame);
  c.fill_rect(0, 0, 0, height - 1, frame);
  c.fill_rect(width - 1, 0, width - 1, height - 1, frame);
  c.line(left, bottom, right, bottom, axis, 2);
  c.line(left, top, left, bottom, axis, 2);

  std::vector<double> values;
  std::vector<std::string> keys;
  const nlohmann::json& series = snapshot.contains("series") ? snapshot["series"] : snapshot;
  if (series.is_object() && series.contains("values") && series["values"].is_array())
    for (const auto& v : series["values"])
      if (v.is_number()) values.push_back(v.get<double>());
  if (series.is_object() && series.contains("keys") && series["keys"].is_array())
    for (const auto& k : series["keys"]) keys.push_back(k.is_string() ? k.get<std::string>() : k.dump());
  std::vector<std::string> highlight;
  if (snapshot.contains("highlight") && snapshot["highlight"].is_array())
    for (const auto& h : snapshot["highlight"])
      if (h.is_string()) highlight.push_back(h.get<std::string>());
  if (values.empty()) return c.encode_png();

  const double lo = std::min(0.0, *std::min_element(values.begin(), values.end()));
  const double hi = std::max(0.0, *std::max_element(values.begin(), values.end()));
  const double span = hi > lo ? hi - lo : 1.0;
  auto ypos = [&](double v) { return bottom - static_cast<int>(std::lround((v - lo) / span * (bottom - top))); };
  const int n = static_cast<int>(values.size());
  const double slot = static_cast<double>(right - left) / n;
  auto marked = [&](int i) {
    return i < static_cast<int>(keys.size()) &&
           std::find(highlight.begin(), highlight.end(), keys[static_cast<std::size_t>(i)]) != highlight.end();
  };
  const bool asLine = snapshot.value("chart", "bar") == "line";
  if (asLine) {
    for (int i = 0; i + 1 < n; ++i) {
      const int x0 = left + static_cast<int>(slot * (i + 0.5)), x1 = left + static_cast<int>(slot * (i + 1.5));
      c.line(x0, ypos(values[static_cast<std::size_t>(i)]), x1, ypos(values[static_cast<std::size_t>(i + 1)]), ink, 3);
    }
    for (int i = 0; i < n; ++i) {
      const int x = left + static_cast<int>(slot * (i + 0.5)), y = ypos(values[static_cast<std::size_t>(i)]);
      c.fill_rect(x - 4, y - 4, x + 4, y + 4, marked(i) ? accent : ink);
    }
  } else {
    const int zero = ypos(0.0);
    for (int i = 0; i < n; ++i) {
      const int x0 = left + static_cast<int>(slot * i + slot * 0.15);
      const int x1 = left + static_cast<int>(slot * (i + 1) - slot * 0.15);
      c.fill_rect(x0, zero, std::max(x0, x1), ypos(values[static_cast<std::size_t>(i)]), marked(i) ? accent : ink);
    }
  }
  return c.encode_png();
}

}  // namespace insightpilot
