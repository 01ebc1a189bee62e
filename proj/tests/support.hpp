#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "insightpilot/spec.hpp"
#include "insightpilot/tabular.hpp"

namespace testsupport {

namespace fs = std::filesystem;

inline fs::path fixtures() { return fs::path(IP_FIXTURES_DIR); }

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline insightpilot::SystemSpec superstore_spec() {
  return insightpilot::parse_spec(slurp(fixtures() / "specs" / "superstore.vaspec.json"));
}

inline const insightpilot::Table& superstore_table() {
  static const insightpilot::Table t = insightpilot::load_csv(fixtures() / "data" / "superstore.csv");
  return t;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "ip") {
    static std::atomic<unsigned> n{0};
    path_ = fs::temp_directory_path() /
            (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(n++));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const fs::path& path() const { return path_; }

 private:
  fs::path path_;
};

/// Hand-rolled generators for property tests.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::mt19937_64& rng() { return rng_; }

  int integer(int lo, int hi) { return std::uniform_int_distribution<int>(lo, hi)(rng_); }
  double uniform(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }
  double normal(double mu = 0.0, double sigma = 1.0) { return std::normal_distribution<double>(mu, sigma)(rng_); }
  bool coin(double p = 0.5) { return uniform(0.0, 1.0) < p; }

  /// A mix of shapes: iid noise, walks, ramps, plateaus with ties, spikes.
  std::vector<double> series(std::size_t n) {
    std::vector<double> v(n);
    switch (integer(0, 4)) {
      case 0:
        for (auto& x : v) x = normal(50, 10);
        break;
      case 1: {
        double level = normal(0, 5);
        for (auto& x : v) x = level += normal();
        break;
      }
      case 2: {
        const double slope = uniform(-3, 3);
        for (std::size_t i = 0; i < n; ++i) v[i] = slope * static_cast<double>(i) + normal(0, 2);
        break;
      }
      case 3:
        for (auto& x : v) x = static_cast<double>(integer(1, 6));
        break;
      default: {
        for (auto& x : v) x = normal(10, 1);
        v[static_cast<std::size_t>(integer(0, static_cast<int>(n) - 1))] += uniform(10, 40);
      }
    }
    return v;
  }

  /// Distinct values, so argmax/argmin are unique.
  std::vector<double> distinct_series(std::size_t n) {
    std::vector<double> v(n);
    for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(i) * 7.0 + uniform(0.0, 6.9);
    std::shuffle(v.begin(), v.end(), rng_);
    return v;
  }

  std::string bytes(std::size_t maxLen) {
    static const std::string alphabet = "{}[]\",:0123456789.-eE abcxyz\n\t\\/";
    std::string s(static_cast<std::size_t>(integer(0, static_cast<int>(maxLen))), '\0');
    for (auto& c : s) c = coin(0.7) ? alphabet[static_cast<std::size_t>(integer(0, static_cast<int>(alphabet.size()) - 1))]
                                    : static_cast<char>(integer(0, 255));
    return s;
  }

 private:
  std::mt19937_64 rng_;
};

}  // namespace testsupport
