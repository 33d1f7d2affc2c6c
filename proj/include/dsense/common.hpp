#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace dsense {

// Error taxonomy shared by the library and the CLI exit codes.
enum class ErrorKind {
  config,     // bad configuration or parameters (exit 2)
  data,       // schema / validation / degenerate data (exit 3)
  numeric,    // solver or numerical failure (exit 4)
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void throw_config(const std::string& msg) { throw Error(ErrorKind::config, msg); }
[[noreturn]] inline void throw_data(const std::string& msg) { throw Error(ErrorKind::data, msg); }
[[noreturn]] inline void throw_numeric(const std::string& msg) { throw Error(ErrorKind::numeric, msg); }

// Collects warnings emitted by operations so the CLI can surface them in the
// report diagnostics array. Passing nullptr silently drops messages.
class Diagnostics {
 public:
  void warn(std::string msg) { warnings_.push_back(std::move(msg)); }
  const std::vector<std::string>& warnings() const { return warnings_; }
  void merge(const Diagnostics& other) {
    warnings_.insert(warnings_.end(), other.warnings_.begin(), other.warnings_.end());
  }

 private:
  std::vector<std::string> warnings_;
};

inline void warn_into(Diagnostics* diag, std::string msg) {
  if (diag != nullptr) diag->warn(std::move(msg));
}

// All randomness flows from one top-level seed through this derivation:
// independent streams are keyed by a purpose label and an index, so replicate
// results do not depend on scheduling or worker count.
std::uint64_t derive_seed(std::uint64_t seed, std::string_view purpose, std::uint64_t index);

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t seed, std::string_view purpose, std::uint64_t index) {
  return Rng(derive_seed(seed, purpose, index));
}

// Standard normal distribution helpers.
double normal_cdf(double x);
double normal_quantile(double p);

// Empirical quantile with linear interpolation between order statistics
// (R type 7). `sorted` must be ascending and nonempty.
double quantile_sorted(const std::vector<double>& sorted, double p);
double quantile(std::vector<double> values, double p);

// Runs fn(i) for i in [0, n) on up to `workers` threads. Tasks must be
// independent; results keyed by index stay deterministic for any worker count.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& fn);

int default_workers();

}  // namespace dsense
