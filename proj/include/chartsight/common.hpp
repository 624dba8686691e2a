#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace chartsight {

class Error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

/// Input file lacks a required column or is structurally unreadable.
class SchemaError : public Error {
  public:
    using Error::Error;
};

/// Invalid run configuration or argument outside its declared domain.
class ConfigError : public Error {
  public:
    using Error::Error;
};

/// A downstream stage was started before its upstream artifact exists.
class MissingArtifactError : public Error {
  public:
    explicit MissingArtifactError(std::string dependency)
        : Error("missing upstream artifact: " + dependency), dependency_(std::move(dependency)) {}
    const std::string &dependency() const noexcept { return dependency_; }

  private:
    std::string dependency_;
};

class DimensionError : public Error {
  public:
    DimensionError(std::size_t expected, std::size_t actual);
};

/// Seeded random source with platform-independent output.
///
/// std::mt19937_64 is fully specified by the standard; the distributions in
/// <random> are not, so the bounded-integer, uniform and normal draws are
/// implemented here on top of the raw engine.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    /// Independent stream for worker `index` derived from a master seed.
    static Rng stream(std::uint64_t master_seed, std::uint64_t index);

    std::uint64_t next() { return engine_(); }
    /// Uniform integer in [0, bound). bound must be positive.
    std::uint64_t below(std::uint64_t bound);
    /// Uniform double in [0, 1) with 53 random bits.
    double uniform();
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    double normal();
    double normal(double mean, double sd) { return mean + sd * normal(); }
    bool bernoulli(double p) { return uniform() < p; }

    template <typename T> void shuffle(std::span<T> values) {
        for (std::size_t i = values.size(); i > 1; --i) {
            std::swap(values[i - 1], values[below(i)]);
        }
    }

    /// k distinct indices drawn uniformly from [0, n), in draw order.
    std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k);

  private:
    std::mt19937_64 engine_;
    double spare_normal_ = 0.0;
    bool has_spare_ = false;
};

std::uint64_t splitmix64(std::uint64_t x);

/// Runs body(i) for i in [0, count) on up to `threads` workers (0 = hardware
/// concurrency). Work items must write to disjoint outputs.
void parallel_for(std::size_t count, unsigned threads, const std::function<void(std::size_t)> &body);

/// Shortest decimal text that parses back to the same double.
std::string format_double(double value);
/// Strict full-string parse; returns false on any trailing garbage.
bool parse_double(std::string_view text, double &out);
bool parse_int(std::string_view text, long long &out);

std::string trim(std::string_view text);
std::string to_lower_ascii(std::string_view text);

} // namespace chartsight
