// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace primevo {

// ---------------------------------------------------------------------------
// Error types. Everything user-facing derives from EngineError so the CLI and
// the fitness totalizer can catch one base.
// ---------------------------------------------------------------------------

class EngineError : public std::runtime_error {
  public:
    explicit EngineError(const std::string& msg) : std::runtime_error(msg) {}
};

class ShapeMismatch : public EngineError {
  public:
    explicit ShapeMismatch(const std::string& msg) : EngineError(msg) {}
};

class NumericOverflow : public EngineError {
  public:
    explicit NumericOverflow(const std::string& msg) : EngineError(msg) {}
};

class ContractViolation : public EngineError {
  public:
    explicit ContractViolation(const std::string& msg) : EngineError(msg) {}
};

class ParseError : public EngineError {
  public:
    ParseError(int line, const std::string& msg)
        : EngineError("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

  private:
    int line_;
};

class CompileError : public EngineError {
  public:
    explicit CompileError(const std::string& msg) : EngineError(msg) {}
};

class InvalidDimension : public EngineError {
  public:
    explicit InvalidDimension(const std::string& msg) : EngineError(msg) {}
};

class ResizeFailure : public EngineError {
  public:
    ResizeFailure(const std::string& msg, std::int64_t below, std::int64_t above)
        : EngineError(msg), count_below(below), count_above(above) {}
    std::int64_t count_below;  // best achievable count under min_params
    std::int64_t count_above;  // first count over max_params
};

class MutationStall : public EngineError {
  public:
    explicit MutationStall(const std::string& msg) : EngineError(msg) {}
};

class ModificationNotApplicable : public EngineError {
  public:
    explicit ModificationNotApplicable(const std::string& msg) : EngineError(msg) {}
};

class InvalidSchedule : public EngineError {
  public:
    explicit InvalidSchedule(const std::string& msg) : EngineError(msg) {}
};

class InvalidData : public EngineError {
  public:
    explicit InvalidData(const std::string& msg) : EngineError(msg) {}
};

class NotReached : public EngineError {
  public:
    NotReached(const std::string& msg, double best)
        : EngineError(msg), best_loss(best) {}
    double best_loss;
};

class AssumptionViolated : public EngineError {
  public:
    explicit AssumptionViolated(const std::string& msg) : EngineError(msg) {}
};

// ---------------------------------------------------------------------------
// Deterministic RNG helpers. mt19937_64 is fully specified by the standard,
// and we roll our own normal sampler so streams do not depend on libstdc++
// distribution internals.
// ---------------------------------------------------------------------------

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stable sub-stream derivation: seed_for(master, a, b, ...) mixes the parts.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    return splitmix64(a ^ splitmix64(b));
}
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c) {
    return mix_seed(mix_seed(a, b), c);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}

    std::uint64_t bits() { return gen_(); }

    // Uniform in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection-free modulo bias is negligible for our n; keep it simple
        // and stable across platforms.
        return gen_() % n;
    }

    int irange(int lo, int hi_inclusive) {
        return lo + static_cast<int>(index(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
    }

    double uniform() {
        return (gen_() >> 11) * 0x1.0p-53;
    }

    double normal() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        do {
            u1 = uniform();
        } while (u1 <= 0.0);
        double u2 = uniform();
        double r = std::sqrt(-2.0 * std::log(u1));
        double theta = 6.283185307179586476925286766559 * u2;
        spare_ = r * std::sin(theta);
        have_spare_ = true;
        return r * std::cos(theta);
    }

    // Standard truncated normal: resample until |z| <= 2.
    double truncated_normal() {
        double z = normal();
        while (z < -2.0 || z > 2.0) z = normal();
        return z;
    }

    std::mt19937_64& engine() { return gen_; }

  private:
    std::mt19937_64 gen_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace primevo
