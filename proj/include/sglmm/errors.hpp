#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace sglmm {

struct DimensionMismatch : std::runtime_error {
    explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

struct DegenerateTriangle : std::runtime_error {
    explicit DegenerateTriangle(const std::string& what) : std::runtime_error(what) {}
};

struct LocationOutsideMesh : std::runtime_error {
    int row;
    explicit LocationOutsideMesh(int row_index, const std::string& what)
        : std::runtime_error(what), row(row_index) {}
};

struct OddAlphaUnsupported : std::runtime_error {
    explicit OddAlphaUnsupported(const std::string& what) : std::runtime_error(what) {}
};

struct NonPositiveKappa : std::runtime_error {
    explicit NonPositiveKappa(const std::string& what) : std::runtime_error(what) {}
};

struct ZeroDiagonal : std::runtime_error {
    explicit ZeroDiagonal(const std::string& what) : std::runtime_error(what) {}
};

struct NotPositiveDefiniteError : std::runtime_error {
    explicit NotPositiveDefiniteError(const std::string& what) : std::runtime_error(what) {}
};

struct InvalidParams : std::runtime_error {
    explicit InvalidParams(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteTarget : std::runtime_error {
    explicit NonFiniteTarget(const std::string& what) : std::runtime_error(what) {}
};

struct NonFiniteDensity : std::runtime_error {
    explicit NonFiniteDensity(const std::string& what) : std::runtime_error(what) {}
};

struct TraceTooShort : std::runtime_error {
    explicit TraceTooShort(const std::string& what) : std::runtime_error(what) {}
};

struct TooFewGroups : std::runtime_error {
    explicit TooFewGroups(const std::string& what) : std::runtime_error(what) {}
};

struct ConvergenceFailure : std::runtime_error {
    explicit ConvergenceFailure(const std::string& what) : std::runtime_error(what) {}
};

struct MissingColumn : std::runtime_error {
    explicit MissingColumn(const std::string& what) : std::runtime_error(what) {}
};

struct NonNumeric : std::runtime_error {
    explicit NonNumeric(const std::string& what) : std::runtime_error(what) {}
};

struct NegativeCount : std::runtime_error {
    explicit NegativeCount(const std::string& what) : std::runtime_error(what) {}
};

struct NonBinary : std::runtime_error {
    explicit NonBinary(const std::string& what) : std::runtime_error(what) {}
};

// Aggregated validation failure (config parsing, dataset loading).
struct ValidationError : std::runtime_error {
    std::vector<std::string> messages;
    explicit ValidationError(std::vector<std::string> msgs)
        : std::runtime_error(join(msgs)), messages(std::move(msgs)) {}

  private:
    static std::string join(const std::vector<std::string>& msgs) {
        std::string out;
        for (const auto& m : msgs) {
            if (!out.empty()) out += "\n";
            out += m;
        }
        return out;
    }
};

}  // namespace sglmm
