#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "e2efs/numkernel.hpp"

namespace e2efs {

using Labels = std::vector<int>;

/// Feature matrix plus contiguous class labels 0..class_count-1.
struct Dataset {
    Matrix X;
    Labels y;
    std::size_t class_count = 0;
    std::vector<std::string> feature_names;

    std::size_t samples() const noexcept { return X.rows(); }
    std::size_t features() const noexcept { return X.cols(); }

    /// Throws std::invalid_argument unless labels are in range, N >= 2 and
    /// every class occurs at least once.
    void validate() const;

    std::vector<std::size_t> class_counts() const;

    /// Rows `rows` (in the given order), all columns.
    Dataset select_rows(const std::vector<std::size_t>& rows) const;
    /// All rows, columns `cols` (in the given order).
    Dataset select_columns(const std::vector<std::size_t>& cols) const;
};

/// Parse failure; the message carries the offending path and line.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct CsvOptions {
    bool has_header = false;
    /// Column index, or a header name (requires has_header). Negative index counts from the end.
    std::variant<long, std::string> label_column = -1L;
};

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options = {});
Dataset load_libsvm(const std::filesystem::path& path);

/// Writes features then the label as the last column. Round-trips exactly through load_csv.
void write_csv(const Dataset& d, const std::filesystem::path& path, bool header = true,
               const std::string& comment = {});
void write_libsvm(const Dataset& d, const std::filesystem::path& path);

/// Feature-wise mean and sample standard deviation.
struct NormStats {
    Vector mean;
    Vector std;
};

NormStats compute_norm_stats(const Matrix& X);

/// erf((x - mean) / (2 std)) per feature; std below 1e-12 is treated as 1.
Matrix erf_normalize(const Matrix& X, const NormStats& stats);

struct Fold {
    std::vector<std::size_t> train;
    std::vector<std::size_t> test;
};

/// Stratified k-fold split. Each class's members are shuffled with `seed` and dealt
/// round-robin across folds, so per-class counts across folds differ by at most one.
std::vector<Fold> stratified_kfold(const Dataset& d, std::size_t k, std::uint64_t seed);

struct SyntheticSpec {
    std::size_t n_samples = 2000;
    std::size_t n_informative = 10;
    std::size_t n_noise = 90;
    double flip_prob = 0.0;
    std::uint64_t seed = 0;
};

struct SyntheticData {
    Dataset data;
    std::vector<std::size_t> informative;   // sorted column indices
    Vector weights;                          // hidden hyperplane over `informative`
    double threshold = 0.0;
};

/// Binary dataset whose label is sign(w . x_informative - threshold), flipped with
/// probability flip_prob. All columns are i.i.d. standard normal; each weight has a
/// random sign and magnitude uniform in [1, 2].
SyntheticData make_synthetic(const SyntheticSpec& spec);

/// Remaps arbitrary label tokens to contiguous ids in order of first appearance.
class LabelEncoder {
public:
    int encode(const std::string& token);
    std::size_t size() const noexcept { return tokens_.size(); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }

private:
    std::vector<std::string> tokens_;
};

} // namespace e2efs
