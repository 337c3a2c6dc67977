#include "e2efs/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <map>
#include <random>
#include <sstream>

namespace e2efs {

void Dataset::validate() const {
    if (X.rows() != y.size()) {
        throw std::invalid_argument("Dataset: " + std::to_string(X.rows()) + " rows but " +
                                    std::to_string(y.size()) + " labels");
    }
    if (X.rows() < 2) throw std::invalid_argument("Dataset: need at least 2 samples");
    if (class_count == 0) throw std::invalid_argument("Dataset: class_count is 0");
    for (int label : y) {
        if (label < 0 || static_cast<std::size_t>(label) >= class_count) {
            throw std::invalid_argument("Dataset: label " + std::to_string(label) +
                                        " outside 0.." + std::to_string(class_count - 1));
        }
    }
    const auto counts = class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] == 0)
            throw std::invalid_argument("Dataset: class " + std::to_string(c) + " has no samples");
    }
    if (!feature_names.empty() && feature_names.size() != X.cols())
        throw std::invalid_argument("Dataset: feature_names length does not match columns");
    require_finite(X.data(), "Dataset features");
}

std::vector<std::size_t> Dataset::class_counts() const {
    std::vector<std::size_t> counts(class_count, 0);
    for (int label : y)
        if (label >= 0 && static_cast<std::size_t>(label) < class_count) ++counts[label];
    return counts;
}

Dataset Dataset::select_rows(const std::vector<std::size_t>& rows) const {
    Dataset out;
    out.X = Matrix(rows.size(), X.cols());
    out.y.reserve(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= X.rows()) throw std::out_of_range("select_rows: row index out of range");
        std::copy_n(X.row(rows[i]).begin(), X.cols(), out.X.row(i).begin());
        out.y.push_back(y[rows[i]]);
    }
    out.class_count = class_count;
    out.feature_names = feature_names;
    return out;
}

Dataset Dataset::select_columns(const std::vector<std::size_t>& cols) const {
    Dataset out;
    out.X = Matrix(X.rows(), cols.size());
    for (std::size_t j = 0; j < cols.size(); ++j)
        if (cols[j] >= X.cols()) throw std::out_of_range("select_columns: column index out of range");
    for (std::size_t i = 0; i < X.rows(); ++i)
        for (std::size_t j = 0; j < cols.size(); ++j) out.X(i, j) = X(i, cols[j]);
    out.y = y;
    out.class_count = class_count;
    if (!feature_names.empty()) {
        for (std::size_t c : cols) out.feature_names.push_back(feature_names[c]);
    }
    return out;
}

int LabelEncoder::encode(const std::string& token) {
    auto it = std::find(tokens_.begin(), tokens_.end(), token);
    if (it != tokens_.end()) return static_cast<int>(it - tokens_.begin());
    tokens_.push_back(token);
    return static_cast<int>(tokens_.size() - 1);
}

namespace {

std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        cells.push_back(trim(std::string_view(line).substr(start, pos - start)));
        if (pos == std::string::npos) break;
        start = pos + 1;
    }
    return cells;
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    const char* b = s.data();
    const char* e = b + s.size();
    if (*b == '+') ++b;
    auto [ptr, ec] = std::from_chars(b, e, out);
    return ec == std::errc() && ptr == e && std::isfinite(out);
}

[[noreturn]] void parse_fail(const std::filesystem::path& path, std::size_t line,
                             const std::string& msg) {
    throw ParseError(path.string() + ":" + std::to_string(line) + ": " + msg);
}

bool is_skippable(const std::string& line) {
    const auto t = trim(line);
    return t.empty() || t.front() == '#';
}

std::ifstream open_or_throw(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError(path.string() + ": cannot open file");
    return in;
}

} // namespace

Dataset load_csv(const std::filesystem::path& path, const CsvOptions& options) {
    auto in = open_or_throw(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::string> header;
    std::optional<std::size_t> label_col;
    std::size_t width = 0;
    std::vector<double> values;
    std::vector<std::string> label_tokens;
    std::size_t rows = 0;

    auto resolve_label = [&](std::size_t ncols) {
        if (const auto* idx = std::get_if<long>(&options.label_column)) {
            const long i = *idx < 0 ? static_cast<long>(ncols) + *idx : *idx;
            if (i < 0 || static_cast<std::size_t>(i) >= ncols)
                parse_fail(path, line_no, "label column " + std::to_string(*idx) + " out of range");
            return static_cast<std::size_t>(i);
        }
        const auto& name = std::get<std::string>(options.label_column);
        if (header.empty()) parse_fail(path, line_no, "label column by name requires a header");
        auto it = std::find(header.begin(), header.end(), name);
        if (it == header.end()) parse_fail(path, line_no, "no column named '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };

    while (std::getline(in, line)) {
        ++line_no;
        if (is_skippable(line)) continue;
        auto cells = split_csv(line);
        if (options.has_header && header.empty()) {
            header = std::move(cells);
            width = header.size();
            label_col = resolve_label(width);
            continue;
        }
        if (width == 0) {
            width = cells.size();
            label_col = resolve_label(width);
        }
        if (cells.size() != width) {
            parse_fail(path, line_no,
                       "expected " + std::to_string(width) + " cells, found " +
                           std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < width; ++c) {
            if (c == *label_col) {
                label_tokens.push_back(cells[c]);
                continue;
            }
            double v = 0.0;
            if (!parse_double(cells[c], v))
                parse_fail(path, line_no, "non-numeric feature cell '" + cells[c] + "'");
            values.push_back(v);
        }
        ++rows;
    }
    if (rows == 0) parse_fail(path, line_no, "no data rows");
    if (width < 2) parse_fail(path, line_no, "need at least one feature column and a label");

    Dataset d;
    d.X = Matrix(rows, width - 1, std::move(values));
    LabelEncoder enc;
    for (const auto& t : label_tokens) d.y.push_back(enc.encode(t));
    d.class_count = enc.size();
    if (!header.empty()) {
        for (std::size_t c = 0; c < width; ++c)
            if (c != *label_col) d.feature_names.push_back(header[c]);
    }
    d.validate();
    return d;
}

Dataset load_libsvm(const std::filesystem::path& path) {
    auto in = open_or_throw(path);
    std::string line;
    std::size_t line_no = 0;
    std::vector<std::vector<std::pair<std::size_t, double>>> rows;
    std::vector<std::string> label_tokens;
    std::size_t max_index = 0;

    while (std::getline(in, line)) {
        ++line_no;
        if (is_skippable(line)) continue;
        std::istringstream ss(line);
        std::string tok;
        ss >> tok;
        label_tokens.push_back(tok);
        auto& row = rows.emplace_back();
        while (ss >> tok) {
            if (tok.front() == '#') break;
            const auto colon = tok.find(':');
            if (colon == std::string::npos) parse_fail(path, line_no, "malformed pair '" + tok + "'");
            std::size_t idx = 0;
            const auto idx_str = tok.substr(0, colon);
            auto [p, ec] = std::from_chars(idx_str.data(), idx_str.data() + idx_str.size(), idx);
            if (ec != std::errc() || p != idx_str.data() + idx_str.size() || idx == 0)
                parse_fail(path, line_no, "bad feature index '" + idx_str + "'");
            double v = 0.0;
            if (!parse_double(tok.substr(colon + 1), v))
                parse_fail(path, line_no, "non-numeric value in '" + tok + "'");
            row.emplace_back(idx - 1, v);
            max_index = std::max(max_index, idx);
        }
    }
    if (rows.empty()) parse_fail(path, line_no, "no data rows");

    Dataset d;
    d.X = Matrix(rows.size(), max_index);
    for (std::size_t i = 0; i < rows.size(); ++i)
        for (auto [j, v] : rows[i]) d.X(i, j) = v;
    LabelEncoder enc;
    for (const auto& t : label_tokens) d.y.push_back(enc.encode(t));
    d.class_count = enc.size();
    d.validate();
    return d;
}

namespace {

std::ofstream create_or_throw(const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error(path.string() + ": cannot open for writing");
    out << std::setprecision(std::numeric_limits<double>::max_digits10);
    return out;
}

} // namespace

void write_csv(const Dataset& d, const std::filesystem::path& path, bool header,
               const std::string& comment) {
    auto out = create_or_throw(path);
    if (!comment.empty()) out << "# " << comment << '\n';
    if (header) {
        for (std::size_t j = 0; j < d.features(); ++j)
            out << (d.feature_names.empty() ? "f" + std::to_string(j) : d.feature_names[j]) << ',';
        out << "label\n";
    }
    for (std::size_t i = 0; i < d.samples(); ++i) {
        for (double v : d.X.row(i)) out << v << ',';
        out << d.y[i] << '\n';
    }
}

void write_libsvm(const Dataset& d, const std::filesystem::path& path) {
    auto out = create_or_throw(path);
    for (std::size_t i = 0; i < d.samples(); ++i) {
        out << d.y[i];
        const auto r = d.X.row(i);
        for (std::size_t j = 0; j < r.size(); ++j)
            if (r[j] != 0.0 || j + 1 == r.size()) out << ' ' << (j + 1) << ':' << r[j];
        out << '\n';
    }
}

NormStats compute_norm_stats(const Matrix& X) {
    const std::size_t n = X.rows();
    const std::size_t f = X.cols();
    NormStats s{Vector(f, 0.0), Vector(f, 0.0)};
    if (n == 0) return s;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) s.mean[j] += X(i, j);
    for (double& m : s.mean) m /= static_cast<double>(n);
    if (n < 2) return s;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < f; ++j) {
            const double dlt = X(i, j) - s.mean[j];
            s.std[j] += dlt * dlt;
        }
    for (double& v : s.std) v = std::sqrt(v / static_cast<double>(n - 1));
    return s;
}

Matrix erf_normalize(const Matrix& X, const NormStats& stats) {
    if (stats.mean.size() != X.cols() || stats.std.size() != X.cols()) {
        throw std::invalid_argument("erf_normalize: stats cover " + std::to_string(stats.mean.size()) +
                                    " features, matrix has " + std::to_string(X.cols()));
    }
    // Keep the output strictly inside (-1, 1) even where erf rounds to +-1.
    const double bound = std::nextafter(1.0, 0.0);
    Matrix out(X.rows(), X.cols());
    for (std::size_t j = 0; j < X.cols(); ++j) {
        const double sd = stats.std[j] < 1e-12 ? 1.0 : stats.std[j];
        const double scale = 1.0 / (2.0 * sd);
        for (std::size_t i = 0; i < X.rows(); ++i) {
            const double v = erf((X(i, j) - stats.mean[j]) * scale);
            out(i, j) = std::clamp(v, -bound, bound);
        }
    }
    return out;
}

std::vector<Fold> stratified_kfold(const Dataset& d, std::size_t k, std::uint64_t seed) {
    if (k < 2) throw std::invalid_argument("stratified_kfold: k must be at least 2");
    const auto counts = d.class_counts();
    for (std::size_t c = 0; c < counts.size(); ++c) {
        if (counts[c] < k) {
            throw std::invalid_argument("stratified_kfold: class " + std::to_string(c) + " has " +
                                        std::to_string(counts[c]) + " members, fewer than k=" +
                                        std::to_string(k));
        }
    }
    std::mt19937_64 rng(seed);
    std::vector<std::vector<std::size_t>> test(k);
    std::size_t position = 0;
    for (std::size_t c = 0; c < d.class_count; ++c) {
        std::vector<std::size_t> members;
        for (std::size_t i = 0; i < d.y.size(); ++i)
            if (static_cast<std::size_t>(d.y[i]) == c) members.push_back(i);
        std::shuffle(members.begin(), members.end(), rng);
        for (std::size_t idx : members) test[position++ % k].push_back(idx);
    }
    std::vector<Fold> folds(k);
    std::vector<char> in_test(d.samples());
    for (std::size_t f = 0; f < k; ++f) {
        std::sort(test[f].begin(), test[f].end());
        std::fill(in_test.begin(), in_test.end(), 0);
        for (std::size_t idx : test[f]) in_test[idx] = 1;
        for (std::size_t i = 0; i < d.samples(); ++i)
            if (!in_test[i]) folds[f].train.push_back(i);
        folds[f].test = std::move(test[f]);
    }
    return folds;
}

SyntheticData make_synthetic(const SyntheticSpec& spec) {
    if (spec.n_informative < 1) throw std::invalid_argument("make_synthetic: n_informative must be >= 1");
    if (spec.n_samples < 2) throw std::invalid_argument("make_synthetic: n_samples must be >= 2");
    if (spec.flip_prob < 0.0 || spec.flip_prob > 1.0)
        throw std::invalid_argument("make_synthetic: flip_prob must be in [0, 1]");

    const std::size_t f = spec.n_informative + spec.n_noise;
    std::mt19937_64 rng(spec.seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);

    SyntheticData out;
    std::vector<std::size_t> columns(f);
    for (std::size_t j = 0; j < f; ++j) columns[j] = j;
    std::shuffle(columns.begin(), columns.end(), rng);
    out.informative.assign(columns.begin(), columns.begin() + spec.n_informative);
    std::sort(out.informative.begin(), out.informative.end());

    out.weights.resize(spec.n_informative);
    // Magnitudes bounded away from zero so every informative column carries signal on its own.
    for (double& w : out.weights) w = (unit(rng) < 0.5 ? -1.0 : 1.0) * (1.0 + unit(rng));
    out.threshold = 0.0;

    Dataset& d = out.data;
    d.X = Matrix(spec.n_samples, f);
    for (double& v : d.X.data()) v = normal(rng);
    d.y.resize(spec.n_samples);
    d.class_count = 2;
    for (std::size_t i = 0; i < spec.n_samples; ++i) {
        double s = 0.0;
        for (std::size_t k = 0; k < spec.n_informative; ++k) s += out.weights[k] * d.X(i, out.informative[k]);
        int label = s > out.threshold ? 1 : 0;
        if (unit(rng) < spec.flip_prob) label = 1 - label;
        d.y[i] = label;
    }
    const auto counts = d.class_counts();
    if (counts[0] == 0 || counts[1] == 0)
        throw std::runtime_error("make_synthetic: draw produced a single class; use another seed");
    return out;
}

} // namespace e2efs
