#include "sscipi/data.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace sscipi {

namespace {

constexpr std::uint64_t kPoissonTag = 0x9015;

std::ifstream open_in(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return in;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  return out;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_real(const std::string& token, std::int64_t line) {
  const std::string t = trim(token);
  if (t.empty()) throw ParseError("empty field", line);
  std::size_t used = 0;
  double value = 0.0;
  try {
    value = std::stod(t, &used);
  } catch (const std::exception&) {
    throw ParseError("not a number: '" + t + "'", line);
  }
  if (used != t.size()) throw ParseError("trailing characters in '" + t + "'", line);
  return value;
}

long long parse_int(const std::string& token, std::int64_t line) {
  long long value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ParseError("not an integer: '" + token + "'", line);
  }
  return value;
}

std::string lower(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

double SyntheticSpec::rate() const { return -std::log1p(-sparsity); }

void SyntheticSpec::validate() const {
  if (rows < 0 || cols < 0) throw std::invalid_argument("negative dimensions");
  if (!(sparsity > 0.0 && sparsity < 1.0)) {
    throw std::invalid_argument("sparsity must lie in (0, 1)");
  }
  if (!(rate() < 31.0)) throw std::invalid_argument("Poisson rate exceeds 31");
}

DatasetManifest describe(const CountMatrix& v, std::string name, std::string source,
                         std::string format) {
  DatasetManifest m;
  m.name = std::move(name);
  m.source = std::move(source);
  m.format = std::move(format);
  m.rows = v.rows();
  m.cols = v.cols();
  m.nnz = v.nnz();
  return m;
}

// ---------------------------------------------------------------------------
// UCI bag of words

CountMatrix load_uci_bow(std::istream& in, std::vector<std::string>* warnings,
                         bool require_integer) {
  std::string line;
  std::int64_t lineno = 0;
  long long header[3];
  for (int h = 0; h < 3; ++h) {
    if (!std::getline(in, line)) throw ParseError("missing header line", lineno + 1);
    ++lineno;
    header[h] = parse_int(trim(line), lineno);
    if (header[h] < 0) throw ParseError("negative header value", lineno);
  }
  const Index rows = header[0];
  const Index cols = header[1];
  const long long declared = header[2];

  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(declared));
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty()) continue;
    std::istringstream fields(t);
    std::string a, b, c, extra;
    if (!(fields >> a >> b >> c) || (fields >> extra)) {
      throw ParseError("expected 'docID wordID count'", lineno);
    }
    const long long doc = parse_int(a, lineno);
    const long long word = parse_int(b, lineno);
    const double count = parse_real(c, lineno);
    if (doc < 1 || doc > rows || word < 1 || word > cols) {
      throw ParseError("index (" + a + "," + b + ") outside declared " +
                           std::to_string(rows) + "x" + std::to_string(cols),
                       lineno);
    }
    if (!(count >= 0.0)) throw ParseError("negative count", lineno);
    if (require_integer && count != std::floor(count)) {
      throw ParseError("non-integer count", lineno);
    }
    triplets.emplace_back(static_cast<int>(doc - 1), static_cast<int>(word - 1), count);
  }
  if (static_cast<long long>(triplets.size()) != declared && warnings) {
    warnings->push_back("declared " + std::to_string(declared) + " nonzeros, read " +
                        std::to_string(triplets.size()));
  }
  return CountMatrix(rows, cols, triplets);
}

CountMatrix load_uci_bow(const std::string& path, std::vector<std::string>* warnings,
                         bool require_integer) {
  auto in = open_in(path);
  return load_uci_bow(in, warnings, require_integer);
}

void write_uci_bow(const CountMatrix& v, std::ostream& out) {
  out << v.rows() << '\n' << v.cols() << '\n' << v.nnz() << '\n';
  out << std::setprecision(17);
  for (Index t = 0; t < v.nnz(); ++t) {
    out << v.row(t) + 1 << ' ' << v.col(t) + 1 << ' ' << v.value(t) << '\n';
  }
}

void write_uci_bow(const CountMatrix& v, const std::string& path) {
  auto out = open_out(path);
  write_uci_bow(v, out);
}

// ---------------------------------------------------------------------------
// Dense formats

namespace {

DenseCountMatrix<double> load_csv(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  std::int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    std::vector<double> row;
    std::stringstream fields(line);
    std::string cell;
    while (std::getline(fields, cell, ',')) {
      const double x = parse_real(cell, lineno);
      if (!(x >= 0.0)) {
        throw ParseError("negative entry at row " + std::to_string(rows.size()) +
                             ", col " + std::to_string(row.size()),
                         lineno);
      }
      row.push_back(x);
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError("ragged row", lineno);
    }
    rows.push_back(std::move(row));
  }
  const Index n = static_cast<Index>(rows.size());
  const Index m = n > 0 ? static_cast<Index>(rows.front().size()) : 0;
  DenseCountMatrix<double> out(n, m);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) out(i, j) = rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
  }
  return out;
}

DenseCountMatrix<double> load_mm(std::istream& in) {
  std::string line;
  std::int64_t lineno = 0;
  if (!std::getline(in, line)) throw ParseError("empty MatrixMarket file", 1);
  ++lineno;
  std::istringstream banner(lower(line));
  std::string tag, object, layout, field, symmetry;
  banner >> tag >> object >> layout >> field >> symmetry;
  if (tag != "%%matrixmarket" || object != "matrix") {
    throw ParseError("missing %%MatrixMarket matrix banner", lineno);
  }
  if (layout != "coordinate" && layout != "array") throw ParseError("unknown layout", lineno);
  if (field != "real" && field != "integer" && field != "pattern" && field != "double") {
    throw ParseError("unsupported field '" + field + "'", lineno);
  }
  if (symmetry.empty()) symmetry = "general";
  if (symmetry != "general" && symmetry != "symmetric") {
    throw ParseError("unsupported symmetry '" + symmetry + "'", lineno);
  }
  const bool pattern = field == "pattern";
  const bool symmetric = symmetry == "symmetric";

  auto next_data_line = [&]() -> std::string {
    while (std::getline(in, line)) {
      ++lineno;
      const std::string t = trim(line);
      if (!t.empty() && t[0] != '%') return t;
    }
    return {};
  };

  std::istringstream size_line(next_data_line());
  long long n = 0, m = 0, entries = 0;
  if (layout == "coordinate") {
    if (!(size_line >> n >> m >> entries)) throw ParseError("bad size line", lineno);
  } else {
    if (!(size_line >> n >> m)) throw ParseError("bad size line", lineno);
    entries = n * m;
  }
  if (n < 0 || m < 0 || entries < 0) throw ParseError("negative size", lineno);
  DenseCountMatrix<double> out = DenseCountMatrix<double>::Zero(n, m);
  for (long long e = 0; e < entries; ++e) {
    const std::string t = next_data_line();
    if (t.empty()) throw ParseError("expected " + std::to_string(entries) + " entries", lineno);
    std::istringstream fields(t);
    long long i = 0, j = 0;
    double x = 1.0;
    if (layout == "coordinate") {
      std::string a, b, c;
      if (!(fields >> a >> b)) throw ParseError("bad entry", lineno);
      i = parse_int(a, lineno) - 1;
      j = parse_int(b, lineno) - 1;
      if (!pattern) {
        if (!(fields >> c)) throw ParseError("missing value", lineno);
        x = parse_real(c, lineno);
      }
    } else {
      std::string c;
      if (!(fields >> c)) throw ParseError("bad entry", lineno);
      x = parse_real(c, lineno);
      i = e % n;
      j = e / n;
    }
    if (i < 0 || i >= n || j < 0 || j >= m) throw ParseError("index out of range", lineno);
    if (!(x >= 0.0)) {
      throw ParseError("negative entry at row " + std::to_string(i + 1) + ", col " +
                           std::to_string(j + 1),
                       lineno);
    }
    out(i, j) += x;
    if (symmetric && i != j) out(j, i) += x;
  }
  return out;
}

}  // namespace

DenseCountMatrix<double> load_dense(std::istream& in, DenseFormat format) {
  return format == DenseFormat::csv ? load_csv(in) : load_mm(in);
}

DenseCountMatrix<double> load_dense(const std::string& path, DenseFormat format) {
  auto in = open_in(path);
  return load_dense(in, format);
}

void write_csv(const DenseCountMatrix<double>& v, std::ostream& out) {
  out << std::setprecision(17);
  for (Index i = 0; i < v.rows(); ++i) {
    for (Index j = 0; j < v.cols(); ++j) {
      if (j > 0) out << ',';
      out << v(i, j);
    }
    out << '\n';
  }
}

void write_matrix_market(const CountMatrix& v, std::ostream& out) {
  out << "%%MatrixMarket matrix coordinate real general\n";
  out << v.rows() << ' ' << v.cols() << ' ' << v.nnz() << '\n';
  out << std::setprecision(17);
  for (Index t = 0; t < v.nnz(); ++t) {
    out << v.row(t) + 1 << ' ' << v.col(t) + 1 << ' ' << v.value(t) << '\n';
  }
}

CountMatrix load_counts(const std::string& path, const std::string& format) {
  if (format == "uci") return load_uci_bow(path);
  if (format == "mm") return CountMatrix::from_dense(load_dense(path, DenseFormat::matrix_market));
  if (format == "csv") return CountMatrix::from_dense(load_dense(path, DenseFormat::csv));
  throw std::invalid_argument("unknown data format '" + format + "' (uci, mm, csv)");
}

// ---------------------------------------------------------------------------

Preprocessed preprocess_min_sum(const CountMatrix& v, double threshold) {
  if (!(threshold >= 0.0)) throw std::invalid_argument("threshold must be nonnegative");
  Preprocessed out;
  const DVector rs = row_sums(v);
  std::vector<Index> new_row(static_cast<std::size_t>(v.rows()), -1);
  for (Index i = 0; i < v.rows(); ++i) {
    if (rs[i] >= threshold) {
      new_row[static_cast<std::size_t>(i)] = static_cast<Index>(out.kept_rows.size());
      out.kept_rows.push_back(i);
    }
  }
  DVector cs = DVector::Zero(v.cols());
  for (Index t = 0; t < v.nnz(); ++t) {
    if (new_row[static_cast<std::size_t>(v.row(t))] >= 0) cs[v.col(t)] += v.value(t);
  }
  std::vector<Index> new_col(static_cast<std::size_t>(v.cols()), -1);
  for (Index j = 0; j < v.cols(); ++j) {
    if (cs[j] >= threshold) {
      new_col[static_cast<std::size_t>(j)] = static_cast<Index>(out.kept_cols.size());
      out.kept_cols.push_back(j);
    }
  }
  if (out.kept_rows.empty() || out.kept_cols.empty()) {
    throw std::domain_error("preprocessing removed every row or column");
  }
  std::vector<Eigen::Triplet<double>> triplets;
  for (Index t = 0; t < v.nnz(); ++t) {
    const Index r = new_row[static_cast<std::size_t>(v.row(t))];
    const Index c = new_col[static_cast<std::size_t>(v.col(t))];
    if (r >= 0 && c >= 0) triplets.emplace_back(static_cast<int>(r), static_cast<int>(c), v.value(t));
  }
  out.matrix = CountMatrix(static_cast<Index>(out.kept_rows.size()),
                           static_cast<Index>(out.kept_cols.size()), triplets);
  return out;
}

CountMatrix gen_poisson(const SyntheticSpec& spec) {
  spec.validate();
  const double lambda = spec.rate();
  const double p0 = std::exp(-lambda);
  const RngStream root(spec.seed);
  std::vector<Eigen::Triplet<double>> triplets;
  triplets.reserve(static_cast<std::size_t>(spec.sparsity * static_cast<double>(spec.rows) *
                                            static_cast<double>(spec.cols) * 1.01) + 16);
  for (Index i = 0; i < spec.rows; ++i) {
    RngStream rng = root.split(kPoissonTag, static_cast<std::uint64_t>(i));
    for (Index j = 0; j < spec.cols; ++j) {
      const double u = rng.uniform();
      int k = 0;
      double p = p0;
      double cdf = p0;
      while (u >= cdf && k < 1000) {
        ++k;
        p *= lambda / k;
        cdf += p;
      }
      if (k > 0) triplets.emplace_back(static_cast<int>(i), static_cast<int>(j), k);
    }
  }
  return CountMatrix(spec.rows, spec.cols, triplets);
}

}  // namespace sscipi
