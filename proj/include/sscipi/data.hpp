#ifndef SSCIPI_DATA_HPP
#define SSCIPI_DATA_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "sscipi/klnmf.hpp"

namespace sscipi {

/// i.i.d. Poisson(-log(1 - rho)) counts, so P(V_ij > 0) = rho.
struct SyntheticSpec {
  Index rows = 0;
  Index cols = 0;
  double sparsity = 0.5;  // rho: expected fraction of nonzero entries
  std::uint64_t seed = 0;

  double rate() const;
  void validate() const;
};

struct DatasetManifest {
  std::string name;
  std::string source;
  std::string format;
  Index rows = 0;
  Index cols = 0;
  Index nnz = 0;
  std::string preprocessing = "none";
};

DatasetManifest describe(const CountMatrix& v, std::string name, std::string source,
                         std::string format);

/// UCI bag-of-words: three header lines D, W, NNZ, then 1-based
/// "docID wordID count" lines. Duplicates are summed. A NNZ mismatch is
/// reported through `warnings`, not thrown.
CountMatrix load_uci_bow(std::istream& in, std::vector<std::string>* warnings = nullptr,
                         bool require_integer = false);
CountMatrix load_uci_bow(const std::string& path,
                         std::vector<std::string>* warnings = nullptr,
                         bool require_integer = false);
void write_uci_bow(const CountMatrix& v, std::ostream& out);
void write_uci_bow(const CountMatrix& v, const std::string& path);

enum class DenseFormat { csv, matrix_market };

DenseCountMatrix<double> load_dense(std::istream& in, DenseFormat format);
DenseCountMatrix<double> load_dense(const std::string& path, DenseFormat format);
void write_csv(const DenseCountMatrix<double>& v, std::ostream& out);
void write_matrix_market(const CountMatrix& v, std::ostream& out);

/// Loads any supported file as a sparse count matrix. `format` is one of
/// "uci", "mm", "csv".
CountMatrix load_counts(const std::string& path, const std::string& format);

struct Preprocessed {
  CountMatrix matrix;
  std::vector<Index> kept_rows;
  std::vector<Index> kept_cols;
};

/// Drops rows with sum < threshold, then columns of the remaining matrix
/// with sum < threshold. One pass each; not iterated to a fixpoint.
Preprocessed preprocess_min_sum(const CountMatrix& v, double threshold);

/// Entries by inversion from per-row child streams of the seed.
CountMatrix gen_poisson(const SyntheticSpec& spec);

}  // namespace sscipi

#endif  // SSCIPI_DATA_HPP
