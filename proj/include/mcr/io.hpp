#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mcr/final_fit.hpp"
#include "mcr/mixreg_em.hpp"
#include "mcr/types.hpp"

namespace mcr::io {

using nlohmann::json;

/// Shortest decimal text that parses back to the same double.
std::string format_double(double v);
double parse_double(std::string_view s);

struct NamedDataset {
    Datasetd data;
    std::vector<std::string> x_names;
};

// Dataset file: a JSON document whose header (n, p, q, names) comes first,
// followed by one CSV string per observation ("y,x1,...,xq[,label]") and one
// [row, col] pair per nonzero feature entry.
void write_dataset(std::ostream& os, const Datasetd& data, const std::vector<std::string>& x_names = {});
NamedDataset read_dataset(std::istream& is);
void save_dataset(const std::filesystem::path& path, const Datasetd& data,
                  const std::vector<std::string>& x_names = {});
NamedDataset load_dataset(const std::filesystem::path& path);

json to_json(const MixtureParamsd& m);
MixtureParamsd mixture_from_json(const json& j);
json to_json(const FullParamsd& f);
FullParamsd full_params_from_json(const json& j);
json to_json(const FinalFitd& f);
FinalFitd final_fit_from_json(const json& j);
json to_json(const EmTrace& t);
EmTrace trace_from_json(const json& j);

/// Everything `fit` writes: both parameter stages, inference and diagnostics.
struct ModelFile {
    Index k = 0;
    Index p = 0;
    Index q = 0;
    std::vector<std::string> x_names;
    FullParamsd initial;
    FinalFitd final_fit;
    EmTrace trace;
    double loglik_limited = 0;
    double bic = 0;
    std::optional<Index> k_hat;
    std::vector<double> bic_values;

    /// Final regression blocks with P_hat, as used for prediction.
    FullParamsd prediction_params() const { return {final_fit.as_mixture(), initial.response}; }
};

json to_json(const ModelFile& m);
ModelFile model_from_json(const json& j);
void save_model(const std::filesystem::path& path, const ModelFile& m);
ModelFile load_model(const std::filesystem::path& path);

void save_json(const std::filesystem::path& path, const json& j);
json load_json(const std::filesystem::path& path);

/// MatrixMarket coordinate files (1-based indices; integer, real or pattern).
Eigen::SparseMatrix<double> read_matrix_market(std::istream& is);
Eigen::SparseMatrix<double> load_matrix_market(const std::filesystem::path& path);
void write_matrix_market(std::ostream& os, const Eigen::SparseMatrix<double>& m, bool pattern);
void save_matrix_market(const std::filesystem::path& path, const Eigen::SparseMatrix<double>& m,
                        bool pattern);

/// Plain numeric CSV with a header row.
struct Table {
    std::vector<std::string> header;
    Matrix<double> values;
};
Table load_csv(const std::filesystem::path& path);

}  // namespace mcr::io
