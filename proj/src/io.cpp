#include "mcr/io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>
#include <system_error>

namespace mcr::io {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

double parse_double(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    double v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        throw SchemaMismatch("not a number: '" + std::string(s) + "'");
    }
    return v;
}

namespace {

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw IoError("cannot open for writing: " + path.string());
    return os;
}

std::ifstream open_in(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open for reading: " + path.string());
    return is;
}

Vector<double> vec_from_json(const json& j) {
    Vector<double> v(Index(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(Index(i)) = j.at(i).get<double>();
    return v;
}

json vec_to_json(const Vector<double>& v) {
    json j = json::array();
    for (Index i = 0; i < v.size(); ++i) j.push_back(v(i));
    return j;
}

json mat_to_json(const Matrix<double>& m) {
    json j = json::array();
    for (Index r = 0; r < m.rows(); ++r) j.push_back(vec_to_json(m.row(r).transpose()));
    return j;
}

Matrix<double> mat_from_json(const json& j, Index cols_if_empty = 0) {
    const Index rows = Index(j.size());
    const Index cols = rows ? Index(j.at(0).size()) : cols_if_empty;
    Matrix<double> m(rows, cols);
    for (Index r = 0; r < rows; ++r) {
        if (Index(j.at(std::size_t(r)).size()) != cols) throw SchemaMismatch("ragged matrix in JSON");
        for (Index c = 0; c < cols; ++c) m(r, c) = j.at(std::size_t(r)).at(std::size_t(c)).get<double>();
    }
    return m;
}

}  // namespace

// ---------------------------------------------------------------------------
// Dataset files

void write_dataset(std::ostream& os, const Datasetd& data, const std::vector<std::string>& x_names) {
    validate(data);
    const Index n = data.n(), q = data.q(), p = data.p();
    std::vector<std::string> names = x_names;
    if (names.empty())
        for (Index c = 0; c < q; ++c) names.push_back("x" + std::to_string(c + 1));
    if (Index(names.size()) != q) throw DimensionMismatch("x_names length != q");
    const bool labels = data.true_labels.has_value();

    std::string columns = "y";
    for (const auto& name : names) columns += "," + name;
    if (labels) columns += ",label";

    os << "{\n";
    os << "  \"format\": \"mcr-dataset\",\n  \"version\": 1,\n";
    os << "  \"n\": " << n << ",\n  \"p\": " << p << ",\n  \"q\": " << q << ",\n";
    os << "  \"x_names\": " << json(names).dump() << ",\n";
    os << "  \"has_labels\": " << (labels ? "true" : "false") << ",\n";
    os << "  \"nnz\": " << data.z.nonZeros() << ",\n";
    os << "  \"columns\": " << json(columns).dump() << ",\n";
    os << "  \"rows\": [";
    for (Index i = 0; i < n; ++i) {
        std::string row = format_double(data.y(i));
        for (Index c = 0; c < q; ++c) row += "," + format_double(data.x(i, c));
        if (labels) row += "," + std::to_string((*data.true_labels)[std::size_t(i)]);
        os << (i ? ",\n    " : "\n    ") << json(row).dump();
    }
    os << "\n  ],\n  \"z_ones\": [";
    // Row-major listing reads naturally; the sparse store is column-major.
    std::vector<std::pair<Index, Index>> ones;
    ones.reserve(std::size_t(data.z.nonZeros()));
    for (Index j = 0; j < data.z.outerSize(); ++j)
        for (SparseBinary<double>::InnerIterator it(data.z, j); it; ++it)
            if (it.value() != 0) ones.emplace_back(it.row(), j);
    std::sort(ones.begin(), ones.end());
    for (std::size_t e = 0; e < ones.size(); ++e) {
        os << (e ? ",\n    [" : "\n    [") << ones[e].first << ", " << ones[e].second << "]";
    }
    os << (ones.empty() ? "]\n}\n" : "\n  ]\n}\n");
}

NamedDataset read_dataset(std::istream& is) {
    json j;
    try {
        j = json::parse(is);
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("dataset is not valid JSON: ") + e.what());
    }
    try {
        if (j.value("format", "") != "mcr-dataset") throw SchemaMismatch("not an mcr-dataset file");
        const Index n = j.at("n").get<Index>(), p = j.at("p").get<Index>(), q = j.at("q").get<Index>();
        const bool labels = j.at("has_labels").get<bool>();
        NamedDataset out;
        out.x_names = j.at("x_names").get<std::vector<std::string>>();
        if (Index(out.x_names.size()) != q) throw SchemaMismatch("x_names length != q");
        const auto& rows = j.at("rows");
        if (Index(rows.size()) != n) throw SchemaMismatch("row count != n");
        Datasetd& d = out.data;
        d.y.resize(n);
        d.x.resize(n, q);
        if (labels) d.true_labels.emplace(std::size_t(n));
        const std::size_t expect = std::size_t(1 + q + (labels ? 1 : 0));
        for (Index i = 0; i < n; ++i) {
            const std::string row = rows.at(std::size_t(i)).get<std::string>();
            const auto cells = split_commas(row);
            if (cells.size() != expect) {
                throw SchemaMismatch("row " + std::to_string(i) + " has " + std::to_string(cells.size()) +
                                     " fields, expected " + std::to_string(expect));
            }
            d.y(i) = parse_double(cells[0]);
            for (Index c = 0; c < q; ++c) d.x(i, c) = parse_double(cells[std::size_t(1 + c)]);
            if (labels) (*d.true_labels)[std::size_t(i)] = Index(parse_double(cells.back()));
        }
        std::vector<Eigen::Triplet<double>> trip;
        for (const auto& e : j.at("z_ones")) {
            const Index r = e.at(0).get<Index>(), c = e.at(1).get<Index>();
            if (r < 0 || r >= n || c < 0 || c >= p) throw SchemaMismatch("z entry outside n x p");
            trip.emplace_back(r, c, 1.0);
        }
        d.z.resize(n, p);
        d.z.setFromTriplets(trip.begin(), trip.end());
        d.z.makeCompressed();
        validate(d);
        return out;
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("malformed dataset: ") + e.what());
    }
}

void save_dataset(const std::filesystem::path& path, const Datasetd& data,
                  const std::vector<std::string>& x_names) {
    auto os = open_out(path);
    write_dataset(os, data, x_names);
    if (!os) throw IoError("write failed: " + path.string());
}

NamedDataset load_dataset(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return read_dataset(is);
    } catch (const SchemaMismatch& e) {
        throw SchemaMismatch(path.string() + ": " + e.what());
    }
}

// ---------------------------------------------------------------------------
// Parameter blocks

json to_json(const MixtureParamsd& m) {
    return {{"priors", vec_to_json(m.priors)},
            {"intercepts", vec_to_json(m.intercepts)},
            {"slopes", vec_to_json(m.slopes)},
            {"noise_var", m.noise_var}};
}

MixtureParamsd mixture_from_json(const json& j) {
    return {vec_from_json(j.at("priors")), vec_from_json(j.at("intercepts")), vec_from_json(j.at("slopes")),
            j.at("noise_var").get<double>()};
}

json to_json(const FullParamsd& f) {
    json j = to_json(f.mixture);
    j["p"] = f.response.p();
    j["response_probs"] = mat_to_json(f.response.probs);
    return j;
}

FullParamsd full_params_from_json(const json& j) {
    FullParamsd f;
    f.mixture = mixture_from_json(j);
    f.response.probs = mat_from_json(j.at("response_probs"));
    const Index p = j.value("p", f.response.probs.cols());
    if (f.response.probs.rows() == 0) f.response.probs.resize(f.mixture.k(), p);
    return f;
}

json to_json(const FinalFitd& f) {
    return {{"phi", vec_to_json(f.phi)},           {"noise_var", f.noise_var},
            {"priors", vec_to_json(f.priors)},     {"se", vec_to_json(f.se)},
            {"p_values", vec_to_json(f.p_values)}, {"xtx_inverse", mat_to_json(f.xtx_inverse)}};
}

FinalFitd final_fit_from_json(const json& j) {
    FinalFitd f;
    f.phi = vec_from_json(j.at("phi"));
    f.noise_var = j.at("noise_var").get<double>();
    f.priors = vec_from_json(j.at("priors"));
    f.se = vec_from_json(j.at("se"));
    f.p_values = vec_from_json(j.at("p_values"));
    f.xtx_inverse = mat_from_json(j.at("xtx_inverse"));
    return f;
}

json to_json(const EmTrace& t) {
    return {{"loglik_per_iter", t.loglik_per_iter},
            {"iterations", t.iterations},
            {"converged", t.converged},
            {"start_index", t.start_index},
            {"empty_class_steps", t.empty_class_steps}};
}

EmTrace trace_from_json(const json& j) {
    EmTrace t;
    t.loglik_per_iter = j.at("loglik_per_iter").get<std::vector<double>>();
    t.iterations = j.at("iterations").get<int>();
    t.converged = j.at("converged").get<bool>();
    t.start_index = j.at("start_index").get<int>();
    t.empty_class_steps = j.value("empty_class_steps", 0);
    return t;
}

json to_json(const ModelFile& m) {
    json j = {{"format", "mcr-model"},
              {"version", 1},
              {"k", m.k},
              {"p", m.p},
              {"q", m.q},
              {"x_names", m.x_names},
              {"initial", to_json(m.initial)},
              {"final", to_json(m.final_fit)},
              {"em_trace", to_json(m.trace)},
              {"loglik_limited", m.loglik_limited},
              {"bic", m.bic}};
    if (m.k_hat) {
        j["k_hat"] = *m.k_hat;
        json values = json::array();
        // JSON has no infinity; failed candidates are stored as null.
        for (double v : m.bic_values) values.push_back(std::isfinite(v) ? json(v) : json(nullptr));
        j["bic_values"] = values;
    }
    return j;
}

ModelFile model_from_json(const json& j) {
    try {
        if (j.value("format", "") != "mcr-model") throw SchemaMismatch("not an mcr-model file");
        ModelFile m;
        m.k = j.at("k").get<Index>();
        m.p = j.at("p").get<Index>();
        m.q = j.at("q").get<Index>();
        m.x_names = j.at("x_names").get<std::vector<std::string>>();
        m.initial = full_params_from_json(j.at("initial"));
        m.final_fit = final_fit_from_json(j.at("final"));
        m.trace = trace_from_json(j.at("em_trace"));
        m.loglik_limited = j.at("loglik_limited").get<double>();
        m.bic = j.at("bic").get<double>();
        if (j.contains("k_hat")) {
            m.k_hat = j.at("k_hat").get<Index>();
            for (const auto& v : j.at("bic_values"))
                m.bic_values.push_back(v.is_null() ? std::numeric_limits<double>::infinity() : v.get<double>());
        }
        if (m.initial.k() != m.k || m.initial.response.p() != m.p || m.initial.mixture.q() != m.q ||
            m.final_fit.k() != m.k || m.final_fit.q() != m.q) {
            throw SchemaMismatch("model blocks disagree with declared k, p, q");
        }
        return m;
    } catch (const json::exception& e) {
        throw SchemaMismatch(std::string("malformed model: ") + e.what());
    }
}

void save_json(const std::filesystem::path& path, const json& j) {
    auto os = open_out(path);
    os << j.dump(2) << "\n";
    if (!os) throw IoError("write failed: " + path.string());
}

json load_json(const std::filesystem::path& path) {
    auto is = open_in(path);
    try {
        return json::parse(is);
    } catch (const json::exception& e) {
        throw SchemaMismatch(path.string() + ": invalid JSON: " + e.what());
    }
}

void save_model(const std::filesystem::path& path, const ModelFile& m) { save_json(path, to_json(m)); }

ModelFile load_model(const std::filesystem::path& path) { return model_from_json(load_json(path)); }

// ---------------------------------------------------------------------------
// MatrixMarket

Eigen::SparseMatrix<double> read_matrix_market(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0)
        throw SchemaMismatch("missing %%MatrixMarket banner");
    std::istringstream banner(line);
    std::string tag, object, layout, field, symmetry;
    banner >> tag >> object >> layout >> field >> symmetry;
    if (object != "matrix" || layout != "coordinate")
        throw SchemaMismatch("only 'matrix coordinate' MatrixMarket files are supported");
    const bool pattern = (field == "pattern");
    if (!pattern && field != "integer" && field != "real")
        throw SchemaMismatch("unsupported MatrixMarket field '" + field + "'");
    if (!symmetry.empty() && symmetry != "general")
        throw SchemaMismatch("only general MatrixMarket matrices are supported");
    while (std::getline(is, line) && (line.empty() || line[0] == '%')) {
    }
    Index rows = 0, cols = 0, nnz = 0;
    {
        std::istringstream size_line(line);
        if (!(size_line >> rows >> cols >> nnz)) throw SchemaMismatch("bad MatrixMarket size line");
    }
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(std::size_t(nnz));
    for (Index e = 0; e < nnz; ++e) {
        if (!std::getline(is, line)) throw SchemaMismatch("MatrixMarket file ends early");
        std::istringstream entry(line);
        Index r = 0, c = 0;
        double v = 1;
        if (!(entry >> r >> c) || (!pattern && !(entry >> v))) throw SchemaMismatch("bad MatrixMarket entry");
        if (r < 1 || r > rows || c < 1 || c > cols) throw SchemaMismatch("MatrixMarket entry out of range");
        trip.emplace_back(r - 1, c - 1, v);
    }
    Eigen::SparseMatrix<double> m(rows, cols);
    m.setFromTriplets(trip.begin(), trip.end());
    m.makeCompressed();
    return m;
}

Eigen::SparseMatrix<double> load_matrix_market(const std::filesystem::path& path) {
    auto is = open_in(path);
    return read_matrix_market(is);
}

void write_matrix_market(std::ostream& os, const Eigen::SparseMatrix<double>& m, bool pattern) {
    os << "%%MatrixMarket matrix coordinate " << (pattern ? "pattern" : "real") << " general\n";
    os << m.rows() << " " << m.cols() << " " << m.nonZeros() << "\n";
    for (Index j = 0; j < m.outerSize(); ++j) {
        for (Eigen::SparseMatrix<double>::InnerIterator it(m, j); it; ++it) {
            os << it.row() + 1 << " " << j + 1;
            if (!pattern) os << " " << format_double(it.value());
            os << "\n";
        }
    }
}

void save_matrix_market(const std::filesystem::path& path, const Eigen::SparseMatrix<double>& m,
                        bool pattern) {
    auto os = open_out(path);
    write_matrix_market(os, m, pattern);
    if (!os) throw IoError("write failed: " + path.string());
}

Table load_csv(const std::filesystem::path& path) {
    auto is = open_in(path);
    Table t;
    std::string line;
    if (!std::getline(is, line)) throw SchemaMismatch(path.string() + ": empty CSV");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    for (auto cell : split_commas(line)) t.header.emplace_back(cell);
    std::vector<std::vector<double>> rows;
    while (std::getline(is, line)) {
        if (line.empty() || line == "\r") continue;
        const auto cells = split_commas(line);
        if (cells.size() != t.header.size())
            throw SchemaMismatch(path.string() + ": row " + std::to_string(rows.size() + 1) +
                                 " has the wrong number of fields");
        std::vector<double> row;
        for (auto cell : cells) row.push_back(parse_double(cell));
        rows.push_back(std::move(row));
    }
    t.values.resize(Index(rows.size()), Index(t.header.size()));
    for (std::size_t r = 0; r < rows.size(); ++r)
        for (std::size_t c = 0; c < t.header.size(); ++c) t.values(Index(r), Index(c)) = rows[r][c];
    return t;
}

}  // namespace mcr::io
