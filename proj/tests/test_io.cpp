#include <sstream>

#include "doctest.h"
#include "mcr/io.hpp"
#include "support.hpp"

using namespace mcr;
using namespace testing;

TEST_SUITE("cli") {

TEST_CASE("doubles round-trip through text") {
    for (double v : {0.1, -1e-300, 123456789.123456789, 5e-324, 1.0 / 3.0}) CHECK(io::parse_double(io::format_double(v)) == v);
    CHECK(io::format_double(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(std::isnan(io::parse_double("nan")));
    CHECK(io::parse_double(" 2.5 ") == 2.5);
    CHECK_THROWS_AS(io::parse_double("2.5x"), SchemaMismatch);
    CHECK_THROWS_AS(io::parse_double(""), SchemaMismatch);
}

TEST_CASE("dataset round-trip") {
    const Simulation sim = generate(default_design(40, 12, 5));
    std::stringstream ss;
    io::write_dataset(ss, sim.data, {"a", "b", "c", "d", "e", "f", "g", "h"});
    const io::NamedDataset back = io::read_dataset(ss);
    CHECK(back.data.y == sim.data.y);
    CHECK(back.data.x == sim.data.x);
    CHECK(dense(back.data.z) == dense(sim.data.z));
    CHECK(*back.data.true_labels == *sim.data.true_labels);
    CHECK(back.x_names[7] == "h");

    Datasetd unlabeled = sim.data;
    unlabeled.true_labels.reset();
    std::stringstream s2;
    io::write_dataset(s2, unlabeled);
    const auto b2 = io::read_dataset(s2);
    CHECK(!b2.data.true_labels);
    CHECK(b2.x_names.front() == "x1");
}

TEST_CASE("malformed datasets are rejected") {
    std::stringstream bad("{\"format\": \"something-else\"}");
    CHECK_THROWS_AS(io::read_dataset(bad), SchemaMismatch);
    std::stringstream junk("not json");
    CHECK_THROWS_AS(io::read_dataset(junk), SchemaMismatch);
    CHECK_THROWS_AS(io::load_dataset("/nonexistent/file.json"), IoError);

    const Simulation sim = generate(default_design(5, 3, 5));
    std::stringstream ss;
    io::write_dataset(ss, sim.data);
    std::string text = ss.str();
    text.replace(text.find("\"n\": 5"), 6, "\"n\": 6");
    std::stringstream edited(text);
    CHECK_THROWS_AS(io::read_dataset(edited), SchemaMismatch);
}

TEST_CASE("model file round-trips bit for bit") {
    const Simulation sim = generate(default_design(300, 20, 6));
    const McrFitd fit = fit_mcr(sim.data, 5);
    io::ModelFile m;
    m.k = 5;
    m.p = 20;
    m.q = 8;
    for (int a = 1; a <= 8; ++a) m.x_names.push_back("x" + std::to_string(a));
    m.initial = fit.initial_params();
    m.final_fit = fit.final_fit;
    m.trace = fit.initial.trace;
    m.loglik_limited = loglik_limited(sim.data, fit.initial.params);
    m.bic = bic(sim.data, m.initial);
    m.k_hat = 5;
    m.bic_values = {1.5, std::numeric_limits<double>::infinity(), 0.25};

    const auto dir = temp_dir("model_roundtrip");
    io::save_model(dir / "m.json", m);
    const io::ModelFile back = io::load_model(dir / "m.json");
    CHECK(back.initial.mixture.intercepts == m.initial.mixture.intercepts);
    CHECK(back.initial.mixture.slopes == m.initial.mixture.slopes);
    CHECK(back.initial.mixture.noise_var == m.initial.mixture.noise_var);
    CHECK(back.initial.response.probs == m.initial.response.probs);
    CHECK(back.final_fit.phi == m.final_fit.phi);
    CHECK(back.final_fit.se == m.final_fit.se);
    CHECK(back.final_fit.xtx_inverse == m.final_fit.xtx_inverse);
    CHECK(back.trace.loglik_per_iter == m.trace.loglik_per_iter);
    CHECK(back.bic == m.bic);
    CHECK(back.k_hat == m.k_hat);
    CHECK(std::isinf(back.bic_values[1]));
    CHECK(back.bic_values[2] == 0.25);
    CHECK(loglik_limited(sim.data, back.initial.mixture) == m.loglik_limited);

    io::save_model(dir / "m2.json", back);
    CHECK(slurp(dir / "m.json") == slurp(dir / "m2.json"));

    nlohmann::json j = io::to_json(m);
    j["p"] = 21;
    CHECK_THROWS_AS(io::model_from_json(j), SchemaMismatch);
}

TEST_CASE("MatrixMarket") {
    std::stringstream in(
        "%%MatrixMarket matrix coordinate integer general\n"
        "% comment\n"
        "3 4 3\n"
        "1 1 2\n"
        "3 4 7\n"
        "2 2 1\n");
    const auto m = io::read_matrix_market(in);
    CHECK(m.rows() == 3);
    CHECK(m.cols() == 4);
    CHECK(m.coeff(0, 0) == 2);
    CHECK(m.coeff(2, 3) == 7);
    CHECK(m.nonZeros() == 3);

    std::stringstream out;
    io::write_matrix_market(out, m, true);
    std::stringstream again(out.str());
    const auto p = io::read_matrix_market(again);
    CHECK(Mat(p) == (Mat(m).array() != 0).cast<double>().matrix());

    std::stringstream bad("%%MatrixMarket matrix array real general\n1 1\n1\n");
    CHECK_THROWS_AS(io::read_matrix_market(bad), SchemaMismatch);
    std::stringstream oob("%%MatrixMarket matrix coordinate pattern general\n2 2 1\n3 1\n");
    CHECK_THROWS_AS(io::read_matrix_market(oob), SchemaMismatch);
}

}
